//! Bundled example protocols and programs.

use crate::bindings::{BindingError, BindingsFile};
use crate::parser::{parse_program, parse_protocol, ParseError};
use crate::program::Program;
use crate::protocol::GlobalProtocol;
use crate::wellformed::SizeRange;

#[derive(Debug, Clone, Copy)]
pub struct Example {
    pub name: &'static str,
    pub protocol_file: &'static str,
    pub protocol: &'static str,
    pub program_file: &'static str,
    pub program: &'static str,
    pub bindings: &'static str,
    /// Sizes the example is exercised at.
    pub sizes: SizeRange,
    /// Whether the program should conform and run without deadlock.
    pub correct: bool,
}

impl Example {
    pub fn parse_protocol(&self) -> Result<GlobalProtocol, ParseError> {
        parse_protocol(self.protocol)
    }

    pub fn parse_program(&self) -> Result<Program, ParseError> {
        parse_program(self.program)
    }

    pub fn parse_bindings(&self) -> Result<BindingsFile, BindingError> {
        BindingsFile::parse(self.bindings)
    }
}

pub const FDIFF_PROTOCOL: &str = include_str!("../examples/fdiff.pt");
pub const FDIFF_BINDINGS: &str = include_str!("../examples/fdiff.json");
pub const PI_PROTOCOL: &str = include_str!("../examples/pi.pt");
pub const DOT_PROTOCOL: &str = include_str!("../examples/dot.pt");

pub const EXAMPLES: [Example; 4] = [
    Example {
        name: "fdiff",
        protocol_file: "fdiff.pt",
        protocol: FDIFF_PROTOCOL,
        program_file: "fdiff.mpp",
        program: include_str!("../examples/fdiff.mpp"),
        bindings: FDIFF_BINDINGS,
        sizes: SizeRange { min: 2, max: 16 },
        correct: true,
    },
    Example {
        name: "fdiff-naive",
        protocol_file: "fdiff.pt",
        protocol: FDIFF_PROTOCOL,
        program_file: "fdiff_naive.mpp",
        program: include_str!("../examples/fdiff_naive.mpp"),
        bindings: FDIFF_BINDINGS,
        sizes: SizeRange { min: 2, max: 8 },
        correct: false,
    },
    Example {
        name: "pi",
        protocol_file: "pi.pt",
        protocol: PI_PROTOCOL,
        program_file: "pi.mpp",
        program: include_str!("../examples/pi.mpp"),
        bindings: include_str!("../examples/pi.json"),
        sizes: SizeRange { min: 2, max: 8 },
        correct: true,
    },
    Example {
        name: "dot",
        protocol_file: "dot.pt",
        protocol: DOT_PROTOCOL,
        program_file: "dot.mpp",
        program: include_str!("../examples/dot.mpp"),
        bindings: include_str!("../examples/dot.json"),
        sizes: SizeRange { min: 2, max: 8 },
        correct: true,
    },
];

pub fn example(name: &str) -> Option<&'static Example> {
    EXAMPLES.iter().find(|e| e.name == name)
}

/// The distinct bundled protocols.
pub fn protocols() -> [(&'static str, &'static str); 3] {
    [("fdiff.pt", FDIFF_PROTOCOL), ("pi.pt", PI_PROTOCOL), ("dot.pt", DOT_PROTOCOL)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn everything_parses() {
        for e in &EXAMPLES {
            e.parse_protocol().unwrap_or_else(|err| panic!("{}: {err}", e.protocol_file));
            e.parse_program().unwrap_or_else(|err| panic!("{}: {err}", e.program_file));
            e.parse_bindings().unwrap_or_else(|err| panic!("{}: {err}", e.name));
        }
    }

    #[test]
    fn verdicts_match_expectations() {
        use crate::conform::check_conformance;
        use crate::simulate;
        for e in &EXAMPLES {
            let proto = e.parse_protocol().unwrap();
            let prog = e.parse_program().unwrap();
            let file = e.parse_bindings().unwrap();
            for size in e.sizes.sizes() {
                let b = file.for_size(size);
                let report = check_conformance(&prog, &proto, &b).unwrap();
                let sim = simulate::run(&prog, &b).unwrap();
                assert_eq!(report.passed(), e.correct, "{} at {size}: {}", e.name, report.to_text());
                assert_eq!(sim.is_ok(), e.correct, "{} at {size}: {}", e.name, sim.to_text());
            }
        }
    }
}
