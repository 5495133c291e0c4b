mod common;

use common::AstGen;
use partypes::parser::{parse_program, parse_protocol};
use partypes::pretty::{pretty_program, pretty_protocol};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn protocol_text_round_trips(seed in any::<u64>(), depth in 0u32..=4) {
        let ast = AstGen::new(seed).protocol(depth);
        let text = pretty_protocol(&ast);
        let parsed = parse_protocol(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(parsed.normalize(), ast.normalize(), "{}", text);
    }

    #[test]
    fn printing_is_stable(seed in any::<u64>()) {
        let ast = AstGen::new(seed).protocol(3);
        let once = pretty_protocol(&ast);
        let twice = pretty_protocol(&parse_protocol(&once).unwrap());
        prop_assert_eq!(once, twice);
    }

    #[test]
    fn diagnostics_point_into_the_text(seed in any::<u64>(), cut in 0usize..400, junk in "[{}():,;.#@$a-z0-9 ]{1,3}") {
        let text = pretty_protocol(&AstGen::new(seed).protocol(3));
        let at = text.char_indices().map(|(i, _)| i).nth(cut % text.chars().count().max(1)).unwrap_or(0);
        let broken = format!("{}{junk}{}", &text[..at], &text[at..]);
        if let Err(e) = parse_protocol(&broken) {
            prop_assert!(!e.diagnostics.is_empty());
            let lines: Vec<&str> = broken.split('\n').collect();
            for d in &e.diagnostics {
                let line = d.span.start_line as usize;
                prop_assert!(line >= 1 && line <= lines.len(), "{d} in\n{broken}");
                prop_assert!(d.span.start_col >= 1 && d.span.start_col as usize <= lines[line - 1].chars().count() + 1, "{d} in\n{broken}");
            }
        }
    }

    #[test]
    fn crlf_line_endings_parse_the_same(seed in any::<u64>()) {
        let text = pretty_protocol(&AstGen::new(seed).protocol(3));
        let crlf = text.replace('\n', "\r\n");
        prop_assert_eq!(parse_protocol(&crlf).unwrap(), parse_protocol(&text).unwrap());
    }
}

#[test]
fn bundled_programs_round_trip() {
    for e in &partypes::corpus::EXAMPLES {
        let prog = parse_program(e.program).unwrap();
        let again = parse_program(&pretty_program(&prog)).unwrap();
        assert_eq!(again, prog, "{}", e.program_file);
    }
}

#[test]
fn bundled_protocols_round_trip() {
    for (file, text) in partypes::corpus::protocols() {
        let p = parse_protocol(text).unwrap();
        assert_eq!(parse_protocol(&pretty_protocol(&p)).unwrap(), p, "{file}");
    }
}
