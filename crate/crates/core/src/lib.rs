pub mod bindings;
pub mod cli;
pub mod conform;
pub mod corpus;
pub mod eval;
pub mod interp;
pub mod parser;
pub mod pretty;
pub mod program;
pub mod project;
pub mod protocol;
pub mod simulate;
pub mod span;
pub mod value;
pub mod wellformed;
pub mod witness;
