//! Two-sorted formula language: abstract syntax, parser, printer and schemata.

mod formula;
mod parse;
mod print;
mod schema;

pub use formula::{expand_atoms, fresh_var, Atom, Family, Formula, Sort, SortError};
pub use parse::{
    formula_lines, parse, parse_inferred, AtomDecl, ParseError, ParseErrorKind, Signature,
    SignatureError,
};
pub use print::Printer;
pub use schema::{Assignment, MetaVar, Schema, SchemaError};
