//! Front ends for the `.ts` transition-system format and the `.imp`
//! mini-language.

pub mod expr;
pub mod imp;
pub(crate) mod lexer;
mod lower;
pub(crate) mod ts_format;

pub use imp::{parse_program_ast, Program};
pub use lower::{lower_program, TERMINAL};
pub use ts_format::{parse_polynomial, parse_transition_system, parse_valuation};


use crate::error::ParseError;
use crate::ts::TransitionSystem;

/// Parses and lowers an `.imp` program.
pub fn parse_program(text: &str) -> Result<TransitionSystem, ParseError> {
    lower_program(&parse_program_ast(text)?)
}
