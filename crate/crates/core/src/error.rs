use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("non-integer value {value} assigned to `{var}`")]
    NonInteger { var: String, value: String },
}

/// Violations of the structural invariants of the program model.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("expression `{0}` is not affine")]
    NotAffine(String),
    #[error("missing cost variable `cost`")]
    MissingCost,
    #[error("unknown location `{0}`")]
    UnknownLocation(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("duplicate variable `{0}`")]
    DuplicateVariable(String),
    #[error("location `{0}` has no outgoing transition")]
    NoOutgoing(String),
    #[error("terminal location `{0}` must have exactly one outgoing transition: a self-loop with guard true and identity update")]
    BadTerminal(String),
    #[error("transition `{id}` has no update entry for `{var}`")]
    MissingUpdate { id: String, var: String },
    #[error("duplicate transition id `{0}`")]
    DuplicateTransition(String),
    #[error("initial assertion must fix cost = 0 (conjuncts `cost >= 0` and `-cost >= 0`)")]
    ThetaCost,
    #[error("transition `{0}` updates cost nondeterministically")]
    NondetCost(String),
    #[error("{0}")]
    Unsupported(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: unsupported construct: {what}")]
    Unsupported { line: usize, col: usize, what: String },
    #[error(transparent)]
    Semantic(#[from] ModelError),
}

impl ParseError {
    pub fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }
}
