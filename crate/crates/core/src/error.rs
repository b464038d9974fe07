use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A scenario or argument failed validation; `field` is the dotted path.
    #[error("invalid configuration at `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// Some mass would travel farther than one cell in a single step.
    #[error("CFL condition violated: displacement {displacement:.6e} exceeds cell size {cell:.6e}")]
    Cfl { displacement: f64, cell: f64 },

    /// A numerical invariant broke (negative density, NaN, shape mismatch).
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
