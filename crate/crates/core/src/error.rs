use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A physical argument fell outside the domain of the formula.
    #[error("domain error: {what} = {value} ({reason})")]
    Domain {
        what: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("grid error: {0}")]
    Grid(String),

    /// The quadratic phase of the propagation kernel is undersampled.
    #[error(
        "aliasing guard: kernel phase step {phase_step:.3} rad per sample exceeds pi \
         (grid step {grid_step:.3e} m, max offset {max_offset:.3e} m)"
    )]
    Aliasing {
        phase_step: f64,
        grid_step: f64,
        max_offset: f64,
    },

    #[error("config error at `{key}`{}: {message}", line.map(|l| format!(" (line {l})")).unwrap_or_default())]
    Config {
        key: String,
        line: Option<usize>,
        message: String,
    },

    #[error("pattern error: {0}")]
    Pattern(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("malformed data at line {line}: {message}")]
    Data { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(what: &'static str, value: f64, reason: &'static str) -> Self {
        Error::Domain {
            what,
            value,
            reason,
        }
    }

    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line: None,
            message: message.into(),
        }
    }
}
