use thiserror::Error;

/// Errors produced by the simulation and estimation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument left the physical domain of a closed-form law.
    #[error("domain error: {0}")]
    Domain(String),

    /// A requested or simulated geometry would put the plates in contact.
    #[error("plate contact: {0}")]
    Contact(String),

    /// Invalid configuration, plan, or file content.
    #[error("configuration error: {0}")]
    Config(String),

    /// The fit problem does not determine its parameters.
    #[error("identifiability error: {0}")]
    Identifiability(String),

    /// The normal matrix is singular beyond what damping can rescue.
    #[error("degenerate fit: {0}")]
    Degenerate(String),

    /// A fit hit its iteration cap or was rejected by a validation gate.
    #[error("convergence failure: {0}")]
    Convergence(String),

    /// No resolvable peak in a spectrum handed to the line fitter.
    #[error("peak detection failed: {0}")]
    NoPeak(String),

    /// Input data files are missing, malformed, or inconsistent.
    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Contact(_) | Error::Domain(_) => 3,
            Error::Data(_) | Error::Identifiability(_) | Error::Io(_) => 4,
            Error::Degenerate(_) | Error::Convergence(_) | Error::NoPeak(_) => 5,
        }
    }
}
