use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration or input files. Exit 2.
    #[error("{0}")]
    Config(String),
    /// Solver or other numerical failure. Exit 1.
    #[error("{0}")]
    Numerical(String),
    /// Estimate written, but the subtracted variance was negative. Exit 3.
    #[error("{0}")]
    NonPhysical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Numerical(_) => 1,
            CliError::Config(_) => 2,
            CliError::NonPhysical(_) => 3,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<kagome_core::SpectrumError> for CliError {
    fn from(e: kagome_core::SpectrumError) -> Self {
        match e {
            kagome_core::SpectrumError::Linalg(_) => CliError::Numerical(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<kagome_core::DisorderError> for CliError {
    fn from(e: kagome_core::DisorderError) -> Self {
        match e {
            kagome_core::DisorderError::Spectrum(s) => s.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<kagome_core::TransmissionError> for CliError {
    fn from(e: kagome_core::TransmissionError) -> Self {
        match e {
            kagome_core::TransmissionError::Spectrum(s) => s.into(),
            kagome_core::TransmissionError::Disorder(d) => d.into(),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<kagome_core::CircuitError> for CliError {
    fn from(e: kagome_core::CircuitError) -> Self {
        CliError::Config(e.to_string())
    }
}
