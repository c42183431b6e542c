use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Physics(String),
}

impl CliError {
    /// 2 for configuration and I/O trouble, 3 when the physics or a solver fails.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Physics(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(std::io::Error::other(e.to_string()))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

macro_rules! physics_from {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Physics(e.to_string())
            }
        })*
    };
}

physics_from!(
    rydgate::excitation::ExcitationError,
    rydgate::gatephase::GateError,
    rydgate::dynamics::DynamicsError,
    rydgate::circuits::CircuitError
);

pub type Result<T> = std::result::Result<T, CliError>;
