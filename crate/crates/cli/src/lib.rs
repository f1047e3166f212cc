//! Library side of the `mbres` command-line tool: configuration, CSV
//! tables, and one function per subcommand.

pub mod commands;
pub mod config;
pub mod table;

pub use config::{parse_grid, RunConfig, Units};
pub use table::SweepTable;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] mbres_core::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Schema(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
