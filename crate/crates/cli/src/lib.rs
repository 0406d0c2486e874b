//! Command-line front end: configuration, simulation runs, analysis and
//! reports. `main.rs` only parses arguments and maps errors to exit codes.

pub mod cli;
pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;

use std::process::ExitCode;

use clap::Parser;

pub use cli::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ghostlab::Error),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn io(what: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Io(format!("{what}: {e}"))
    }

    /// 2 config/input error, 3 numeric error, 4 insufficient data, 1 I/O.
    pub fn exit_code(&self) -> u8 {
        use ghostlab::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::Parse { .. } => 2,
                E::InsufficientData(_) => 4,
                E::Io(_) => 1,
                _ => 3,
            },
        }
    }
}

pub fn init_logging() {
    let env = env_logger::Env::default().filter_or("GHOSTLAB_LOG", "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
