//! Batch front end for the toxmoral pipeline.
//!
//! | exit code | meaning |
//! |-----------|---------|
//! | 0 | success, or `--help` / `--version` |
//! | 1 | usage: bad flags or invalid configuration |
//! | 2 | data: unreadable or malformed input, training failure |
//! | 3 | scoring API or its cache |

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
mod commands;
pub mod manifest;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_PROVIDER: i32 = 3;

/// A command failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("{}: {e}", path.display()),
        }
    }
}

impl From<toxmoral::Error> for Failure {
    fn from(e: toxmoral::Error) -> Self {
        let code = if e.is_provider() {
            EXIT_PROVIDER
        } else if matches!(e, toxmoral::Error::InvalidArgument(_)) {
            EXIT_USAGE
        } else {
            EXIT_DATA
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code. Errors are reported on stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match args::Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    init_logging(cli.verbose);
    match commands::dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(f) => {
            eprintln!("error: {}", f.message);
            if f.code == EXIT_USAGE {
                eprintln!("\nFor more information, try '--help'.");
            }
            f.code
        }
    }
}
