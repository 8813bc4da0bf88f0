//! Command-line front end. [`run`] is the whole program minus process
//! plumbing so that tests can drive it in-process.

mod args;
mod commands;
mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use args::{Cli, Command};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            let code = e.exit_code();
            let sink: &mut dyn Write = if code == 0 { stdout } else { stderr };
            let _ = sink.write_all(text.as_bytes());
            return if code == 0 { EXIT_OK } else { EXIT_USAGE };
        }
    };
    let result = match &cli.command {
        Command::Fit(a) => commands::fit(a, stdout),
        Command::Predict(a) => commands::predict(a, stdout),
        Command::Optimize(a) => commands::optimize_cmd(a, stdout),
        Command::Zplot(a) => commands::zplot(a, stdout),
        Command::Fleet(a) => commands::fleet(a, stdout, stderr),
        Command::Validate(a) => commands::validate(a, stdout, stderr),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_FAILURE
        }
    }
}
