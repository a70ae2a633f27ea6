//! Binary entry point; all logic lives in [`gridflock::cli`].

use std::process::ExitCode;

fn main() -> ExitCode {
    gridflock::cli::entry()
}
