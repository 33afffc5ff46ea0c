//! Command-line front end: sample reference surfaces, build connection
//! coefficients, check compatibility, integrate frames, reconstruct
//! immersions, and run the refinement and convergence studies.
//!
//! Every run writes a machine-readable JSON report (with the fully
//! resolved configuration embedded) next to a short human summary on
//! stdout. Exit codes: 0 success, 1 rejected input or configuration,
//! 2 numerical degeneracy detected mid-computation.

mod commands;
mod config;
mod io;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    // die quietly when the consumer of our stdout goes away (e.g. `| head`)
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help and version are not failures
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = match err.downcast_ref::<formsurf::Error>() {
                Some(core) if core.is_numerical() => 2,
                _ => 1,
            };
            std::process::exit(code);
        }
    }
}
