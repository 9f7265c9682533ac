use std::panic;

use clap::Parser;
use cosma::cli::{run, Cli, EXIT_INTERNAL};

fn main() {
    let cli = Cli::parse();
    let code = panic::catch_unwind(|| {
        let stdout = std::io::stdout();
        let stderr = std::io::stderr();
        run(cli, &mut stdout.lock(), &mut stderr.lock())
    })
    .unwrap_or(EXIT_INTERNAL);
    std::process::exit(code);
}
