use clap::Parser;

use rtcdrift_cli::{run_to_destination, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run_to_destination(&cli) {
        eprintln!("rtcdrift: {e}");
        std::process::exit(e.exit_code());
    }
}
