use clap::Parser;
use dtqw::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli, &mut std::io::stdout().lock()) {
        eprintln!("phase-scan: {e}");
        std::process::exit(e.exit_code());
    }
}
