use clap::Parser;
use kpfcp_cli::cli::{execute, Cli};
use kpfcp_cli::error::EXIT_OK;

fn main() {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(msg) => {
            println!("{msg}");
            std::process::exit(EXIT_OK);
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
