use clap::Parser;

use involution_cli::commands;
use involution_cli::RunConfig;

fn main() {
    let config = RunConfig::parse();
    match commands::run(&config) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
