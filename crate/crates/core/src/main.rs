use clap::Parser;

use halluscope::cli::{error_document, execute, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(err) = execute(cli) {
        eprintln!("{}", error_document(&err));
        std::process::exit(1);
    }
}
