use clap::Parser;
use ipcdv_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(text) => print!("{text}"),
        Err(e) => {
            eprintln!("ipcdv: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
