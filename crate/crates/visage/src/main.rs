use clap::Parser;
use visage::commands::{run, Cli};

fn main() {
    // clap handles --help/--version with exit 0 and bad flags with exit 2.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(i32::from(e.exit_code()));
    }
}
