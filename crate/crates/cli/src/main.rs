use clap::Parser;
use riocpd_cli::args::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = riocpd_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
