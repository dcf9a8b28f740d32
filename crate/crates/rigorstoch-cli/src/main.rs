use clap::Parser;

fn main() {
    let cli = rigorstoch_cli::Cli::parse();
    if let Err(e) = rigorstoch_cli::run(&cli) {
        eprintln!("{}", e.to_json());
        std::process::exit(e.exit_code());
    }
}
