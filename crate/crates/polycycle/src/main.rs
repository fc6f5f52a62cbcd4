use clap::Parser;

fn main() {
    let cli = polycycle::cli::Cli::parse();
    if let Err(e) = polycycle::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
