use clap::Parser;

fn main() {
    let cli = ssgloss::cli::Cli::parse();
    if let Err(e) = ssgloss::cli::run(cli) {
        eprintln!("ssgloss: {e}");
        std::process::exit(e.exit_code());
    }
}
