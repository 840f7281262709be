use clap::Parser;

fn main() {
    let cli = absmin_cli::Cli::parse();
    if let Err(e) = absmin_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
