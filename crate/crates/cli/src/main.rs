use clap::Parser;

fn main() {
    let cli = rca_cli::Cli::parse();
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = rca_cli::run(cli, &mut stdout) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}
