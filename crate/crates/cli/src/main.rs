use clap::Parser;

fn main() {
    let cli = rprofile_cli::Cli::parse();
    if let Err(e) = rprofile_cli::run(cli) {
        eprintln!("rprofile: {e}");
        std::process::exit(e.exit_code());
    }
}
