use clap::Parser;

fn main() {
    if let Err(e) = afcmap_cli::run(afcmap_cli::Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
