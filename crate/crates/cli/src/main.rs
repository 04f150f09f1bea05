use clap::Parser;

fn main() {
    let cli = afflab_cli::Cli::parse();
    std::process::exit(afflab_cli::run(&cli));
}
