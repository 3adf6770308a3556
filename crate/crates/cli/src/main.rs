use clap::Parser;

fn main() {
    std::process::exit(confdim_cli::run(confdim_cli::Cli::parse()));
}
