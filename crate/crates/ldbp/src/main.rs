use clap::Parser;
use ldbp::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
