use clap::Parser;

use sampmodel::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
