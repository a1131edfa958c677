use clap::Parser;
use landau_levels::cli::{dispatch, Cli};

fn main() {
    std::process::exit(dispatch(&Cli::parse()));
}
