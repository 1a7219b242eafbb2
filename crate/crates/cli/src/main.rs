use clap::Parser;
use locus_cli::{init_logging, run, Cli};

fn main() {
    let cli = Cli::parse();
    init_logging(cli.log_level);
    std::process::exit(run(cli));
}
