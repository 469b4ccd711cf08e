use clap::Parser;

use pulselab::cli::{execute, Cli, EXIT_USAGE};

fn main() {
    let cli = Cli::parse();
    let level = if cli.verbose { log::LevelFilter::Debug } else { log::LevelFilter::Warn };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            std::process::exit(EXIT_USAGE);
        }
    }
    std::process::exit(execute(&cli));
}
