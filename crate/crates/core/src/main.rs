use clap::Parser;

use mimo_arq::cli::{run, Args, RunSpec};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let spec = RunSpec::from(Args::parse());
    match run(&spec) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}
