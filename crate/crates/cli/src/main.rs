mod args;
mod commands;

use clap::Parser;

#[derive(Parser)]
#[command(name = "moea-drl", version, about = "Multi-objective orienteering with an evolutionary selector and a pointer-network router")]
struct Cli {
    #[command(subcommand)]
    command: args::Command,
}

fn main() -> std::process::ExitCode {
    match commands::run(Cli::parse().command) {
        Ok(()) => std::process::ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::ExitCode::FAILURE
        }
    }
}
