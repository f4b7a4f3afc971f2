use std::process::ExitCode;

use clap::Parser;

use scatterquery_cli::cli::{self, Cli, Command};
use scatterquery_core::service::ApiError;

fn run(cli: Cli) -> Result<(), ApiError> {
    let cfg = cli::load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Serve(args) => tokio::runtime::Builder::new_multi_thread()
            .enable_all()
            .build()
            .map_err(|e| ApiError::new("io-error", e.to_string()))?
            .block_on(cli::serve(args, cfg)),
        Command::Build(args) => {
            println!("{}", cli::build(args, &cfg)?);
            Ok(())
        }
        Command::Query(args) => {
            let resp = cli::query(args, &cfg)?;
            if args.json {
                let text = serde_json::to_string_pretty(&resp)
                    .map_err(|e| ApiError::new("internal", e.to_string()))?;
                println!("{text}");
            } else {
                print!("{}", cli::render_table(&resp));
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
