use std::io::Write;
use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use evidesk_service::api;
use evidesk_service::cli::{load_config, run, Cli, Command};
use evidesk_service::engine::Engine;
use evidesk_service::error::ServiceError;

fn serve(cli: &Cli) -> Result<(), ServiceError> {
    let config = load_config(cli.config.as_deref())?;
    let engine = Arc::new(Engine::new(config)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(api::serve(engine))
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Serve => serve(&cli),
        _ => load_config(cli.config.as_deref()).and_then(|config| {
            let reply = run(config, cli.command)?;
            let mut out = std::io::stdout().lock();
            out.write_all(&reply.body)?;
            out.write_all(b"\n")?;
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error ({}): {e}", e.code());
            ExitCode::from(if matches!(e, ServiceError::BadConfig { .. }) { 2 } else { 1 })
        }
    }
}
