use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;

use disaster_core::config::Config;
use disaster_core::server::{AlertServer, SystemClock};

/// Disaster alert server.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured listen address.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() {
    let args = Args::parse();
    if let Err(e) = run(args).await {
        eprintln!("disaster-server: {e}");
        std::process::exit(1);
    }
}

async fn run(args: Args) -> Result<(), Box<dyn std::error::Error>> {
    let config = Config::load(&args.config)?;
    let listen = args.listen.unwrap_or_else(|| config.listen.clone());
    let server = tokio::task::spawn_blocking(move || AlertServer::from_config(&config, Arc::new(SystemClock))).await??;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, disaster_server::router(Arc::new(server)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
