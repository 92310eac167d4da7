use std::path::PathBuf;
use std::sync::Arc;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use atomflow_core::clock::SystemClock;
use atomflow_core::toolkit::{builtin_registry, Dataset, ToolkitConfig};
use atomflow_gateway::{backend_from_config, build_state, router, GatewayConfig};

/// Serve the materials tools and agent over HTTP.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// JSON config file; ATOMFLOW_* environment variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Listen address, overriding config and environment.
    #[arg(long)]
    listen: Option<String>,
}

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    tracing_subscriber::fmt().with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into())).init();
    let args = Args::parse();
    let mut config = match &args.config {
        Some(p) => GatewayConfig::from_file(p)?,
        None => GatewayConfig::default(),
    };
    config.apply_env(std::env::vars())?;
    if let Some(l) = args.listen {
        config.listen = l;
    }
    if config.keys.is_empty() {
        tracing::warn!("no API keys configured; every protected route will answer 401");
    }
    let registry = Arc::new(builtin_registry(Arc::new(Dataset::bundled()), ToolkitConfig { max_sites: config.max_sites }));
    let backend = backend_from_config(&config)?;
    if backend.is_none() {
        tracing::warn!("no language model configured; /agent/chat will answer 503");
    }
    let listen = config.listen.clone();
    let state = build_state(config, registry, backend, Arc::new(SystemClock))?;
    let listener = tokio::net::TcpListener::bind(&listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
