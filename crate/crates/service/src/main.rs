use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use neurotopo_service::{router, AppState, ServiceConfig};

#[derive(Parser)]
#[command(
    name = "neurotopo-service",
    version,
    about = "HTTP service for interactive synapse counting"
)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Directory for finalized reports and overlays.
    #[arg(long, default_value = "reports")]
    reports: PathBuf,
    /// Seconds of inactivity after which a session is dropped.
    #[arg(long, default_value_t = 1800)]
    idle_timeout: u64,
    /// Largest accepted upload in MiB.
    #[arg(long, default_value_t = 64)]
    max_upload_mib: usize,
}

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let args = Args::parse();
    let state = AppState::new(ServiceConfig {
        idle_timeout: Duration::from_secs(args.idle_timeout),
        report_dir: args.reports,
        max_upload_bytes: args.max_upload_mib << 20,
    });
    state.spawn_reaper();
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
