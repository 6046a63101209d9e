use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;

/// Standalone exosquat job server.
#[derive(Parser)]
#[command(name = "exosquatd", version, about)]
struct Args {
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1:8750")]
    addr: SocketAddr,

    /// Root directory for job outputs.
    #[arg(long, default_value = "runs")]
    out_root: PathBuf,
}

#[tokio::main]
async fn main() {
    tracing_subscriber::fmt().init();
    let args = Args::parse();
    std::fs::create_dir_all(&args.out_root).expect("create output root");
    let (addr, handle) = exosquat_service::serve(args.addr, args.out_root)
        .await
        .expect("bind server");
    println!("exosquatd listening on http://{addr}");
    handle.await.expect("server task");
}
