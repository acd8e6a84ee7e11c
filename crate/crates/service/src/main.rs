use std::net::SocketAddr;

use aerofactor_service::{app, AppState};

const DEFAULT_PORT: u16 = 8080;
const DEFAULT_DATA_DIR: &str = "aerofactor-data";

#[tokio::main]
async fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let port = match std::env::var("AEROFACTOR_PORT") {
        Ok(v) => match v.parse::<u16>() {
            Ok(p) => p,
            Err(_) => {
                eprintln!("AEROFACTOR_PORT must be a port number, got `{v}`");
                std::process::exit(2);
            }
        },
        Err(_) => DEFAULT_PORT,
    };
    let data_dir = std::env::var("AEROFACTOR_DATA_DIR").unwrap_or_else(|_| DEFAULT_DATA_DIR.into());
    let state = match AppState::new(&data_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot use data dir {data_dir}: {e}");
            std::process::exit(2);
        }
    };
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = match tokio::net::TcpListener::bind(addr).await {
        Ok(l) => l,
        Err(e) => {
            eprintln!("cannot bind {addr}: {e}");
            std::process::exit(3);
        }
    };
    log::info!("listening on {addr}, data in {data_dir}");
    let shutdown = async {
        let _ = tokio::signal::ctrl_c().await;
        log::info!("shutting down");
    };
    if let Err(e) = axum::serve(listener, app(state)).with_graceful_shutdown(shutdown).await {
        eprintln!("server error: {e}");
        std::process::exit(3);
    }
}
