#![allow(dead_code)]

use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::Arc;

use neuronhub_core::store::Store;
use sha2::{Digest, Sha256};

pub fn neuronhub(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_neuronhub"))
        .args(args)
        .env_remove("SOURCE_DATE_EPOCH")
        .env_remove("NEURONHUB_PORT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub fn sha256_file(path: &Path) -> String {
    let digest = Sha256::digest(std::fs::read(path).unwrap());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Relative path and content of every file under `root`, sorted.
pub fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(PathBuf, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Serves `store` on an ephemeral loopback port for the rest of the runtime.
pub async fn spawn_server(store: Store) -> SocketAddr {
    let app = neuronhub_server::router(Arc::new(store), None);
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    addr
}
