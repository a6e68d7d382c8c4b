//! `GET /state`, `GET /manifest/<root-hex>`, `GET /object/<digest-hex>`.

use std::net::SocketAddr;
use std::sync::{Arc, RwLock};
use std::thread::JoinHandle;
use std::time::Duration;

use tiny_http::{Header, Method, Response, Server};

use super::{Archive, ArchivistError};
use crate::hashmerkle::Digest32;

type Reply = (u16, &'static str, Vec<u8>);

fn route(archive: &Archive, method: &Method, url: &str) -> Reply {
    const TEXT: &str = "text/plain; charset=utf-8";
    const BIN: &str = "application/octet-stream";
    if *method != Method::Get {
        return (405, TEXT, b"method not allowed\n".to_vec());
    }
    let path = url.split('?').next().unwrap_or(url);
    let not_found = || (404, TEXT, b"not found\n".to_vec());
    let parse = |hex: &str| Digest32::from_hex(hex).ok();
    match path.trim_start_matches('/').split_once('/') {
        None if path == "/state" => (200, TEXT, archive.serve_state().to_string().into_bytes()),
        Some(("manifest", hex)) => match parse(hex).map(|d| archive.serve_manifest(&d)) {
            Some(Ok(text)) => (200, TEXT, text.into_bytes()),
            _ => not_found(),
        },
        Some(("object", hex)) => match parse(hex).map(|d| archive.serve_object(&d)) {
            Some(Ok(bytes)) => (200, BIN, bytes),
            Some(Err(ArchivistError::Integrity(_))) => (500, TEXT, b"integrity check failed\n".to_vec()),
            _ => not_found(),
        },
        _ => not_found(),
    }
}

/// A running HTTP front end over a shared [`Archive`].
pub struct ArchiveServer {
    server: Arc<Server>,
    addr: SocketAddr,
    workers: Vec<JoinHandle<()>>,
}

impl ArchiveServer {
    /// Bind `addr` (port 0 picks one) and serve with `threads` workers.
    pub fn start(addr: &str, archive: Arc<RwLock<Archive>>, threads: usize) -> Result<Self, ArchivistError> {
        let server = Server::http(addr).map_err(|e| std::io::Error::new(std::io::ErrorKind::AddrNotAvailable, e.to_string()))?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::Unsupported, "not an IP listener"))?;
        let server = Arc::new(server);
        let workers = (0..threads.max(1))
            .map(|_| {
                let server = Arc::clone(&server);
                let archive = Arc::clone(&archive);
                std::thread::spawn(move || loop {
                    let request = match server.recv_timeout(Duration::from_millis(200)) {
                        Ok(Some(r)) => r,
                        Ok(None) => continue,
                        Err(_) => break,
                    };
                    let (status, ctype, body) = {
                        let guard = archive.read().unwrap_or_else(|p| p.into_inner());
                        route(&guard, request.method(), request.url())
                    };
                    let header = Header::from_bytes(&b"Content-Type"[..], ctype.as_bytes()).expect("static header");
                    let _ = request.respond(Response::from_data(body).with_status_code(status).with_header(header));
                })
            })
            .collect();
        Ok(ArchiveServer { server, addr, workers })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Block the calling thread until the workers exit.
    pub fn join(mut self) {
        for w in self.workers.drain(..) {
            let _ = w.join();
        }
    }
}

impl Drop for ArchiveServer {
    fn drop(&mut self) {
        self.server.unblock();
    }
}
