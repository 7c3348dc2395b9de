use std::io::Write;
use std::path::{Component, Path, PathBuf};
use std::sync::Arc;

use tiny_http::{Header, Method, Response, Server};

const WORKERS: usize = 4;

const FALLBACK_INDEX: &str = "<!doctype html><meta charset=\"utf-8\"><title>graphmaps</title>\
<p>No viewer bundle configured. Dataset files: <a href=\"/meta.json\">meta.json</a>.</p>";

pub fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => "application/json",
        Some("png") => "image/png",
        Some("html") => "text/html; charset=utf-8",
        Some("js" | "mjs") => "text/javascript",
        Some("css") => "text/css",
        Some("svg") => "image/svg+xml",
        Some("map") => "application/json",
        _ => "application/octet-stream",
    }
}

/// Map a URL path onto a file below `root`, refusing anything that would
/// leave it.
pub fn resolve(root: &Path, url: &str) -> Option<PathBuf> {
    let path = url.split(['?', '#']).next().unwrap_or("");
    let rel = Path::new(path.trim_start_matches('/'));
    if rel.components().any(|c| !matches!(c, Component::Normal(_))) {
        return None;
    }
    let full = root.join(rel);
    full.is_file().then_some(full)
}

fn header(name: &str, value: &str) -> Header {
    Header::from_bytes(name.as_bytes(), value.as_bytes()).expect("ascii header")
}

pub fn serve(dataset: &Path, viewer: Option<&Path>, host: &str, port: u16) -> Result<(), String> {
    let server = Server::http((host, port)).map_err(|e| format!("cannot listen on {host}:{port}: {e}"))?;
    let addr = server.server_addr().to_ip().ok_or("not an IP listener")?;
    println!("serving {} at http://{addr}/", dataset.display());
    let _ = std::io::stdout().flush();

    let server = Arc::new(server);
    let roots: Arc<Vec<PathBuf>> =
        Arc::new(std::iter::once(dataset.to_path_buf()).chain(viewer.map(Path::to_path_buf)).collect());
    let has_viewer = viewer.is_some();
    let handles: Vec<_> = (0..WORKERS)
        .map(|_| {
            let server = Arc::clone(&server);
            let roots = Arc::clone(&roots);
            std::thread::spawn(move || {
                for req in server.incoming_requests() {
                    let head = *req.method() == Method::Head;
                    if !(head || *req.method() == Method::Get) {
                        let _ = req.respond(Response::from_string("method not allowed").with_status_code(405));
                        continue;
                    }
                    let url = req.url().to_string();
                    let url = if url == "/" || url.starts_with("/?") { "/index.html".to_string() } else { url };
                    let found = roots.iter().find_map(|r| resolve(r, &url));
                    let resp = match found.map(|p| std::fs::read(&p).map(|b| (p, b))) {
                        Some(Ok((p, bytes))) => {
                            let ct = content_type(&p);
                            let body = if head { Vec::new() } else { bytes };
                            Response::from_data(body).with_header(header("Content-Type", ct))
                        }
                        Some(Err(_)) => Response::from_data(b"read error".to_vec()).with_status_code(500),
                        None if url == "/index.html" && !has_viewer => {
                            Response::from_data(FALLBACK_INDEX.as_bytes().to_vec())
                                .with_header(header("Content-Type", "text/html; charset=utf-8"))
                        }
                        None => Response::from_data(b"not found".to_vec()).with_status_code(404),
                    };
                    let _ = req.respond(resp.with_header(header("Cache-Control", "no-cache")));
                }
            })
        })
        .collect();
    for h in handles {
        let _ = h.join();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_stay_inside_root() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("meta.json"), "{}").unwrap();
        assert!(resolve(dir.path(), "/meta.json").is_some());
        assert!(resolve(dir.path(), "/meta.json?x=1").is_some());
        assert!(resolve(dir.path(), "/../meta.json").is_none());
        assert!(resolve(dir.path(), "/missing.json").is_none());
    }

    #[test]
    fn types() {
        assert_eq!(content_type(Path::new("a/b.png")), "image/png");
        assert_eq!(content_type(Path::new("nodes.json")), "application/json");
    }
}
