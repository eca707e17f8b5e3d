//! Offline chat-completions endpoint that answers from a cell store.
//!
//! Each request's user prompt is matched back to a (state, candidate,
//! opponent, year) cell, and the stored distribution is replayed as
//! first-position `top_logprobs`, scaled by the cell's conforming mass. The
//! remaining mass is returned under a nonconforming token when it fits in the
//! requested top-k.

use std::net::SocketAddr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, OnceLock};
use std::thread::JoinHandle;

use log::debug;
use regex::Regex;
use serde_json::{json, Value};

use super::{CellKey, CellStore};

/// Token that carries the nonconforming remainder.
pub const NONCONFORMING_TOKEN: &str = "N/A";

pub struct ReplayServer {
    server: Arc<tiny_http::Server>,
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl ReplayServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(store: CellStore, addr: &str) -> std::io::Result<Self> {
        let server = tiny_http::Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("replay server bound to a non-IP address"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    handle_request(request, &store);
                }
            })
        };
        Ok(ReplayServer {
            server,
            addr,
            requests,
            handle: Some(handle),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL to hand to an endpoint configuration.
    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Requests received so far, including rejected ones.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the serving thread exits.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for ReplayServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn user_prompt_pattern() -> &'static Regex {
    static PATTERN: OnceLock<Regex> = OnceLock::new();
    PATTERN.get_or_init(|| {
        Regex::new(
            r"^(?s)(.+) is running against (.+), what percentage of the vote will (.+) win in the (\d{4}) presidential election in (.+)\?$",
        )
        .expect("valid pattern")
    })
}

/// Recovers the cell key from a user prompt built by `build_prompt`.
pub fn parse_user_prompt(text: &str) -> Option<CellKey> {
    let caps = user_prompt_pattern().captures(text)?;
    let candidate = &caps[1];
    if &caps[3] != candidate {
        return None;
    }
    Some(CellKey::new(&caps[5], candidate, &caps[2], caps[4].parse().ok()?))
}

fn respond(request: tiny_http::Request, status: u16, body: Value) {
    let header = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    let response = tiny_http::Response::from_string(body.to_string())
        .with_status_code(status)
        .with_header(header);
    let _ = request.respond(response);
}

fn error_body(message: &str) -> Value {
    json!({ "error": { "message": message } })
}

fn handle_request(mut request: tiny_http::Request, store: &CellStore) {
    debug!("{} {}", request.method(), request.url());
    if *request.method() != tiny_http::Method::Post || !request.url().ends_with("/chat/completions") {
        return respond(request, 404, error_body("not found"));
    }
    let authorized = request.headers().iter().any(|h| {
        h.field.equiv("Authorization")
            && h.value
                .as_str()
                .strip_prefix("Bearer ")
                .is_some_and(|t| !t.trim().is_empty())
    });
    if !authorized {
        return respond(request, 401, error_body("missing bearer token"));
    }
    let mut body = String::new();
    if request.as_reader().read_to_string(&mut body).is_err() {
        return respond(request, 400, error_body("unreadable body"));
    }
    let Ok(body) = serde_json::from_str::<Value>(&body) else {
        return respond(request, 400, error_body("body is not JSON"));
    };
    let user = body["messages"]
        .as_array()
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str());
    let Some(user) = user else {
        return respond(request, 400, error_body("no user message"));
    };
    let Some(cell) = parse_user_prompt(user).and_then(|k| store.get(&k)) else {
        return respond(request, 404, error_body("no stored cell matches the prompt"));
    };
    let top_k = body["top_logprobs"].as_u64().unwrap_or(20).max(1) as usize;
    let model = body["model"].as_str().unwrap_or("replay");

    let mut entries: Vec<(String, f64)> = cell
        .masses()
        .iter()
        .map(|(&share, &mass)| (share.to_string(), mass * cell.conforming_mass()))
        .collect();
    let remainder = 1.0 - cell.conforming_mass();
    if remainder > 0.0 {
        entries.push((NONCONFORMING_TOKEN.to_string(), remainder));
    }
    entries.retain(|(_, p)| *p > 0.0);
    // highest probability first; stable on ties so output is deterministic
    entries.sort_by(|a, b| b.1.total_cmp(&a.1));
    entries.truncate(top_k);

    let top: Vec<Value> = entries
        .iter()
        .map(|(token, p)| json!({ "token": token, "logprob": p.ln() }))
        .collect();
    let first = entries.first().map(|(t, _)| t.clone()).unwrap_or_default();
    let first_logprob = entries.first().map(|(_, p)| p.ln()).unwrap_or(0.0);
    respond(
        request,
        200,
        json!({
            "id": "replay",
            "object": "chat.completion",
            "model": model,
            "choices": [{
                "index": 0,
                "message": { "role": "assistant", "content": first },
                "finish_reason": "length",
                "logprobs": { "content": [{
                    "token": first,
                    "logprob": first_logprob,
                    "top_logprobs": top,
                }]},
            }],
        }),
    );
}
