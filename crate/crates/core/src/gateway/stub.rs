//! A scripted HTTP endpoint for exercising the gateway client without network access.

use std::collections::VecDeque;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StubReply {
    pub status: u16,
    pub body: String,
    /// Held before responding, to provoke client timeouts.
    pub delay: Duration,
}

impl StubReply {
    pub fn json(body: impl Into<String>) -> Self {
        Self { status: 200, body: body.into(), delay: Duration::ZERO }
    }

    pub fn status(status: u16) -> Self {
        Self { status, body: String::new(), delay: Duration::ZERO }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }

    /// A generic-dialect body carrying a tool call.
    pub fn tool_call(name: &str, arguments: serde_json::Value) -> Self {
        Self::json(
            serde_json::json!({
                "content": "",
                "tool_call": {"name": name, "arguments": arguments},
                "usage": {"input_tokens": 10, "output_tokens": 5},
            })
            .to_string(),
        )
    }

    /// A generic-dialect body with plain content.
    pub fn content(text: &str) -> Self {
        Self::json(serde_json::json!({"content": text, "usage": {"input_tokens": 10, "output_tokens": 5}}).to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub received_at: Instant,
    pub path: String,
    pub authorization: Option<String>,
    pub body: Vec<u8>,
}

#[derive(Default)]
struct Shared {
    script: VecDeque<StubReply>,
    requests: Vec<RecordedRequest>,
}

/// Serves replies from a queue in order; once the queue is empty every request gets a 500.
pub struct StubServer {
    server: Arc<tiny_http::Server>,
    shared: Arc<Mutex<Shared>>,
    url: String,
    worker: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(script: impl IntoIterator<Item = StubReply>) -> std::io::Result<Self> {
        let server = tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?;
        let port = server.server_addr().to_ip().map(|a| a.port()).ok_or_else(|| std::io::Error::other("no port"))?;
        let server = Arc::new(server);
        let shared = Arc::new(Mutex::new(Shared { script: script.into_iter().collect(), requests: Vec::new() }));
        let worker = {
            let (server, shared) = (Arc::clone(&server), Arc::clone(&shared));
            std::thread::spawn(move || {
                for mut request in server.incoming_requests() {
                    let received_at = Instant::now();
                    let mut body = Vec::new();
                    let _ = request.as_reader().read_to_end(&mut body);
                    let authorization =
                        request.headers().iter().find(|h| h.field.equiv("Authorization")).map(|h| h.value.to_string());
                    let reply = {
                        let mut s = shared.lock().expect("stub lock");
                        s.requests.push(RecordedRequest {
                            received_at,
                            path: request.url().to_string(),
                            authorization,
                            body,
                        });
                        s.script.pop_front().unwrap_or(StubReply::status(500))
                    };
                    // Each reply runs on its own thread so delayed replies do not serialize.
                    std::thread::spawn(move || {
                        std::thread::sleep(reply.delay);
                        let header =
                            tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
                        let response = tiny_http::Response::from_string(reply.body)
                            .with_status_code(reply.status)
                            .with_header(header);
                        let _ = request.respond(response);
                    });
                }
            })
        };
        Ok(Self { server, shared, url: format!("http://127.0.0.1:{port}/v1/chat"), worker: Some(worker) })
    }

    pub fn url(&self) -> &str {
        &self.url
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.lock().expect("stub lock").requests.clone()
    }

    pub fn push(&self, reply: StubReply) {
        self.shared.lock().expect("stub lock").script.push_back(reply);
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
