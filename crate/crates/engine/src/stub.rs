//! Minimal in-process HTTP server for exercising [`HttpBackend`](crate::HttpBackend)
//! without a real inference service.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct RecordedRequest {
    pub method: String,
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: String,
}

impl RecordedRequest {
    /// Case-insensitive header lookup.
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> Option<Value> {
        serde_json::from_str(&self.body).ok()
    }
}

#[derive(Debug, Clone)]
pub struct StubResponse {
    pub status: u16,
    pub body: String,
    /// Sleep before answering, to provoke client timeouts.
    pub delay: Duration,
}

impl StubResponse {
    pub fn status(status: u16) -> Self {
        Self { status, body: json!({"error": {"message": "stub"}}).to_string(), delay: Duration::ZERO }
    }

    /// A 200 chat-completions body with one choice per content string.
    pub fn completion<S: AsRef<str>>(contents: &[S]) -> Self {
        let choices: Vec<Value> = contents
            .iter()
            .enumerate()
            .map(|(i, c)| json!({"index": i, "message": {"role": "assistant", "content": c.as_ref()}, "finish_reason": "stop"}))
            .collect();
        Self {
            status: 200,
            body: json!({"object": "chat.completion", "choices": choices}).to_string(),
            delay: Duration::ZERO,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = delay;
        self
    }
}

type Handler = dyn Fn(usize, &RecordedRequest) -> StubResponse + Send + Sync;

/// Serves each connection on its own thread; `handler` receives the 0-based
/// request number and the parsed request. Shuts down on drop.
pub struct StubServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<RecordedRequest>>>,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl StubServer {
    pub fn start(
        handler: impl Fn(usize, &RecordedRequest) -> StubResponse + Send + Sync + 'static,
    ) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let log = Arc::new(Mutex::new(Vec::new()));
        let stop = Arc::new(AtomicBool::new(false));
        let handler: Arc<Handler> = Arc::new(handler);
        let accept = {
            let (log, stop) = (Arc::clone(&log), Arc::clone(&stop));
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let (log, handler) = (Arc::clone(&log), Arc::clone(&handler));
                    std::thread::spawn(move || serve(stream, &log, &*handler));
                }
            })
        };
        Ok(Self { addr, log, stop, accept: Some(accept) })
    }

    /// Answers with `responses` in order, repeating the last one.
    pub fn sequence(responses: Vec<StubResponse>) -> std::io::Result<Self> {
        assert!(!responses.is_empty(), "stub needs at least one response");
        Self::start(move |i, _| responses[i.min(responses.len() - 1)].clone())
    }

    pub fn base_url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.log.lock().expect("stub log").clone()
    }

    pub fn hits(&self) -> usize {
        self.log.lock().expect("stub log").len()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

fn read_request(stream: &TcpStream) -> std::io::Result<RecordedRequest> {
    let mut reader = BufReader::new(stream);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let mut it = line.split_whitespace();
    let method = it.next().unwrap_or_default().to_string();
    let path = it.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h)? == 0 || h == "\r\n" || h == "\n" {
            break;
        }
        if let Some((k, v)) = h.trim_end().split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let len = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse::<usize>().ok())
        .unwrap_or(0);
    let mut body = vec![0; len];
    reader.read_exact(&mut body)?;
    Ok(RecordedRequest { method, path, headers, body: String::from_utf8_lossy(&body).into_owned() })
}

fn serve(mut stream: TcpStream, log: &Mutex<Vec<RecordedRequest>>, handler: &Handler) {
    let Ok(req) = read_request(&stream) else { return };
    if req.method.is_empty() {
        return;
    }
    let index = {
        let mut log = log.lock().expect("stub log");
        log.push(req.clone());
        log.len() - 1
    };
    let resp = handler(index, &req);
    if !resp.delay.is_zero() {
        std::thread::sleep(resp.delay);
    }
    let head = format!(
        "HTTP/1.1 {} Stub\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n",
        resp.status,
        resp.body.len()
    );
    let _ = stream.write_all(head.as_bytes()).and_then(|_| stream.write_all(resp.body.as_bytes()));
    let _ = stream.flush();
}
