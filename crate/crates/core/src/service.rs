//! Query service over newline-delimited JSON on TCP, with a blocking client
//! and latency bookkeeping.
//!
//! Each request line carries its own user pose. The server sets the pose and
//! retrieves under one lock acquisition, renders the prompt, answers, and
//! writes one response line. Malformed requests get an error line and the
//! connection stays open.

use std::io::{self, BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::answer::{render_prompt, Answerer};
use crate::error::{Error, Result};
use crate::knowledge_db::{SharedDatabase, DEFAULT_K};
use crate::scene::UserPose;

pub const DEFAULT_BIND: &str = "127.0.0.1:7077";

const MAX_LINE: usize = 1 << 20;
const POLL: Duration = Duration::from_millis(100);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub request_id: String,
    pub question: String,
    pub user_pose: UserPose,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub retrieval_ms: f64,
    pub generation_ms: f64,
    pub server_total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    pub request_id: String,
    pub answer: String,
    pub retrieved: Vec<(String, f64)>,
    pub timings: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub request_id: String,
    pub error: String,
}

/// Any line the server may send back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ServerMessage {
    Answer(QueryResponse),
    Error(ErrorResponse),
}

pub fn encode<T: Serialize>(msg: &T) -> Result<String> {
    let mut line = serde_json::to_string(msg)?;
    line.push('\n');
    Ok(line)
}

pub fn decode_request(line: &str) -> Result<QueryRequest> {
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(e.to_string()))
}

pub fn decode_response(line: &str) -> Result<ServerMessage> {
    serde_json::from_str(line.trim_end()).map_err(|e| Error::Protocol(e.to_string()))
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Request id of a line that failed to parse, when one can be recovered.
fn salvage_id(line: &str) -> String {
    serde_json::from_str::<serde_json::Value>(line)
        .ok()
        .and_then(|v| v.get("request_id")?.as_str().map(String::from))
        .unwrap_or_default()
}

fn handle_line(line: &str, db: &SharedDatabase, answerer: &dyn Answerer) -> ServerMessage {
    let start = Instant::now();
    let fail = |request_id: String, error: String| {
        ServerMessage::Error(ErrorResponse { request_id, error })
    };
    let req = match decode_request(line) {
        Ok(r) => r,
        Err(e) => return fail(salvage_id(line), format!("malformed request: {e}")),
    };
    if req.question.trim().is_empty() {
        return fail(req.request_id, "empty question".into());
    }
    let k = req.k.unwrap_or(DEFAULT_K);
    if k == 0 {
        return fail(req.request_id, "k must be at least 1".into());
    }

    let t = Instant::now();
    let (result, pose) = match db.query(req.user_pose, &req.question, k) {
        Ok(r) => r,
        Err(e) => return fail(req.request_id, e.to_string()),
    };
    let retrieval_ms = ms_since(t);

    let t = Instant::now();
    let bundle = render_prompt(&req.question, &result, &pose);
    let answer = match answerer.answer(&bundle) {
        Ok(a) => a,
        Err(e) => return fail(req.request_id, e.to_string()),
    };
    let generation_ms = ms_since(t);

    ServerMessage::Answer(QueryResponse {
        request_id: req.request_id,
        answer,
        retrieved: result.ranked(),
        timings: Timings {
            retrieval_ms,
            generation_ms,
            server_total_ms: ms_since(start),
        },
    })
}

fn serve_connection(
    stream: TcpStream,
    db: SharedDatabase,
    answerer: Arc<dyn Answerer>,
    stop: Arc<AtomicBool>,
) {
    let _ = stream.set_nodelay(true);
    if stream.set_read_timeout(Some(POLL)).is_err() {
        return;
    }
    let Ok(mut writer) = stream.try_clone() else {
        return;
    };
    let mut reader = BufReader::new(stream);
    let mut buf = Vec::new();
    while !stop.load(Ordering::Relaxed) {
        match reader.read_until(b'\n', &mut buf) {
            Ok(0) => return,
            Ok(_) if buf.ends_with(b"\n") => {
                let line = String::from_utf8_lossy(&buf).into_owned();
                buf.clear();
                if line.trim().is_empty() {
                    continue;
                }
                let reply = handle_line(&line, &db, answerer.as_ref());
                let Ok(out) = encode(&reply) else { return };
                if writer.write_all(out.as_bytes()).is_err() {
                    return;
                }
            }
            Ok(_) => return,
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {
                if buf.len() > MAX_LINE {
                    let reply = ServerMessage::Error(ErrorResponse {
                        request_id: String::new(),
                        error: "request line too long".into(),
                    });
                    if let Ok(out) = encode(&reply) {
                        let _ = writer.write_all(out.as_bytes());
                    }
                    return;
                }
            }
            Err(_) => return,
        }
    }
}

/// Running server; dropping it shuts the server down.
#[derive(Debug)]
pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Flag that stops the server when set; usable from signal handlers.
    pub fn stop_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.stop)
    }

    /// Blocks until the stop flag is set, then shuts down.
    pub fn wait(mut self) {
        while !self.stop.load(Ordering::Relaxed) {
            thread::sleep(POLL);
        }
        self.shutdown_inner();
    }

    pub fn shutdown(mut self) {
        self.shutdown_inner();
    }

    fn shutdown_inner(&mut self) {
        let Some(acceptor) = self.acceptor.take() else {
            return;
        };
        self.stop.store(true, Ordering::Relaxed);
        // Unblock accept().
        let _ = TcpStream::connect_timeout(&self.addr, Duration::from_millis(500));
        let _ = acceptor.join();
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown_inner();
    }
}

/// Binds and starts serving on a background thread, one thread per connection.
pub fn serve(
    db: SharedDatabase,
    answerer: Arc<dyn Answerer>,
    bind: impl ToSocketAddrs,
) -> Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&stop);
    let acceptor = thread::Builder::new()
        .name("scenerag-accept".into())
        .spawn(move || {
            let mut workers = Vec::new();
            for conn in listener.incoming() {
                if flag.load(Ordering::Relaxed) {
                    break;
                }
                let Ok(stream) = conn else { continue };
                let (db, answerer, flag) = (db.clone(), Arc::clone(&answerer), Arc::clone(&flag));
                workers.retain(|h: &JoinHandle<()>| !h.is_finished());
                workers.push(thread::spawn(move || {
                    serve_connection(stream, db, answerer, flag)
                }));
            }
            for h in workers {
                let _ = h.join();
            }
        })?;
    Ok(ServerHandle {
        addr,
        stop,
        acceptor: Some(acceptor),
    })
}

/// Client-side view of one round trip.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReply {
    pub response: QueryResponse,
    pub end_to_end_ms: f64,
    /// End-to-end time minus server computation time.
    pub communication_ms: f64,
}

/// Persistent connection issuing one request at a time.
#[derive(Debug)]
pub struct Client {
    writer: TcpStream,
    reader: BufReader<TcpStream>,
}

impl Client {
    pub fn connect(addr: impl ToSocketAddrs, timeout: Duration) -> Result<Self> {
        let addr = addr
            .to_socket_addrs()?
            .next()
            .ok_or_else(|| Error::Network(io::Error::new(ErrorKind::InvalidInput, "no address")))?;
        let stream = TcpStream::connect_timeout(&addr, timeout)?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(timeout))?;
        stream.set_write_timeout(Some(timeout))?;
        Ok(Self {
            reader: BufReader::new(stream.try_clone()?),
            writer: stream,
        })
    }

    /// Sends one request and returns the raw server message with the
    /// client-measured round trip in milliseconds.
    pub fn send(&mut self, req: &QueryRequest) -> Result<(ServerMessage, f64)> {
        let line = encode(req)?;
        let start = Instant::now();
        self.writer.write_all(line.as_bytes())?;
        let mut reply = String::new();
        if self.reader.read_line(&mut reply)? == 0 {
            return Err(Error::Protocol("connection closed by server".into()));
        }
        let elapsed = ms_since(start);
        Ok((decode_response(&reply)?, elapsed))
    }

    pub fn query(&mut self, req: &QueryRequest) -> Result<ClientReply> {
        match self.send(req)? {
            (ServerMessage::Answer(response), end_to_end_ms) => {
                if response.request_id != req.request_id {
                    return Err(Error::Protocol(format!(
                        "response id `{}` does not match request `{}`",
                        response.request_id, req.request_id
                    )));
                }
                Ok(ClientReply {
                    communication_ms: end_to_end_ms - response.timings.server_total_ms,
                    end_to_end_ms,
                    response,
                })
            }
            (ServerMessage::Error(e), _) => Err(Error::Protocol(format!(
                "server rejected `{}`: {}",
                e.request_id, e.error
            ))),
        }
    }
}

/// One-shot query on a fresh connection.
pub fn client_query(addr: impl ToSocketAddrs, req: &QueryRequest) -> Result<ClientReply> {
    Client::connect(addr, Duration::from_secs(10))?.query(req)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySample {
    pub communication_ms: f64,
    /// Server-side computation: retrieval plus answer generation.
    pub generation_ms: f64,
    pub end_to_end_ms: f64,
}

impl From<&ClientReply> for LatencySample {
    fn from(r: &ClientReply) -> Self {
        Self {
            communication_ms: r.communication_ms,
            generation_ms: r.response.timings.server_total_ms,
            end_to_end_ms: r.end_to_end_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub queries: Vec<LatencySample>,
    pub mean_communication_ms: f64,
    pub mean_generation_ms: f64,
    pub mean_end_to_end_ms: f64,
}

impl LatencyReport {
    pub fn from_samples(queries: Vec<LatencySample>) -> Result<Self> {
        if queries.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let n = queries.len() as f64;
        let mean = |f: fn(&LatencySample) -> f64| queries.iter().map(f).sum::<f64>() / n;
        Ok(Self {
            mean_communication_ms: mean(|s| s.communication_ms),
            mean_generation_ms: mean(|s| s.generation_ms),
            mean_end_to_end_ms: mean(|s| s.end_to_end_ms),
            queries,
        })
    }

    pub fn summary(&self) -> String {
        format!(
            "{} queries  communication {:.3} ms  generation {:.3} ms  end-to-end {:.3} ms",
            self.queries.len(),
            self.mean_communication_ms,
            self.mean_generation_ms,
            self.mean_end_to_end_ms
        )
    }
}

/// Runs the requests in order over one connection.
pub fn run_batch(
    addr: impl ToSocketAddrs,
    requests: &[QueryRequest],
) -> Result<(Vec<QueryResponse>, LatencyReport)> {
    let mut client = Client::connect(addr, Duration::from_secs(10))?;
    let mut responses = Vec::with_capacity(requests.len());
    let mut samples = Vec::with_capacity(requests.len());
    for req in requests {
        let reply = client.query(req)?;
        samples.push(LatencySample::from(&reply));
        responses.push(reply.response);
    }
    Ok((responses, LatencyReport::from_samples(samples)?))
}
