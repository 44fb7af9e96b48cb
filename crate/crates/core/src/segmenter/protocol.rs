//! Newline-delimited JSON client for an external segmentation/detection bridge.
//!
//! Requests:  `{"id", "op": "hello"|"segment"|"detect", "proto"?, "image"?, "points"?, "box"?, "text"?}`
//! Replies:   `{"id", "proto"}` | `{"id", "mask": RLE, "score"}` | `{"id", "boxes": [{"xyxy", "score"}]}`
//!            | `{"id", "error"}`

use std::io::{BufRead, BufReader, Write};
use std::net::{TcpStream, ToSocketAddrs};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::{Deserialize, Serialize};

use super::rle::Rle;
use super::{BoxPrompt, Polarity, PromptSet, ScoredBox, SegmentError};
use crate::scene::{to_u8, MaskBits, RgbImage};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    pub op: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    /// `[u, v, label]` with label 1 positive, 0 negative.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<[f64; 3]>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<[f64; 4]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply {
    pub id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proto: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Rle>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boxes: Option<Vec<ScoredBox>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn encode_png_base64(rgb: &RgbImage) -> Result<String, SegmentError> {
    let mut raw = Vec::with_capacity(rgb.data.len() * 3);
    for px in &rgb.data {
        raw.extend(px.map(to_u8));
    }
    let img = image::RgbImage::from_raw(rgb.width, rgb.height, raw)
        .ok_or_else(|| SegmentError::Protocol("image buffer size mismatch".into()))?;
    let mut png = Vec::new();
    img.write_to(&mut std::io::Cursor::new(&mut png), image::ImageFormat::Png)
        .map_err(|e| SegmentError::Protocol(format!("png encode: {e}")))?;
    Ok(base64::engine::general_purpose::STANDARD.encode(png))
}

pub(crate) fn segment_request(id: u64, rgb: &RgbImage, prompts: &PromptSet) -> Result<Request, SegmentError> {
    Ok(Request {
        id,
        op: "segment".into(),
        proto: None,
        image: Some(encode_png_base64(rgb)?),
        points: prompts
            .points
            .iter()
            .map(|p| [p.u, p.v, if p.polarity == Polarity::Positive { 1.0 } else { 0.0 }])
            .collect(),
        bbox: prompts.bbox.as_ref().map(BoxPrompt::xyxy),
        text: None,
    })
}

/// Line-oriented duplex channel.
pub trait LineTransport: Send {
    fn send_line(&mut self, line: &str) -> Result<(), SegmentError>;
    /// Next line without its terminator; `Timeout` when nothing arrives in time.
    fn recv_line(&mut self, timeout: Duration) -> Result<String, SegmentError>;
}

/// Spawns a background reader that forwards lines over a channel, so reads
/// can be bounded by a deadline on any stream type.
fn spawn_reader<R: std::io::Read + Send + 'static>(r: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let mut reader = BufReader::new(r);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    let trimmed = line.trim_end_matches(['\n', '\r']).to_string();
                    if tx.send(Ok(trimmed)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

fn recv_from(rx: &Receiver<std::io::Result<String>>, timeout: Duration) -> Result<String, SegmentError> {
    match rx.recv_timeout(timeout) {
        Ok(Ok(line)) => Ok(line),
        Ok(Err(e)) => Err(SegmentError::Transport(e.to_string())),
        Err(RecvTimeoutError::Timeout) => Err(SegmentError::Timeout(timeout)),
        Err(RecvTimeoutError::Disconnected) => Err(SegmentError::Transport("bridge closed the connection".into())),
    }
}

pub struct StreamTransport<W: Write + Send> {
    writer: W,
    lines: Receiver<std::io::Result<String>>,
    /// Sockets need an explicit shutdown: the reader thread holds a clone.
    close: Option<fn(&W)>,
}

impl<W: Write + Send> Drop for StreamTransport<W> {
    fn drop(&mut self) {
        if let Some(close) = self.close {
            close(&self.writer);
        }
    }
}

impl<W: Write + Send> LineTransport for StreamTransport<W> {
    fn send_line(&mut self, line: &str) -> Result<(), SegmentError> {
        self.writer
            .write_all(line.as_bytes())
            .and_then(|_| self.writer.write_all(b"\n"))
            .and_then(|_| self.writer.flush())
            .map_err(|e| SegmentError::Transport(e.to_string()))
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, SegmentError> {
        recv_from(&self.lines, timeout)
    }
}

pub fn connect_tcp(addr: &str, timeout: Duration) -> Result<StreamTransport<TcpStream>, SegmentError> {
    let sock = addr
        .to_socket_addrs()
        .map_err(|e| SegmentError::Transport(format!("{addr}: {e}")))?
        .next()
        .ok_or_else(|| SegmentError::Transport(format!("{addr}: no address")))?;
    let stream =
        TcpStream::connect_timeout(&sock, timeout).map_err(|e| SegmentError::Transport(format!("{addr}: {e}")))?;
    let _ = stream.set_nodelay(true);
    let reader = stream.try_clone().map_err(|e| SegmentError::Transport(e.to_string()))?;
    Ok(StreamTransport {
        writer: stream,
        lines: spawn_reader(reader),
        close: Some(|s| {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }),
    })
}

#[cfg(unix)]
pub fn connect_unix(path: &str) -> Result<StreamTransport<std::os::unix::net::UnixStream>, SegmentError> {
    let stream =
        std::os::unix::net::UnixStream::connect(path).map_err(|e| SegmentError::Transport(format!("{path}: {e}")))?;
    let reader = stream.try_clone().map_err(|e| SegmentError::Transport(e.to_string()))?;
    Ok(StreamTransport {
        writer: stream,
        lines: spawn_reader(reader),
        close: Some(|s| {
            let _ = s.shutdown(std::net::Shutdown::Both);
        }),
    })
}

/// Bridge running as a child process speaking the protocol on stdin/stdout.
pub struct ChildTransport {
    child: Child,
    inner: StreamTransport<ChildStdin>,
}

impl ChildTransport {
    pub fn spawn(command_line: &str) -> Result<Self, SegmentError> {
        let mut parts = command_line.split_whitespace();
        let program = parts.next().ok_or_else(|| SegmentError::Transport("empty bridge command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| SegmentError::Transport(format!("{program}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        Ok(Self { child, inner: StreamTransport { writer: stdin, lines: spawn_reader(stdout), close: None } })
    }
}

impl LineTransport for ChildTransport {
    fn send_line(&mut self, line: &str) -> Result<(), SegmentError> {
        self.inner.send_line(line)
    }

    fn recv_line(&mut self, timeout: Duration) -> Result<String, SegmentError> {
        self.inner.recv_line(timeout)
    }
}

impl Drop for ChildTransport {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Opens `tcp://host:port`, `unix:///path` or `stdio:<command line>`.
pub fn open_endpoint(endpoint: &str, timeout: Duration) -> Result<Box<dyn LineTransport>, SegmentError> {
    if let Some(addr) = endpoint.strip_prefix("tcp://") {
        return Ok(Box::new(connect_tcp(addr, timeout)?));
    }
    #[cfg(unix)]
    if let Some(path) = endpoint.strip_prefix("unix://") {
        return Ok(Box::new(connect_unix(path)?));
    }
    if let Some(cmd) = endpoint.strip_prefix("stdio:") {
        return Ok(Box::new(ChildTransport::spawn(cmd)?));
    }
    Err(SegmentError::Transport(format!("unsupported endpoint {endpoint:?}")))
}

/// One-request-in-flight protocol client.
pub struct BridgeClient {
    transport: Box<dyn LineTransport>,
    timeout: Duration,
    next_id: u64,
}

impl BridgeClient {
    /// Wraps a transport and performs the version handshake.
    pub fn handshake(transport: Box<dyn LineTransport>, timeout: Duration) -> Result<Self, SegmentError> {
        let mut c = Self { transport, timeout, next_id: 1 };
        let reply = c.call(Request {
            id: 0,
            op: "hello".into(),
            proto: Some(PROTOCOL_VERSION),
            image: None,
            points: Vec::new(),
            bbox: None,
            text: None,
        })?;
        match reply.proto {
            Some(PROTOCOL_VERSION) => Ok(c),
            other => Err(SegmentError::Protocol(format!("bridge speaks protocol {other:?}, expected {PROTOCOL_VERSION}"))),
        }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    fn call(&mut self, mut req: Request) -> Result<Reply, SegmentError> {
        let id = self.next_id;
        self.next_id += 1;
        req.id = id;
        let line = serde_json::to_string(&req).map_err(|e| SegmentError::Protocol(e.to_string()))?;
        self.transport.send_line(&line)?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(SegmentError::Timeout(self.timeout));
            }
            let line = self.transport.recv_line(left)?;
            let reply: Reply = serde_json::from_str(&line)
                .map_err(|e| SegmentError::Protocol(format!("malformed reply {line:?}: {e}")))?;
            match reply.id {
                // late reply to an earlier, timed-out request
                Some(rid) if rid < id => continue,
                Some(rid) if rid == id => {}
                other => {
                    return Err(SegmentError::Protocol(format!("reply id {other:?} does not match request {id}")))
                }
            }
            if let Some(e) = reply.error {
                return Err(SegmentError::Protocol(format!("bridge error: {e}")));
            }
            return Ok(reply);
        }
    }

    pub fn segment(&mut self, rgb: &RgbImage, prompts: &PromptSet) -> Result<(MaskBits, f64), SegmentError> {
        let reply = self.call(segment_request(0, rgb, prompts)?)?;
        let rle = reply.mask.ok_or_else(|| SegmentError::Protocol("segment reply without mask".into()))?;
        let bits = super::rle::decode(&rle)?;
        if bits.width != rgb.width || bits.height != rgb.height {
            return Err(SegmentError::Protocol(format!(
                "mask {}x{} does not match image {}x{}",
                bits.width, bits.height, rgb.width, rgb.height
            )));
        }
        let score = reply.score.ok_or_else(|| SegmentError::Protocol("segment reply without score".into()))?;
        Ok((bits, score))
    }

    pub fn detect(&mut self, rgb: &RgbImage, text: &str) -> Result<Vec<ScoredBox>, SegmentError> {
        let req = Request {
            id: 0,
            op: "detect".into(),
            proto: None,
            image: Some(encode_png_base64(rgb)?),
            points: Vec::new(),
            bbox: None,
            text: Some(text.to_string()),
        };
        let reply = self.call(req)?;
        let mut boxes = reply.boxes.ok_or_else(|| SegmentError::Protocol("detect reply without boxes".into()))?;
        boxes.sort_by(|a, b| b.score.total_cmp(&a.score));
        Ok(boxes)
    }
}
