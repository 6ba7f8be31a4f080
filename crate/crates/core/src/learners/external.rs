//! Client side of the external-teacher protocol (see [`super::protocol`]).

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpStream;
use std::process::{Child, Command as Process, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use super::protocol::{Command, Reply, Request};
use super::{check_width, Prediction, Predictor};
use crate::data::{Dataset, Matrix, Task};
use crate::error::{Error, Result};

const STDERR_TAIL_LINES: usize = 20;

#[derive(Debug, Clone)]
pub struct ExternalConfig {
    pub handshake_timeout: Duration,
    pub request_timeout: Duration,
    /// Rows per predict request.
    pub batch_size: usize,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            handshake_timeout: Duration::from_secs(30),
            request_timeout: Duration::from_secs(600),
            batch_size: 4096,
        }
    }
}

struct Conn {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    next_id: u64,
    child: Option<Child>,
}

/// A teacher living in another process (spawned command or TCP peer).
///
/// Requests on one connection are serialized; a failed request is retried
/// once with a fresh id before the error is surfaced.
pub struct ExternalTeacher {
    conn: Mutex<Conn>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    cfg: ExternalConfig,
    task: Task,
    n_features: usize,
    n_classes: usize,
}

fn spawn_reader<R: BufRead + Send + 'static>(r: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        for line in r.lines() {
            let stop = line.is_err();
            if tx.send(line).is_err() || stop {
                break;
            }
        }
    });
    rx
}

impl ExternalTeacher {
    /// Spawns `command` through the shell and talks over its stdin/stdout.
    pub fn spawn(command: &str, cfg: ExternalConfig) -> Result<Self> {
        let mut child = Process::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| Error::Teacher(format!("cannot spawn `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let stderr = child.stderr.take().expect("piped stderr");
        let tail = Arc::new(Mutex::new(VecDeque::new()));
        let t = Arc::clone(&tail);
        thread::spawn(move || {
            for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
                let mut q = t.lock().unwrap();
                if q.len() == STDERR_TAIL_LINES {
                    q.pop_front();
                }
                q.push_back(line);
            }
        });
        Ok(Self::from_parts(
            Conn {
                writer: Box::new(stdin),
                replies: spawn_reader(BufReader::new(stdout)),
                next_id: 1,
                child: Some(child),
            },
            tail,
            cfg,
        ))
    }

    /// Connects to a bridge listening on `addr` (host:port).
    pub fn connect(addr: &str, cfg: ExternalConfig) -> Result<Self> {
        let stream = TcpStream::connect(addr).map_err(|e| Error::Teacher(format!("cannot connect to {addr}: {e}")))?;
        let reader = stream
            .try_clone()
            .map_err(|e| Error::Teacher(format!("cannot clone stream to {addr}: {e}")))?;
        Ok(Self::from_parts(
            Conn {
                writer: Box::new(stream),
                replies: spawn_reader(BufReader::new(reader)),
                next_id: 1,
                child: None,
            },
            Arc::new(Mutex::new(VecDeque::new())),
            cfg,
        ))
    }

    fn from_parts(conn: Conn, stderr_tail: Arc<Mutex<VecDeque<String>>>, cfg: ExternalConfig) -> Self {
        Self {
            conn: Mutex::new(conn),
            stderr_tail,
            cfg,
            task: Task::Regression,
            n_features: 0,
            n_classes: 0,
        }
    }

    /// Handshakes and ships the training set.
    pub fn fit(&mut self, d: &Dataset) -> Result<()> {
        self.call(
            Command::Init {
                task: d.task,
                n_features: d.n_features(),
            },
            self.cfg.handshake_timeout,
        )?;
        self.call(
            Command::Fit {
                x: d.features.to_rows(),
                y: d.target.clone(),
            },
            self.cfg.request_timeout,
        )?;
        self.task = d.task;
        self.n_features = d.n_features();
        self.n_classes = d.n_classes();
        Ok(())
    }

    pub fn stderr_tail(&self) -> Vec<String> {
        self.stderr_tail.lock().unwrap().iter().cloned().collect()
    }

    fn failure(&self, msg: String) -> Error {
        // Give the stderr reader a moment to drain a dying process.
        thread::sleep(Duration::from_millis(50));
        let tail = self.stderr_tail();
        if tail.is_empty() {
            Error::Teacher(msg)
        } else {
            Error::Teacher(format!("{msg}\nbridge stderr:\n{}", tail.join("\n")))
        }
    }

    fn call(&self, cmd: Command, timeout: Duration) -> Result<Reply> {
        let mut conn = self.conn.lock().unwrap();
        let mut failures = Vec::new();
        for attempt in 0..2 {
            let id = conn.next_id;
            conn.next_id += 1;
            match roundtrip(&mut conn, id, &cmd, timeout) {
                Ok(reply) => match reply.error {
                    None => return Ok(reply),
                    Some(e) => failures.push(format!("request {id} ({}) failed: {e}", cmd.name())),
                },
                Err(e) => failures.push(format!("request {id} ({}) failed: {e}", cmd.name())),
            }
            if attempt == 0 {
                log::warn!("{}; retrying once", failures[0]);
            }
        }
        drop(conn);
        Err(self.failure(failures.join("; ")))
    }
}

fn roundtrip(conn: &mut Conn, id: u64, cmd: &Command, timeout: Duration) -> std::result::Result<Reply, String> {
    let line = serde_json::to_string(&Request { id, command: cmd.clone() }).map_err(|e| e.to_string())?;
    conn.writer
        .write_all(line.as_bytes())
        .and_then(|_| conn.writer.write_all(b"\n"))
        .and_then(|_| conn.writer.flush())
        .map_err(|e| format!("bridge input closed ({e})"))?;
    loop {
        match conn.replies.recv_timeout(timeout) {
            Ok(Ok(text)) => {
                if text.trim().is_empty() {
                    continue;
                }
                let reply: Reply =
                    serde_json::from_str(&text).map_err(|e| format!("protocol violation: unparsable reply ({e})"))?;
                match reply.id {
                    Some(r) if r == id => return Ok(reply),
                    // Late answer to an abandoned attempt.
                    Some(r) if r < id => continue,
                    other => return Err(format!("protocol violation: reply id {other:?} for request {id}")),
                }
            }
            Ok(Err(e)) => return Err(format!("bridge output unreadable ({e})")),
            Err(RecvTimeoutError::Timeout) => return Err(format!("no reply within {timeout:?}")),
            Err(RecvTimeoutError::Disconnected) => {
                let status = conn
                    .child
                    .as_mut()
                    .and_then(|c| c.wait().ok())
                    .map(|s| format!(" ({s})"))
                    .unwrap_or_default();
                return Err(format!("bridge exited{status}"));
            }
        }
    }
}

impl Drop for ExternalTeacher {
    fn drop(&mut self) {
        let Ok(mut conn) = self.conn.lock() else { return };
        let id = conn.next_id;
        let line = serde_json::to_string(&Request {
            id,
            command: Command::Shutdown,
        })
        .unwrap_or_default();
        let _ = writeln!(conn.writer, "{line}").and_then(|_| conn.writer.flush());
        if let Some(mut child) = conn.child.take() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Predictor for ExternalTeacher {
    fn task(&self) -> Task {
        self.task
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict(&self, rows: &Matrix) -> Result<Prediction> {
        check_width(rows, self.n_features)?;
        let all = rows.to_rows();
        let mut values = Vec::new();
        let mut proba = Vec::new();
        for chunk in all.chunks(self.cfg.batch_size.max(1)) {
            let n = chunk.len();
            let reply = self.call(Command::Predict { x: chunk.to_vec() }, self.cfg.request_timeout)?;
            if self.task.is_classification() {
                let p = reply
                    .proba
                    .ok_or_else(|| self.failure("protocol violation: classification reply lacks `proba`".into()))?;
                if p.len() != n || p.iter().any(|r| r.len() != self.n_classes || r.iter().any(|v| !v.is_finite())) {
                    return Err(self.failure(format!(
                        "protocol violation: expected {n} probability rows of width {}",
                        self.n_classes
                    )));
                }
                proba.extend(p);
            } else {
                let v = reply
                    .pred
                    .ok_or_else(|| self.failure("protocol violation: regression reply lacks `pred`".into()))?;
                if v.len() != n || v.iter().any(|x| !x.is_finite()) {
                    return Err(self.failure(format!("protocol violation: expected {n} finite predictions")));
                }
                values.extend(v);
            }
        }
        Ok(if self.task.is_classification() {
            Prediction::Proba(proba)
        } else {
            Prediction::Regression(values)
        })
    }
}
