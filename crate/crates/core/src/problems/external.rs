//! `qdo-eval/1`: line-delimited JSON over a child process's stdio.
//!
//! ```text
//! child  -> {"protocol":"qdo-eval/1","m":3}
//! parent -> {"id":0,"config":{"num.trees":500,...}}
//! child  -> {"id":0,"objective":0.87,"features":[9,0.12]}
//! ```
//!
//! The parent closes the child's stdin to shut it down. One request is in
//! flight per process at any time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{EvaluationResult, Evaluator};
use crate::error::{Error, Result};
use crate::search_space::Configuration;

pub const PROTOCOL: &str = "qdo-eval/1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Deserialize)]
struct Handshake {
    protocol: String,
    m: usize,
}

#[derive(Serialize)]
struct Request<'a> {
    id: u64,
    config: &'a Configuration,
}

#[derive(Deserialize)]
struct Response {
    id: u64,
    objective: Option<f64>,
    features: Vec<Option<f64>>,
}

struct Channel {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
}

pub struct ExternalEvaluator {
    channel: Mutex<Channel>,
    m: usize,
    timeout: Duration,
}

impl std::fmt::Debug for ExternalEvaluator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalEvaluator")
            .field("m", &self.m)
            .field("timeout", &self.timeout)
            .finish_non_exhaustive()
    }
}

impl ExternalEvaluator {
    /// Spawns `command` and waits for its handshake.
    pub fn spawn(mut command: Command, timeout: Duration) -> Result<Self> {
        let mut child = command
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .spawn()
            .map_err(|e| Error::EvaluationFault(format!("cannot start evaluator: {e}")))?;
        let stdout = child.stdout.take().expect("piped stdout");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let mut channel = Channel {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        };
        let line = match recv(&channel.lines, timeout) {
            Ok(line) => line,
            Err(e) => {
                channel.shutdown();
                return Err(match e {
                    Wait::Timeout => Error::EvaluationFault(format!(
                        "no handshake within {timeout:?}"
                    )),
                    Wait::Closed => Error::EvaluationFault("evaluator exited before handshake".into()),
                    Wait::Io(e) => Error::EvaluationFault(format!("reading handshake: {e}")),
                });
            }
        };
        let hs: Handshake = match serde_json::from_str(&line) {
            Ok(hs) => hs,
            Err(e) => {
                channel.shutdown();
                return Err(Error::Protocol(format!("bad handshake {line:?}: {e}")));
            }
        };
        if hs.protocol != PROTOCOL {
            channel.shutdown();
            return Err(Error::Protocol(format!(
                "evaluator speaks {:?}, expected {PROTOCOL:?}",
                hs.protocol
            )));
        }
        if hs.m < 2 {
            channel.shutdown();
            return Err(Error::Protocol(format!("handshake reports m = {}, need m >= 2", hs.m)));
        }
        Ok(Self {
            channel: Mutex::new(channel),
            m: hs.m,
            timeout,
        })
    }

    /// Runs `cmdline` through `sh -c`.
    pub fn from_shell(cmdline: &str, envs: &[(&str, &str)], timeout: Duration) -> Result<Self> {
        let mut cmd = Command::new("sh");
        cmd.arg("-c").arg(cmdline);
        for (k, v) in envs {
            cmd.env(k, v);
        }
        Self::spawn(cmd, timeout)
    }
}

enum Wait {
    Timeout,
    Closed,
    Io(std::io::Error),
}

fn recv(lines: &Receiver<std::io::Result<String>>, timeout: Duration) -> Result<String, Wait> {
    let deadline = Instant::now() + timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        match lines.recv_timeout(left) {
            Ok(Ok(line)) if line.trim().is_empty() => continue,
            Ok(Ok(line)) => return Ok(line),
            Ok(Err(e)) => return Err(Wait::Io(e)),
            Err(RecvTimeoutError::Timeout) => return Err(Wait::Timeout),
            Err(RecvTimeoutError::Disconnected) => return Err(Wait::Closed),
        }
    }
}

impl Channel {
    fn request(&mut self, config: &Configuration, m: usize, timeout: Duration) -> Result<EvaluationResult> {
        let id = self.next_id;
        self.next_id += 1;
        let line = serde_json::to_string(&Request { id, config })?;
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::EvaluationFault("evaluator input already closed".into()))?;
        if let Err(e) = writeln!(stdin, "{line}").and_then(|_| stdin.flush()) {
            return Err(Error::EvaluationFault(format!(
                "evaluator exited while request {id} pending: {e}"
            )));
        }
        let reply = recv(&self.lines, timeout).map_err(|e| match e {
            Wait::Timeout => Error::EvaluationFault(format!(
                "timed out after {timeout:?} waiting for response to request {id}"
            )),
            Wait::Closed => {
                Error::EvaluationFault(format!("evaluator exited while request {id} pending"))
            }
            Wait::Io(e) => Error::EvaluationFault(format!("reading response to request {id}: {e}")),
        })?;
        let resp: Response = serde_json::from_str(&reply)
            .map_err(|e| Error::Protocol(format!("malformed response {reply:?}: {e}")))?;
        if resp.id != id {
            return Err(Error::Protocol(format!(
                "response id {} does not match request id {id}",
                resp.id
            )));
        }
        if resp.features.len() != m - 1 {
            return Err(Error::Protocol(format!(
                "response {id} has {} features, handshake promised {}",
                resp.features.len(),
                m - 1
            )));
        }
        let objective = resp.objective.filter(|v| v.is_finite());
        let features: Option<Vec<f64>> = resp
            .features
            .iter()
            .map(|v| v.filter(|x| x.is_finite()))
            .collect();
        match (objective, features) {
            (Some(objective), Some(features)) => Ok(EvaluationResult::new(objective, features)),
            _ => Err(Error::EvaluationFault(format!(
                "non-finite values in response {id} for configuration {config}"
            ))),
        }
    }

    fn shutdown(&mut self) {
        drop(self.stdin.take());
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Evaluator for ExternalEvaluator {
    fn arity(&self) -> usize {
        self.m
    }

    fn evaluate(&self, config: &Configuration) -> Result<EvaluationResult> {
        let mut ch = self
            .channel
            .lock()
            .map_err(|_| Error::EvaluationFault("evaluator channel poisoned".into()))?;
        ch.request(config, self.m, self.timeout)
    }

    fn parallel_safe(&self) -> bool {
        false
    }
}

impl Drop for ExternalEvaluator {
    fn drop(&mut self) {
        if let Ok(ch) = self.channel.get_mut() {
            ch.shutdown();
        }
    }
}
