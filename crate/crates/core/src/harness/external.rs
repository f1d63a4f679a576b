//! Agents outside this process: a child process speaking the wire protocol
//! on stdin/stdout, or an HTTP endpoint accepting one request per POST.

use std::io::{self, BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Mutex, TryLockError};
use std::thread;
use std::time::Duration;

use super::context::AgentRequest;
use super::wire;
use super::{Agent, AgentError, AgentResponse};

struct Proc {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<io::Result<String>>,
}

impl Proc {
    fn spawn(command: &str) -> Result<Self, AgentError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AgentError::Transport(format!("cannot start agent `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self { child, stdin, lines })
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Runs `command` through `sh -c` and exchanges one line per request. A
/// pool of `workers` processes serves concurrent requests. A process that
/// times out or breaks its stream is killed and replaced on the next
/// request.
pub struct SubprocessAgent {
    command: String,
    timeout: Duration,
    slots: Vec<Mutex<Option<Proc>>>,
}

impl SubprocessAgent {
    pub fn new(command: impl Into<String>, workers: usize, timeout: Duration) -> Self {
        Self {
            command: command.into(),
            timeout,
            slots: (0..workers.max(1)).map(|_| Mutex::new(None)).collect(),
        }
    }

    fn exchange(&self, slot: &mut Option<Proc>, line: &str) -> Result<AgentResponse, AgentError> {
        if slot.is_none() {
            *slot = Some(Proc::spawn(&self.command)?);
        }
        let proc = slot.as_mut().expect("spawned above");
        let sent = writeln!(proc.stdin, "{line}").and_then(|_| proc.stdin.flush());
        if let Err(e) = sent {
            if let Some(a) = slot.take() { Proc::kill(a) }
            return Err(AgentError::Transport(format!("agent stdin: {e}")));
        }
        match proc.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => wire::decode_response(&reply),
            Ok(Err(e)) => {
                if let Some(a) = slot.take() { Proc::kill(a) }
                Err(AgentError::Transport(format!("agent stdout: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                if let Some(a) = slot.take() { Proc::kill(a) }
                Err(AgentError::Timeout)
            }
            Err(RecvTimeoutError::Disconnected) => {
                if let Some(a) = slot.take() { Proc::kill(a) }
                Err(AgentError::Transport("agent process exited".into()))
            }
        }
    }
}

impl Agent for SubprocessAgent {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let line = wire::encode_request(req);
        for slot in &self.slots {
            match slot.try_lock() {
                Ok(mut guard) => return self.exchange(&mut guard, &line),
                Err(TryLockError::WouldBlock) => continue,
                Err(TryLockError::Poisoned(p)) => return self.exchange(&mut p.into_inner(), &line),
            }
        }
        // every process busy: queue on one picked by step number
        let slot = &self.slots[req.step as usize % self.slots.len()];
        let mut guard = slot.lock().unwrap_or_else(|p| p.into_inner());
        self.exchange(&mut guard, &line)
    }
}

impl Drop for SubprocessAgent {
    fn drop(&mut self) {
        for slot in &mut self.slots {
            let proc = slot.get_mut().unwrap_or_else(|p| p.into_inner()).take();
            if let Some(_proc) = proc { Proc::kill(_proc) }
        }
    }
}

/// POSTs each request as JSON to `url`; the response body is one wire
/// response. 5xx statuses are transport failures (retried); other non-2xx
/// statuses are decoded like any reply so an `{"error": ...}` body counts
/// as a refusal.
pub struct HttpAgent {
    url: String,
    http: ureq::Agent,
}

impl HttpAgent {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        let http = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { url: url.into(), http }
    }
}

impl Agent for HttpAgent {
    fn act(&self, req: &AgentRequest) -> Result<AgentResponse, AgentError> {
        let body = wire::encode_request(req);
        let mut resp = match self
            .http
            .post(&self.url)
            .header("content-type", "application/json")
            .send(body.as_str())
        {
            Ok(resp) => resp,
            Err(ureq::Error::Timeout(_)) => return Err(AgentError::Timeout),
            Err(e) => return Err(AgentError::Transport(e.to_string())),
        };
        let status = resp.status();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => AgentError::Timeout,
            e => AgentError::Transport(e.to_string()),
        })?;
        if status.is_server_error() {
            return Err(AgentError::Transport(format!("HTTP {status}: {}", text.trim())));
        }
        wire::decode_response(&text)
    }
}
