//! Client for an external provider process speaking line-delimited JSON on
//! its standard streams.
//!
//! Requests are `{"op":"paraphrase","id","text","n"}` or
//! `{"op":"score","id","text"}`; each gets exactly one response line
//! `{"id","paraphrases":[...]}`, `{"id","score":x}` or `{"id","error":"..."}`.
//! Requests are serialized, so one process serves one request at a time.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use serde_json::{json, Value};
use sumaug_core::specificity::{ScorerError, SpecificityScore, SpecificityScorer};
use sumaug_core::synthesis::{ParaphraseProvider, ProviderError};

/// Environment variable naming the provider command (program plus
/// whitespace-separated arguments).
pub const PROVIDER_ENV: &str = "SUMAUG_PROVIDER";

struct Pipes {
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

pub struct ExternalProvider {
    command: String,
    child: Mutex<Child>,
    pipes: Mutex<Pipes>,
    next_id: AtomicU64,
}

impl std::fmt::Debug for ExternalProvider {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalProvider").field("command", &self.command).finish()
    }
}

impl ExternalProvider {
    pub fn spawn(command: &str) -> Result<Self, ProviderError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| ProviderError::Failed("empty provider command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| ProviderError::Failed(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Self { command: command.into(), child: Mutex::new(child), pipes: Mutex::new(Pipes { stdin, stdout }), next_id: AtomicU64::new(0) })
    }

    /// Spawns the provider named by [`PROVIDER_ENV`].
    pub fn from_env() -> Result<Self, ProviderError> {
        let cmd = std::env::var(PROVIDER_ENV)
            .map_err(|_| ProviderError::Failed(format!("{PROVIDER_ENV} is not set")))?;
        Self::spawn(&cmd)
    }

    fn call(&self, request: Value) -> Result<Value, String> {
        let id = request["id"].as_str().unwrap_or_default().to_owned();
        let mut pipes = self.pipes.lock().map_err(|_| "provider connection poisoned".to_string())?;
        let line = request.to_string();
        writeln!(pipes.stdin, "{line}")
            .and_then(|_| pipes.stdin.flush())
            .map_err(|e| format!("write to provider: {e}"))?;
        let mut response = String::new();
        let n = pipes.stdout.read_line(&mut response).map_err(|e| format!("read from provider: {e}"))?;
        if n == 0 {
            return Err("provider closed its output".into());
        }
        let value: Value = serde_json::from_str(&response).map_err(|e| format!("malformed response: {e}"))?;
        if value["id"].as_str() != Some(id.as_str()) {
            return Err(format!("response id {} does not match request {id}", value["id"]));
        }
        if let Some(err) = value.get("error") {
            return Err(format!("provider error for {id}: {err}"));
        }
        Ok(value)
    }
}

impl Drop for ExternalProvider {
    fn drop(&mut self) {
        if let Ok(child) = self.child.get_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl ParaphraseProvider for ExternalProvider {
    fn paraphrase(&self, id: &str, text: &str, n: usize) -> Result<Vec<String>, ProviderError> {
        let v = self
            .call(json!({"op": "paraphrase", "id": id, "text": text, "n": n}))
            .map_err(ProviderError::Failed)?;
        let list = v["paraphrases"]
            .as_array()
            .ok_or_else(|| ProviderError::Failed(format!("response for {id} has no paraphrases list")))?;
        let out: Vec<String> = list
            .iter()
            .map(|p| p.as_str().map(str::to_owned))
            .collect::<Option<_>>()
            .ok_or_else(|| ProviderError::Failed(format!("non-string paraphrase for {id}")))?;
        if out.len() != n {
            return Err(ProviderError::WrongCount { id: id.into(), expected: n, got: out.len() });
        }
        Ok(out)
    }
}

impl SpecificityScorer for ExternalProvider {
    fn score(&self, text: &str) -> Result<SpecificityScore, ScorerError> {
        let id = format!("score-{}", self.next_id.fetch_add(1, Ordering::Relaxed));
        let v = self.call(json!({"op": "score", "id": id, "text": text})).map_err(ScorerError::Failed)?;
        let x = v["score"].as_f64().ok_or_else(|| ScorerError::Failed("response has no numeric score".into()))?;
        SpecificityScore::new(x).ok_or(ScorerError::OutOfRange(x))
    }
}
