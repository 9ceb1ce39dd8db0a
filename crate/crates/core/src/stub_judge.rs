//! A local chat-completion server that answers judge prompts by string
//! containment, so the judge pipeline can run without a language model.
//!
//! Verdict prompts get "Yes" when the normalized expected answer occurs as a
//! contiguous token run inside the normalized proposed answer. Entailment
//! prompts get "Yes" when the second answer occurs inside the first.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde_json::{json, Value};

use crate::error::Result;
use crate::records::tokenize_for_overlap;

/// Maps the user message of a chat request to the assistant reply.
pub type ReplyPolicy = dyn Fn(&str) -> String + Send + Sync;

pub struct StubJudgeServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    requests: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl StubJudgeServer {
    /// Serves [`containment_reply`] on an ephemeral localhost port.
    pub fn start() -> Result<Self> {
        Self::with_policy(Arc::new(|user: &str| containment_reply(user)))
    }

    pub fn with_policy(policy: Arc<ReplyPolicy>) -> Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(AtomicUsize::new(0));
        let handle = {
            let stop = Arc::clone(&stop);
            let requests = Arc::clone(&requests);
            std::thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let policy = Arc::clone(&policy);
                    let requests = Arc::clone(&requests);
                    std::thread::spawn(move || {
                        if serve(stream, policy.as_ref()).is_ok() {
                            requests.fetch_add(1, Ordering::SeqCst);
                        }
                    });
                }
            })
        };
        Ok(StubJudgeServer {
            addr,
            stop,
            requests,
            handle: Some(handle),
        })
    }

    /// Full chat-completions URL of the server.
    pub fn endpoint(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Requests answered so far.
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Drop for StubJudgeServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the accept loop so it observes the flag
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, policy: &ReplyPolicy) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut content_length = 0usize;
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line)? == 0 {
            return Err(std::io::ErrorKind::UnexpectedEof.into());
        }
        let trimmed = line.trim_end();
        if trimmed.is_empty() {
            break;
        }
        if let Some((name, value)) = trimmed.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                content_length = value.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let user = request
        .get("messages")
        .and_then(Value::as_array)
        .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
        .and_then(|m| m["content"].as_str())
        .unwrap_or("");
    let reply = json!({
        "choices": [{"index": 0, "message": {"role": "assistant", "content": policy(user)}}]
    })
    .to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.len(),
        reply
    )?;
    stream.flush()
}

fn field_after<'a>(text: &'a str, marker: &str) -> Option<&'a str> {
    text.lines()
        .find_map(|l| l.strip_prefix(marker))
        .map(str::trim)
}

fn contains_run(haystack: &str, needle: &str) -> bool {
    let h = tokenize_for_overlap(haystack);
    let n = tokenize_for_overlap(needle);
    !n.is_empty() && h.windows(n.len()).any(|w| w == n.as_slice())
}

/// Reply for the bundled verdict and entailment templates.
pub fn containment_reply(user: &str) -> String {
    if let (Some(expected), Some(proposed)) = (
        field_after(user, "The expected answer is:"),
        field_after(user, "The proposed answer is:"),
    ) {
        let expected = expected.strip_suffix('.').unwrap_or(expected);
        let yes = expected.split("; ").any(|r| contains_run(proposed, r));
        return if yes { "Yes" } else { "No" }.to_string();
    }
    if let (Some(premise), Some(hypothesis)) = (
        field_after(user, "Possible Answer 1:"),
        field_after(user, "Possible Answer 2:"),
    ) {
        return if contains_run(premise, hypothesis) { "Yes" } else { "No" }.to_string();
    }
    "I cannot tell.".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{build_judge_prompt, DEFAULT_TEMPLATE};

    #[test]
    fn containment_policy() {
        let p = build_judge_prompt("Where?", "Paris; City of Light", "It is in paris, France", DEFAULT_TEMPLATE)
            .unwrap();
        assert_eq!(containment_reply(&p.user), "Yes");
        let p = build_judge_prompt("Where?", "Paris", "Lyon", DEFAULT_TEMPLATE).unwrap();
        assert_eq!(containment_reply(&p.user), "No");
        assert_eq!(containment_reply("hello"), "I cannot tell.");
    }
}
