//! Helpers shared by the CLI test targets: a local HTTP server that counts
//! connections, and a runner for the built binary.

#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

#[derive(Debug, Clone)]
pub struct Captured {
    pub path: String,
    pub body: serde_json::Value,
}

/// Answers every POST with a fixed status and a completion in the shape the
/// requested provider uses.
pub struct StubServer {
    pub url: String,
    connections: Arc<AtomicUsize>,
    requests: Arc<Mutex<Vec<Captured>>>,
}

impl StubServer {
    pub fn start(status: u16, completion: &str) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let url = format!("http://{}", listener.local_addr().unwrap());
        let connections = Arc::new(AtomicUsize::new(0));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let (c, r, text) = (connections.clone(), requests.clone(), completion.to_string());
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { break };
                c.fetch_add(1, Ordering::SeqCst);
                let (r, text) = (r.clone(), text.clone());
                thread::spawn(move || serve(stream, status, &text, &r));
            }
        });
        StubServer {
            url,
            connections,
            requests,
        }
    }

    pub fn connections(&self) -> usize {
        self.connections.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> Vec<Captured> {
        self.requests.lock().unwrap().clone()
    }
}

fn serve(stream: TcpStream, status: u16, text: &str, log: &Mutex<Vec<Captured>>) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut request_line = String::new();
    if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
        return;
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).unwrap_or(0) == 0 || line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0; length];
    let _ = reader.read_exact(&mut body);
    let body: serde_json::Value = serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null);
    log.lock().unwrap().push(Captured { path: path.clone(), body });

    let reply = if path.contains("/complete") && path.starts_with("/studio") {
        serde_json::json!({ "completions": [{ "data": { "text": text } }] })
    } else if path == "/v1/complete" {
        serde_json::json!({ "completion": text })
    } else if path == "/v1/chat" {
        serde_json::json!({ "text": text })
    } else {
        serde_json::json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] })
    };
    let reply = reply.to_string();
    let mut stream = stream;
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    );
    let _ = stream.flush();
}

pub const KEY_VARS: [&str; 4] = ["OPENAI_API_KEY", "ANTHROPIC_API_KEY", "COHERE_API_KEY", "AI21_API_KEY"];

/// Runs the binary with every provider key removed from its environment,
/// then `keys` added back.
pub fn haggle(args: &[&str], keys: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_haggle"));
    cmd.args(args).env("RUST_LOG", "off");
    for var in KEY_VARS {
        cmd.env_remove(var);
    }
    for (k, v) in keys {
        cmd.env(k, v);
    }
    cmd.output().expect("spawn haggle")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// All engines scripted, no feedback unless `extra` says otherwise.
pub fn scripted_config(extra: &str) -> String {
    format!(
        "[session]\nimproved_engine = \"scripted\"\nrival_engine = \"scripted\"\nmoderator_engine = \"scripted\"\n{extra}"
    )
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}
