#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

pub const BIN: &str = env!("CARGO_BIN_EXE_fullscan");

pub fn fullscan(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("running fullscan")
}

/// Runs a command that must succeed and returns its stdout.
pub fn ok(args: &[&str]) -> String {
    let out = fullscan(args);
    assert!(
        out.status.success(),
        "fullscan {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn json(args: &[&str]) -> serde_json::Value {
    serde_json::from_str(&ok(args)).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The two documents of the storage example, with 2-d embeddings.
pub const TWO_DOCS: &str = r#"{"doc_id": "doc1", "clauses": {"geo": [934, 2934], "skill": [945, 342, 3112]}, "embedding": [0.6, 0.8]}
{"doc_id": "doc2", "clauses": {"geo": [129], "skill": [9342, 234]}, "embedding": [1.0, 0.0]}
"#;

pub const TWO_DOC_SCHEMA: &str = r#"{"clauses": ["geo", "skill"], "max_num_attr": 5, "dim": 2}"#;

/// Writes the two-document corpus and builds it; returns the index path.
pub fn two_doc_index(dir: &Path) -> PathBuf {
    std::fs::write(dir.join("docs.jsonl"), TWO_DOCS).unwrap();
    std::fs::write(dir.join("schema.json"), TWO_DOC_SCHEMA).unwrap();
    let index = dir.join("two.fsx");
    ok(&[
        "build",
        "--input",
        s(&dir.join("docs.jsonl")),
        "--schema",
        s(&dir.join("schema.json")),
        "--output",
        s(&index),
    ]);
    index
}

/// A running `fullscan serve`, stopped on drop.
pub struct Server {
    child: Child,
    pub base: String,
}

impl Server {
    pub fn start(args: &[&str]) -> Self {
        let mut child = Command::new(BIN)
            .arg("serve")
            .args(["--listen", "127.0.0.1:0"])
            .args(args)
            .env("RUST_LOG", "warn")
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawning server");
        let mut line = String::new();
        BufReader::new(child.stdout.take().unwrap())
            .read_line(&mut line)
            .unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected first line {line:?}"))
            .to_string();
        Self {
            child,
            base: format!("http://{addr}"),
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }

    /// Sends SIGTERM and waits; returns whether the process exited cleanly.
    pub fn terminate(mut self) -> bool {
        let status = Command::new("kill")
            .args(["-TERM", &self.child.id().to_string()])
            .status()
            .unwrap();
        assert!(status.success());
        self.child.wait().unwrap().success()
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
