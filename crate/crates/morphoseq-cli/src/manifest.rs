//! Run manifests: every artifact-writing command records the exact command
//! line, configuration, seeds and corpus hash needed to re-run it
//! bit-identically.

use std::fmt::Write as _;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub struct Manifest {
    lines: Vec<(String, String)>,
}

impl Manifest {
    pub fn new() -> Manifest {
        let argv: Vec<String> = std::env::args().collect();
        let timestamp = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut m = Manifest { lines: Vec::new() };
        m.set("tool", "morphoseq");
        m.set("tool_version", env!("CARGO_PKG_VERSION"));
        m.set("timestamp_unix", timestamp);
        m.set("command", shell_join(&argv));
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn set_corpus(&mut self, path: &Path, bytes: &[u8]) -> &mut Self {
        self.set("corpus_path", path.display());
        self.set("corpus_fnv1a64", format!("{:016x}", fnv1a64(bytes)));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            let _ = writeln!(out, "{k} {v}");
        }
        out
    }

    pub fn write_to(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::write(dir.join("manifest.txt"), self.render())
    }
}

fn shell_join(argv: &[String]) -> String {
    argv.iter()
        .map(|a| {
            if a.is_empty() || a.chars().any(|c| c.is_whitespace() || "'\"\\$&|;<>()".contains(c)) {
                format!("'{}'", a.replace('\'', "'\\''"))
            } else {
                a.clone()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}
