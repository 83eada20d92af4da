//! Golden hash files: `<dir>/<command>.sha256`, one `sha256  path` line per
//! output file after `config-hash`, `seeds` and `args` lines. A golden only
//! applies to runs with the same key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::output::{sha256_hex, Check};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldenKey {
    pub config_hash: String,
    pub seeds: String,
    pub args: String,
}

pub fn render(key: &GoldenKey, files: &BTreeMap<String, Vec<u8>>) -> String {
    let mut s = format!("config-hash {}\nseeds {}\nargs {}\n", key.config_hash, key.seeds, key.args);
    for (name, bytes) in files {
        s.push_str(&format!("{}  {name}\n", sha256_hex(bytes)));
    }
    s
}

fn parse(text: &str) -> Option<(GoldenKey, BTreeMap<String, String>)> {
    let mut lines = text.lines();
    let mut field = |prefix: &str| lines.next()?.strip_prefix(prefix).map(str::to_string);
    let key = GoldenKey { config_hash: field("config-hash ")?, seeds: field("seeds ")?, args: field("args ")? };
    let mut hashes = BTreeMap::new();
    for l in lines {
        let (h, name) = l.split_once("  ")?;
        hashes.insert(name.to_string(), h.to_string());
    }
    Some((key, hashes))
}

pub fn golden_path(dir: &Path, command: &str) -> PathBuf {
    dir.join(format!("{command}.sha256"))
}

pub fn bless(dir: &Path, command: &str, key: &GoldenKey, files: &BTreeMap<String, Vec<u8>>) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = golden_path(dir, command);
    std::fs::write(&path, render(key, files))?;
    Ok(path)
}

/// Compares the run against the committed golden. A golden recorded for a
/// different configuration, seed list or argument set is reported and passes.
pub fn compare(dir: &Path, command: &str, key: &GoldenKey, files: &BTreeMap<String, Vec<u8>>) -> Check {
    let path = golden_path(dir, command);
    let Ok(text) = std::fs::read_to_string(&path) else {
        return Check::new("golden", true, format!("no golden at {}; not compared", path.display()));
    };
    let Some((gkey, hashes)) = parse(&text) else {
        return Check::new("golden", false, format!("{} is malformed", path.display()));
    };
    if &gkey != key {
        return Check::new("golden", true, "golden recorded for another config, seed list or arguments; not compared");
    }
    let mut bad = Vec::new();
    for (name, bytes) in files {
        match hashes.get(name) {
            Some(h) if *h == sha256_hex(bytes) => {}
            Some(_) => bad.push(format!("{name} differs")),
            None => bad.push(format!("{name} not in golden")),
        }
    }
    for name in hashes.keys().filter(|n| !files.contains_key(*n)) {
        bad.push(format!("{name} missing from run"));
    }
    if bad.is_empty() {
        Check::new("golden", true, format!("{} files match", files.len()))
    } else {
        Check::new("golden", false, bad.join("; "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_parse_round_trip() {
        let key = GoldenKey { config_hash: "ab".into(), seeds: "0-9".into(), args: "feed both".into() };
        let mut files = BTreeMap::new();
        files.insert("x.csv".to_string(), b"1\n".to_vec());
        let (k, h) = parse(&render(&key, &files)).unwrap();
        assert_eq!(k, key);
        assert_eq!(h["x.csv"], sha256_hex(b"1\n"));
    }
}
