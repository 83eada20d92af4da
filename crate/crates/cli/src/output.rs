//! Output files of a run: CSV with provenance comments, JSON lines, PGM.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::CliError;

/// One acceptance check of a command.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), pass, detail: detail.into() }
    }
}

/// Everything a command produced, keyed by path relative to the output directory.
#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: BTreeMap<String, Vec<u8>>,
    pub checks: Vec<Check>,
    pub summary: String,
    /// Set when the run hit a runtime infeasibility; files are still written.
    pub failure: Option<String>,
}

impl RunOutput {
    pub fn add(&mut self, path: impl Into<String>, bytes: Vec<u8>) {
        self.files.insert(path.into(), bytes);
    }

    pub fn line(&mut self, s: impl AsRef<str>) {
        self.summary.push_str(s.as_ref());
        self.summary.push('\n');
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        for (name, bytes) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(path, bytes)?;
        }
        Ok(())
    }
}

/// `0-9` for a contiguous ascending range, else a comma list.
pub fn seed_label(seeds: &[u64]) -> String {
    let contiguous = seeds.len() > 2 && seeds.windows(2).all(|w| w[1] == w[0] + 1);
    if contiguous {
        format!("{}-{}", seeds[0], seeds[seeds.len() - 1])
    } else {
        seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(",")
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Fixed six-decimal formatting used in every CSV.
pub fn num(x: f64) -> String {
    format!("{x:.6}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// CSV with `#config-hash` and `#seed` comment lines before the header.
pub fn csv_bytes(config_hash: &str, seeds: &[u64], header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>, CliError> {
    let mut out = format!("#config-hash={config_hash}\n#seed={}\n", seed_label(seeds)).into_bytes();
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    out.extend(w.into_inner().map_err(|e| CliError::Runtime(format!("csv: {e}")))?);
    Ok(out)
}

/// Serializes each item as one JSON line.
pub fn jsonl<T: serde::Serialize>(items: &[T]) -> Vec<u8> {
    let mut s = String::new();
    for it in items {
        s.push_str(&serde_json::to_string(it).expect("serializable"));
        s.push('\n');
    }
    s.into_bytes()
}

/// Reads a CSV written by `csv_bytes`, skipping comment lines.
pub fn read_csv(bytes: &[u8]) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(bytes);
    let err = |e: csv::Error| CliError::Runtime(format!("csv: {e}"));
    let header = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_labels() {
        assert_eq!(seed_label(&[0, 1, 2, 3]), "0-3");
        assert_eq!(seed_label(&[4, 9]), "4,9");
        assert_eq!(seed_label(&[7]), "7");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![vec!["a".to_string(), "1.5".to_string()], vec!["b,c".to_string(), "".to_string()]];
        let bytes = csv_bytes("abc", &[1, 2], &["name", "value"], &rows).unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(text.starts_with("#config-hash=abc\n#seed=1,2\nname,value\n"));
        assert!(!text.contains('\r'));
        let (h, r) = read_csv(&bytes).unwrap();
        assert_eq!(h, vec!["name", "value"]);
        assert_eq!(r, rows);
    }
}
