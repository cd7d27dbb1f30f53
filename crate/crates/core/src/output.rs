//! CSV and JSON artifact writers. Every file carries the config hash.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

/// SHA-256 of the compact JSON form of `value`, in hex.
pub fn config_hash(value: &impl Serialize) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Values are written with 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// CSV text: a `# config_sha256` comment line, the header row, then rows.
pub fn csv_string(hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    csv_string_with_meta(hash, &[], header, rows)
}

/// Like [`csv_string`], with one `# key=value` comment line per `meta` entry
/// after the hash line.
pub fn csv_string_with_meta(
    hash: &str,
    meta: &[(&str, f64)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# config_sha256={hash}");
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={}", fmt_num(*v));
    }
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}

pub fn write_csv(path: &Path, hash: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> io::Result<()> {
    std::fs::write(path, csv_string(hash, header, rows))
}

pub fn write_csv_with_meta(
    path: &Path,
    hash: &str,
    meta: &[(&str, f64)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> io::Result<()> {
    std::fs::write(path, csv_string_with_meta(hash, meta, header, rows))
}

/// Pretty JSON with keys in sorted order and `config_sha256` added at the top level.
pub fn json_string(hash: &str, value: &impl Serialize) -> serde_json::Result<String> {
    let mut v = serde_json::to_value(value)?;
    if let serde_json::Value::Object(map) = &mut v {
        map.insert("config_sha256".into(), hash.into());
    } else {
        v = serde_json::json!({ "config_sha256": hash, "value": v });
    }
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json(path: &Path, hash: &str, value: &impl Serialize) -> io::Result<()> {
    std::fs::write(path, json_string(hash, value).map_err(io::Error::other)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_hash_header_and_full_precision() {
        let s = csv_string("abc", &["x", "u"], vec![vec![0.1, f64::INFINITY]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "# config_sha256=abc");
        assert_eq!(lines[1], "x,u");
        assert_eq!(lines[2], "1.0000000000000001e-1,inf");
        assert_eq!(lines[2].split(',').next().unwrap().parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn meta_lines_follow_the_hash() {
        let s = csv_string_with_meta("abc", &[("c", 0.5)], &["z"], vec![vec![1.0]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[..3], ["# config_sha256=abc", "# c=5.0000000000000000e-1", "z"]);
    }

    #[test]
    fn json_keys_sorted() {
        #[derive(Serialize)]
        struct S {
            zeta: f64,
            alpha: u8,
        }
        let s = json_string("h", &S { zeta: 1.0, alpha: 2 }).unwrap();
        let a = s.find("alpha").unwrap();
        let c = s.find("config_sha256").unwrap();
        let z = s.find("zeta").unwrap();
        assert!(a < c && c < z);
    }
}
