//! Serialization helpers: 17-significant-digit floats, CSV tables and JSON
//! documents written inside a single output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{Error, Result};

/// Scientific notation with 17 significant digits, which round-trips every
/// finite double. Non-finite values use the spellings most parsers accept.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

/// Rewrites every float in a JSON tree to 17 significant digits. Integers
/// are left alone.
fn normalize(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => match n.as_f64() {
            Some(x) if x.is_finite() => Value::Number(fmt_f64(x).parse::<Number>().expect("formatted float is valid JSON")),
            _ => Value::Null,
        },
        Value::Array(a) => Value::Array(a.into_iter().map(normalize).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, normalize(v))).collect()),
        other => other,
    }
}

pub fn to_value<T: Serialize>(x: &T) -> Value {
    normalize(serde_json::to_value(x).expect("serializable"))
}

/// Pretty JSON with a trailing newline.
pub fn json_text(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&normalize(v.clone())).expect("serializable");
    s.push('\n');
    s
}

/// CSV table with a header row, LF line endings and RFC-4180 quoting.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(header).expect("in-memory write");
        Table { writer }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).expect("in-memory write");
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.writer.into_inner().expect("in-memory flush")
    }
}

/// Output directory guard: every write goes through a bare file name.
#[derive(Debug, Clone)]
pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| io_err(root, e))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(Error::Io { path: name.into(), reason: "output names must be plain file names".into() });
        }
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io_err(&path, e))?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, v: &Value) -> Result<PathBuf> {
        self.write(name, json_text(v).as_bytes())
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), reason: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_f64(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    proptest! {
        #[test]
        fn float_text_round_trips(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn json_floats_normalized_integers_kept() {
        let v = serde_json::json!({"a": 0.1, "b": 7, "c": [f64::NAN, 2.5]});
        let t = json_text(&v);
        assert!(t.contains("1.0000000000000001e-1"), "{t}");
        assert!(t.contains("\"b\": 7"));
        assert!(t.contains("null"));
        let back: Value = serde_json::from_str(&t).unwrap();
        assert_eq!(back["a"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_quotes_and_lf() {
        let mut t = Table::new(&["a", "note"]);
        t.row(["1", "x, y"]);
        assert_eq!(String::from_utf8(t.into_bytes()).unwrap(), "a,note\n1,\"x, y\"\n");
    }

    #[test]
    fn out_dir_rejects_paths() {
        let dir = tempfile::tempdir().unwrap();
        let out = OutDir::create(dir.path()).unwrap();
        assert!(out.write("../escape.txt", b"x").is_err());
        assert!(out.write("ok.txt", b"x").is_ok());
    }
}
