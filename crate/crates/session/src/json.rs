//! JSON helpers: a formatter that writes every float with 17 significant
//! digits, so persisted transforms reload bit for bit.

use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, PrettyFormatter};

use crate::error::{Result, SessionError};

struct Exact<F>(F);

macro_rules! forward {
    ($($name:ident($($arg:ident: $ty:ty),*);)*) => {
        $(fn $name<W: ?Sized + io::Write>(&mut self, w: &mut W $(, $arg: $ty)*) -> io::Result<()> {
            self.0.$name(w $(, $arg)*)
        })*
    };
}

impl<F: Formatter> Formatter for Exact<F> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    forward! {
        begin_array();
        end_array();
        begin_array_value(first: bool);
        end_array_value();
        begin_object();
        end_object();
        begin_object_key(first: bool);
        end_object_key();
        begin_object_value();
        end_object_value();
    }
}

fn write_with<F: Formatter, T: Serialize + ?Sized>(value: &T, f: F) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Exact(f));
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

/// Indented JSON with 17-significant-digit floats and a trailing newline.
pub fn to_exact_pretty<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = write_with(value, PrettyFormatter::with_indent(b"  "));
    s.push('\n');
    s
}

/// Single-line JSON with 17-significant-digit floats.
pub fn to_exact_line<T: Serialize + ?Sized>(value: &T) -> String {
    write_with(value, CompactFormatter)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| SessionError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SessionError::manifest(path, e.to_string()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| SessionError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| SessionError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_bitwise() {
        let v = vec![0.1, -0.0, 1.0 / 3.0, 1e-300, 123456.789, f64::MIN_POSITIVE, -2.5e17];
        let text = to_exact_line(&v);
        assert!(text.contains("1.0000000000000001e-1"));
        let back: Vec<f64> = serde_json::from_str(&text).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let pretty = to_exact_pretty(&serde_json::json!({"a": [1.5, 2], "b": "x"}));
        assert_eq!(pretty, "{\n  \"a\": [\n    1.5000000000000000e0,\n    2\n  ],\n  \"b\": \"x\"\n}\n");
    }
}
