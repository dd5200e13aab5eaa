//! Output formatting: machine-readable JSON with 17-significant-digit
//! floats, human tables with 4, and CSV cell formatting.
//!
//! Non-finite values cannot be represented as JSON numbers; they are emitted
//! as the strings `"inf"`, `"-inf"` and `"nan"`.

use std::fmt::Write as _;
use std::path::Path;

use crate::app::{AppError, AppResult};

/// JSON value tree with controlled float formatting.
#[derive(Debug, Clone)]
pub enum J {
    Null,
    Bool(bool),
    Int(i64),
    Num(f64),
    Str(String),
    Arr(Vec<J>),
    Obj(Vec<(&'static str, J)>),
}

impl J {
    pub fn num_pair(p: (f64, f64)) -> J {
        J::Arr(vec![J::Num(p.0), J::Num(p.1)])
    }
}

/// 17 significant digits; round-trips any f64 exactly.
pub fn fmt_machine(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// 4 significant decimals for human tables.
pub fn fmt_human(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else if x != 0.0 && (x.abs() >= 1e5 || x.abs() < 1e-4) {
        format!("{x:.4e}")
    } else {
        format!("{x:.4}")
    }
}

fn escape(s: &str, out: &mut String) {
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn render_into(v: &J, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match v {
        J::Null => out.push_str("null"),
        J::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        J::Int(i) => {
            let _ = write!(out, "{i}");
        }
        J::Num(x) => {
            if x.is_finite() {
                let _ = write!(out, "{x:.16e}");
            } else {
                escape(&fmt_machine(*x), out);
            }
        }
        J::Str(s) => escape(s, out),
        J::Arr(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad);
                out.push_str("  ");
                render_into(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&pad);
            out.push(']');
        }
        J::Obj(fields) => {
            if fields.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push('{');
            for (i, (key, item)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push('\n');
                out.push_str(&pad);
                out.push_str("  ");
                escape(key, out);
                out.push_str(": ");
                render_into(item, indent + 1, out);
            }
            out.push('\n');
            out.push_str(&pad);
            out.push('}');
        }
    }
}

pub fn render_json(v: &J) -> String {
    let mut out = String::new();
    render_into(v, 0, &mut out);
    out.push('\n');
    out
}

/// Two-column aligned key/value table.
pub fn render_table(title: &str, rows: &[(String, String)]) -> String {
    let key_w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let val_w = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let mut out = String::new();
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "{}", "-".repeat(key_w + val_w + 2));
    for (k, v) in rows {
        let _ = writeln!(out, "{k:<key_w$}  {v:>val_w$}");
    }
    out
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> AppResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| AppError::Data(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents)
        .map_err(|e| AppError::Data(format!("cannot write {}: {e}", path.display())))
}
