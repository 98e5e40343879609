//! Number formatting, JSON and CSV emission, and atomic file writes.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use kreinspec_core::Tolerances;
use serde_json::Value;

/// Seventeen significant digits in scientific notation.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// Pretty JSON with every float at seventeen significant digits; object keys
/// come out sorted, so equal values give equal text.
pub fn json_text(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value, 0);
    out.push('\n');
    out
}

fn indent(out: &mut String, level: usize) {
    for _ in 0..level {
        out.push_str("  ");
    }
}

fn write_value(out: &mut String, value: &Value, level: usize) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => write!(out, "{i}").unwrap(),
            (_, Some(u)) => write!(out, "{u}").unwrap(),
            _ => out.push_str(&num(n.as_f64().unwrap_or(f64::NAN))),
        },
        Value::String(s) => out.push_str(&serde_json::to_string(s).expect("strings serialize")),
        Value::Array(items) if items.is_empty() => out.push_str("[]"),
        Value::Array(items) => {
            out.push_str("[\n");
            for (k, item) in items.iter().enumerate() {
                indent(out, level + 1);
                write_value(out, item, level + 1);
                out.push_str(if k + 1 < items.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push(']');
        }
        Value::Object(map) if map.is_empty() => out.push_str("{}"),
        Value::Object(map) => {
            out.push_str("{\n");
            for (k, (key, item)) in map.iter().enumerate() {
                indent(out, level + 1);
                out.push_str(&serde_json::to_string(key).expect("strings serialize"));
                out.push_str(": ");
                write_value(out, item, level + 1);
                out.push_str(if k + 1 < map.len() { ",\n" } else { "\n" });
            }
            indent(out, level);
            out.push('}');
        }
    }
}

pub fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("report types serialize")
}

pub fn tolerance_note(t: &Tolerances) -> String {
    format!(
        "tolerances ode_rel={} ode_abs={} quad_tol={} root_tol={} eig_tol={}",
        num(t.ode_rel),
        num(t.ode_abs),
        num(t.quad_tol),
        num(t.root_tol),
        num(t.eig_tol)
    )
}

/// A CSV table whose first line is a `#` comment naming units and tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub note: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(note: String, columns: Vec<&'static str>) -> Self {
        Csv { note, columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn text(&self) -> String {
        let mut s = format!("# {}\n{}\n", self.note, self.columns.join(","));
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// A named output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub text: String,
}

impl Artifact {
    pub fn json(name: &str, value: &Value) -> Self {
        Artifact { name: name.into(), text: json_text(value) }
    }

    pub fn csv(name: &str, table: &Csv) -> Self {
        Artifact { name: name.into(), text: table.text() }
    }
}

/// Writes through a temporary file in the same directory and renames it.
pub fn write_atomic(dir: &Path, artifact: &Artifact) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let tmp = dir.join(format!(".{}.tmp", artifact.name));
    std::fs::write(&tmp, artifact.text.as_bytes())?;
    std::fs::rename(&tmp, dir.join(&artifact.name))
}
