//! Tables, report emission and run manifests.

use serde::Serialize;
use serde_json::Value;
use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    I(u64),
    B(bool),
    S(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(v) => fmt_float(*v),
            Cell::I(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) if v.is_finite() => Value::from(*v),
            Cell::F(v) => Value::from(fmt_float(*v)),
            Cell::I(v) => Value::from(*v),
            Cell::B(v) => Value::from(*v),
            Cell::S(s) => Value::from(s.clone()),
        }
    }
}

/// 17 significant digits; `inf`, `-inf` and `nan` spelled out.
pub fn fmt_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.headers.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.iter().map(Cell::csv).collect::<Vec<_>>().join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| Value::Object(self.headers.iter().zip(r).map(|(h, c)| (h.to_string(), c.json())).collect()))
                .collect(),
        )
    }
}

/// What a command produced: a table, an optional structured report and
/// whether every check passed.
pub struct Output {
    pub table: Table,
    pub report: Option<Value>,
    pub pass: bool,
}

impl Output {
    pub fn render(&self, json: bool) -> String {
        if json {
            let body = match &self.report {
                Some(r) => serde_json::json!({ "rows": self.table.to_json_rows(), "report": r, "pass": self.pass }),
                None => serde_json::json!({ "rows": self.table.to_json_rows(), "pass": self.pass }),
            };
            let mut s = serde_json::to_string_pretty(&body).expect("json values serialize");
            s.push('\n');
            s
        } else {
            self.table.to_csv()
        }
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report serializes")
}

#[derive(Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub config: Value,
    pub spec: Option<Value>,
    pub seed: u64,
    pub artifact_version: &'static str,
    pub wall_clock_seconds: f64,
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    let mut f = std::fs::File::create(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    f.write_all(text.as_bytes()).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn manifest_path(out: &Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_float(f64::INFINITY), "inf");
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(&["name", "x"]);
        t.push(vec![Cell::S("a, b".into()), Cell::F(1.0)]);
        assert_eq!(t.to_csv(), "name,x\n\"a, b\",1.0000000000000000e0\n");
    }
}
