use std::io::Write;

use serde_json::{json, Map, Value};

/// A single CSV/JSON cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Floats(Vec<f64>),
    Missing,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(i64::from(v))
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Vec<f64>> for Cell {
    fn from(v: Vec<f64>) -> Self {
        Cell::Floats(v)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else if v == 0.0 {
        format!("{:.16e}", 0.0)
    } else {
        format!("{v:.16e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
            Cell::Floats(vs) => vs.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(" "),
            Cell::Missing => String::new(),
        }
    }

    fn json(&self) -> Value {
        let num = |v: f64| serde_json::Number::from_f64(v).map_or_else(|| json!(format_float(v)), Value::Number);
        match self {
            Cell::Float(v) => num(*v),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Floats(vs) => Value::Array(vs.iter().map(|v| num(*v)).collect()),
            Cell::Missing => Value::Null,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// What a subcommand produces: scalar facts plus at most one table.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub summary: Vec<(String, Cell)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn with_columns<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn fact(&mut self, key: &str, value: impl Into<Cell>) {
        self.summary.push((key.to_string(), value.into()));
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    /// Header lines are `# `-prefixed; summary facts follow as `# key: value`.
    pub fn write_csv(&self, header: &[(String, String)], w: &mut dyn Write) -> std::io::Result<()> {
        for (k, v) in header {
            writeln!(w, "# {k}: {v}")?;
        }
        for (k, v) in &self.summary {
            writeln!(w, "# {k}: {}", v.csv())?;
        }
        if !self.columns.is_empty() {
            writeln!(w, "{}", self.columns.join(","))?;
            for row in &self.rows {
                writeln!(w, "{}", row.iter().map(Cell::csv).collect::<Vec<_>>().join(","))?;
            }
        }
        Ok(())
    }

    pub fn to_json(&self, header: &[(String, String)]) -> Value {
        let header: Map<String, Value> = header.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        let summary: Map<String, Value> = self.summary.iter().map(|(k, v)| (k.clone(), v.json())).collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
            .collect();
        json!({ "header": header, "summary": summary, "rows": rows })
    }

    /// One `key: value, key: value` line, used for `validate`.
    pub fn write_text(&self, w: &mut dyn Write) -> std::io::Result<()> {
        let line: Vec<String> = self.summary.iter().map(|(k, v)| format!("{k}: {}", v.csv())).collect();
        writeln!(w, "{}", line.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(11.0), "1.1000000000000000e1");
    }

    #[test]
    fn csv_layout() {
        let mut r = Report::with_columns(["y", "density"]);
        r.fact("points", 2usize);
        r.row(vec![0.0.into(), 2.0.into()]);
        r.row(vec![Cell::Text("a,b".into()), Cell::Missing]);
        let mut out = Vec::new();
        r.write_csv(&[("version".into(), "x".into())], &mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(
            s,
            "# version: x\n# points: 2\ny,density\n0.0000000000000000e0,2.0000000000000000e0\n\"a,b\",\n"
        );
    }
}
