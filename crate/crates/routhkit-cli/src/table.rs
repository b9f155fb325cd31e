//! Column tables written as CSV or JSON.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = CliError;
    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(CliError::Usage(format!("unknown format {other:?} (expected csv or json)"))),
        }
    }
}

/// Named columns of equal length plus string metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    pub fn push_column(&mut self, name: impl Into<String>, values: Vec<f64>) {
        self.columns.push((name.into(), values));
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, |c| c.1.len())
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    pub fn get_meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// `# key = value` comment lines, a header row, then one row per sample
    /// with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k} = {v}\n"));
        }
        let names: Vec<&str> = self.columns.iter().map(|(n, _)| n.as_str()).collect();
        out.push_str(&names.join(","));
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|(_, c)| format!("{:.16e}", c[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut meta = serde_json::Map::new();
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), serde_json::Value::String(v.clone()));
        }
        let mut cols = serde_json::Map::new();
        for (n, c) in &self.columns {
            cols.insert(n.clone(), serde_json::Value::from(c.clone()));
        }
        let mut root = serde_json::Map::new();
        root.insert("metadata".into(), serde_json::Value::Object(meta));
        root.insert("columns".into(), serde_json::Value::Object(cols));
        serde_json::to_string_pretty(&serde_json::Value::Object(root)).expect("JSON serialization")
    }

    /// Writes to `path`, or stdout when `None`.
    pub fn write(&self, path: Option<&Path>, format: Format) -> CliResult<()> {
        let text = match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        };
        write_text(path, &text)
    }

    pub fn from_csv(text: &str) -> CliResult<Self> {
        let mut table = Table::default();
        let mut header: Option<Vec<String>> = None;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(c) = line.strip_prefix('#') {
                if let Some((k, v)) = c.split_once('=') {
                    table.meta(k.trim(), v.trim());
                }
                continue;
            }
            match &header {
                None => {
                    let names: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
                    table.columns = names.iter().map(|n| (n.clone(), Vec::new())).collect();
                    header = Some(names);
                }
                Some(names) => {
                    let vals: Vec<&str> = line.split(',').collect();
                    if vals.len() != names.len() {
                        return Err(CliError::Usage(format!("CSV line {}: expected {} fields", lineno + 1, names.len())));
                    }
                    for (col, v) in table.columns.iter_mut().zip(vals) {
                        let x: f64 = v
                            .trim()
                            .parse()
                            .map_err(|_| CliError::Usage(format!("CSV line {}: bad number {v:?}", lineno + 1)))?;
                        col.1.push(x);
                    }
                }
            }
        }
        if header.is_none() {
            return Err(CliError::Usage("CSV file has no header row".into()));
        }
        Ok(table)
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let bad = |what: &str| CliError::Usage(format!("JSON table: {what}"));
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| bad(&e.to_string()))?;
        let mut table = Table::default();
        if let Some(meta) = v.get("metadata").and_then(|m| m.as_object()) {
            for (k, val) in meta {
                table.meta(k.clone(), val.as_str().map_or_else(|| val.to_string(), str::to_string));
            }
        }
        let cols = v.get("columns").and_then(|c| c.as_object()).ok_or_else(|| bad("no columns object"))?;
        for (name, col) in cols {
            let vals = col
                .as_array()
                .ok_or_else(|| bad("column is not an array"))?
                .iter()
                .map(|x| x.as_f64().ok_or_else(|| bad("non-numeric entry")))
                .collect::<CliResult<Vec<f64>>>()?;
            table.push_column(name.clone(), vals);
        }
        Ok(table)
    }

    pub fn read_csv(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_csv(&text)
    }
}

pub fn write_text(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| CliError::io("<stdout>", e)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let mut t = Table::default();
        t.meta("system", "se2");
        t.push_column("t", vec![0.0, 0.1, 1.0 / 3.0]);
        t.push_column("x_0", vec![std::f64::consts::PI, -1e-300, 12345.678901234567]);
        let back = Table::from_csv(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn csv_is_deterministic() {
        let mut t = Table::default();
        t.push_column("t", vec![0.1]);
        assert_eq!(t.to_csv(), "t\n1.0000000000000001e-1\n");
    }

    #[test]
    fn json_mirrors_columns() {
        let mut t = Table::default();
        t.meta("command", "reduce");
        t.push_column("t", vec![0.0, 0.5]);
        let v: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["metadata"]["command"], "reduce");
        assert_eq!(v["columns"]["t"][1], 0.5);
        assert_eq!(Table::from_json(&t.to_json()).unwrap(), t);
    }
}
