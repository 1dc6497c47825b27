//! Tabular output in CSV or JSON.
//!
//! CSV layout: zero or more `# key: value` metadata lines (values are compact
//! JSON), one header row, then data rows. Floats use 17 significant digits so
//! every `f64` parses back to the identical value.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

impl Cell {
    fn to_csv(&self) -> String {
        match self {
            Cell::Float(x) => format_float(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Float(x) if x.is_finite() => Value::from(*x),
            Cell::Float(x) => Value::String(format_float(*x)),
            Cell::Int(i) => Value::from(*i),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub metadata: Vec<(String, Value)>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            metadata: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, key: &str, value: Value) -> Self {
        self.metadata.push((key.to_string(), value));
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.metadata {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::to_csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let metadata: Map<String, Value> = self.metadata.iter().cloned().collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, v)| (c.to_string(), v.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        let doc = serde_json::json!({ "metadata": metadata, "rows": rows });
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }

    pub fn render(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Json => self.to_json(),
        }
    }
}

/// Parsed CSV document: metadata lines, header, and raw cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric value of `name` in row `row`.
    pub fn float(&self, row: usize, name: &str) -> Option<f64> {
        self.rows.get(row)?.get(self.column(name)?)?.parse().ok()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Reader for the CSV layout written by [`Table::to_csv`].
pub fn parse_csv(text: &str) -> Option<ParsedCsv> {
    let mut metadata = Vec::new();
    let mut lines = text.lines();
    let header = loop {
        let line = lines.next()?;
        match line.strip_prefix("# ") {
            Some(rest) => {
                let (k, v) = rest.split_once(": ")?;
                metadata.push((k.to_string(), v.to_string()));
            }
            None => break line,
        }
    };
    let header: Vec<String> = header.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    Some(ParsedCsv { metadata, header, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(format_float(1.0 / 15.0), "6.6666666666666666e-2");
        assert_eq!(format_float(0.125), "1.2500000000000000e-1");
        assert_eq!(format_float(f64::NAN), "NaN");
        assert_eq!(format_float(f64::NEG_INFINITY), "-inf");
    }

    #[test]
    fn csv_layout() {
        let mut t = Table::new(&["a", "b", "kind"]).meta("dims", serde_json::json!({"n_a": 2}));
        t.push(vec![0.5.into(), 3u64.into(), "separable".into()]);
        let text = t.to_csv();
        assert_eq!(text, "# dims: {\"n_a\":2}\na,b,kind\n5.0000000000000000e-1,3,separable\n");
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.meta("dims"), Some("{\"n_a\":2}"));
        assert_eq!(parsed.float(0, "a"), Some(0.5));
        assert_eq!(parsed.float(0, "b"), Some(3.0));
    }

    #[test]
    fn json_layout() {
        let mut t = Table::new(&["x"]).meta("seed", Value::from(4));
        t.push(vec![Cell::Float(f64::INFINITY)]);
        let v: Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(v["metadata"]["seed"], 4);
        assert_eq!(v["rows"][0]["x"], "inf");
    }

    proptest! {
        #[test]
        fn csv_floats_round_trip(values in proptest::collection::vec(any::<f64>(), 1..8)) {
            let mut t = Table::new(&["v"]);
            for &x in &values {
                t.push(vec![Cell::Float(x)]);
            }
            let parsed = parse_csv(&t.to_csv()).unwrap();
            for (k, &x) in values.iter().enumerate() {
                let back = parsed.float(k, "v").unwrap();
                if x.is_nan() {
                    prop_assert!(back.is_nan());
                } else {
                    prop_assert_eq!(back.to_bits(), x.to_bits());
                }
            }
        }
    }
}
