//! Report rendering. CSV starts with a `# schema_version` comment line and a
//! fixed header; JSON is a pretty-printed object with sorted keys.

use serde_json::{json, Map, Value};

use crate::config::Format;

pub const SCHEMA_VERSION: u32 = 1;

pub struct Report {
    pub command: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
    /// Command-specific JSON fields, merged beside `schema_version`.
    pub json: Map<String, Value>,
    /// Set when the run completed but an audit or property check failed.
    pub failure: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, columns: Vec<&'static str>) -> Self {
        Report { command, columns, rows: Vec::new(), json: Map::new(), failure: None }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.json.insert(key.to_string(), value);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    fn render_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            writer.write_record(row.iter().map(text)).expect("in-memory write");
        }
        let body = String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8 cells");
        format!("# schema_version: {SCHEMA_VERSION}\n{body}")
    }

    fn render_json(&self) -> String {
        let mut obj = self.json.clone();
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
        obj.insert("command".into(), json!(self.command));
        if !obj.contains_key("rows") {
            let rows: Vec<Value> = self
                .rows
                .iter()
                .map(|r| {
                    let m: Map<String, Value> =
                        self.columns.iter().zip(r).map(|(c, v)| (c.to_string(), v.clone())).collect();
                    Value::Object(m)
                })
                .collect();
            obj.insert("rows".into(), Value::Array(rows));
        }
        let mut text = serde_json::to_string_pretty(&Value::Object(obj)).expect("json renders");
        text.push('\n');
        text
    }
}

fn text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// A float as a JSON number, or the strings `inf`, `-inf`, `nan`.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(cell(v))
    }
}

/// Shortest round-trip text of a float, `inf` for infinity.
pub fn cell(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

pub fn opt_num(v: Option<f64>) -> Value {
    v.map_or(Value::Null, num)
}
