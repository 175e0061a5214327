//! Tables written as CSV with `# key: value` metadata lines, or as JSON.

use std::io::Write;

use serde_json::{Map, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, serde::Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Rows of one command's output plus the metadata describing the run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub metadata: Vec<(String, Value)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            metadata: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        let value = value.into();
        match self.metadata.iter_mut().find(|(k, _)| k == key) {
            Some(entry) => entry.1 = value,
            None => self.metadata.push((key.to_string(), value)),
        }
    }

    pub fn get_meta(&self, key: &str) -> Option<&Value> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => self.write_json(out),
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        for (key, value) in &self.metadata {
            let text = match value {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            writeln!(out, "# {key}: {text}")?;
        }
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(&self.columns)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(cell_text))?;
        }
        writer.flush()?;
        Ok(())
    }

    fn write_json(&self, out: &mut dyn Write) -> Result<(), CliError> {
        let metadata: Map<String, Value> = self.metadata.iter().cloned().collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| Value::Object(self.columns.iter().cloned().zip(row.iter().cloned()).collect()))
            .collect();
        let doc = serde_json::json!({ "metadata": metadata, "rows": rows });
        serde_json::to_writer_pretty(&mut *out, &doc)?;
        writeln!(out)?;
        Ok(())
    }

    /// Parses either output format back. CSV cells and metadata come back as
    /// JSON values when they parse as JSON, and as strings otherwise.
    pub fn parse(text: &str) -> Result<Table, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_csv(text)
        }
    }

    fn parse_json(text: &str) -> Result<Table, CliError> {
        let doc: Value = serde_json::from_str(text)?;
        let bad = || CliError::Check("JSON output needs \"metadata\" and \"rows\"".into());
        let metadata = doc.get("metadata").and_then(Value::as_object).ok_or_else(bad)?;
        let rows = doc.get("rows").and_then(Value::as_array).ok_or_else(bad)?;
        let mut table = Table {
            metadata: metadata.iter().map(|(k, v)| (k.clone(), v.clone())).collect(),
            ..Table::default()
        };
        if let Some(first) = rows.first().and_then(Value::as_object) {
            table.columns = first.keys().cloned().collect();
        }
        for row in rows {
            let obj = row.as_object().ok_or_else(bad)?;
            table.rows.push(table.columns.iter().map(|c| obj.get(c).cloned().unwrap_or(Value::Null)).collect());
        }
        Ok(table)
    }

    fn parse_csv(text: &str) -> Result<Table, CliError> {
        let mut table = Table::default();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let (key, value) = line[1..]
                .split_once(':')
                .ok_or_else(|| CliError::Check(format!("bad metadata line '{line}'")))?;
            table.metadata.push((key.trim().to_string(), parse_cell(value.trim())));
        }
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        table.columns = reader.headers()?.iter().map(str::to_string).collect();
        for record in reader.records() {
            table.rows.push(record?.iter().map(parse_cell).collect());
        }
        Ok(table)
    }
}

fn cell_text(value: &Value) -> String {
    match value {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_cell(text: &str) -> Value {
    if text.is_empty() {
        return Value::Null;
    }
    serde_json::from_str(text).unwrap_or_else(|_| Value::String(text.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn sample() -> Table {
        let mut t = Table::new(&["F", "label", "ok"]);
        t.meta("command", "demo");
        t.meta("seed", 7);
        t.meta("criteria", json!({"target": 0.99}));
        t.push(vec![json!(0.1), json!("a,b"), json!(true)]);
        t.push(vec![json!(1.0e-17), json!("x"), json!(false)]);
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        t.write(Format::Csv, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# command: demo\n# seed: 7\n"));
        assert_eq!(Table::parse(&text).unwrap(), t);
    }

    #[test]
    fn json_round_trip() {
        let t = sample();
        let mut buf = Vec::new();
        t.write(Format::Json, &mut buf).unwrap();
        let back = Table::parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.rows, t.rows);
        assert_eq!(back.get_meta("seed"), Some(&json!(7)));
    }
}
