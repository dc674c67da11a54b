//! CSV/JSON rendering. CSV cells carry 17 significant digits so values
//! round-trip exactly; blank cells mark points where a bound is not valid.

use std::io::Write;

use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A rectangular report: fixed columns, one row per grid point, optional
/// cells where a quantity does not apply.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    /// Values printed as integers (the `t` column).
    pub integer_columns: Vec<usize>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            integer_columns: vec![0],
        }
    }

    pub fn push_row(&mut self, row: Vec<Option<f64>>) {
        assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn render_cell(&self, col: usize, cell: Option<f64>) -> String {
        match cell {
            None => String::new(),
            Some(v) if self.integer_columns.contains(&col) => format!("{}", v as i64),
            Some(v) => format!("{v:.16e}"),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| self.render_cell(i, *c))
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let records: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = Map::new();
                for (name, cell) in self.columns.iter().zip(row) {
                    let v = match cell {
                        None => Value::Null,
                        Some(x) => json!(x),
                    };
                    obj.insert(name.clone(), v);
                }
                Value::Object(obj)
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&records).expect("json rendering");
        s.push('\n');
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

/// Writes to the path when given, else to stdout.
pub fn emit(out: Option<&std::path::Path>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => std::io::stdout().write_all(content.as_bytes()),
    }
}
