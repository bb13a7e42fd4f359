//! Tabular output as CSV or JSON lines.

use std::io::Write;

use crate::scenario::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl Cell {
    fn csv_text(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::Num(x) => serde_json::Number::from_f64(*x).map(serde_json::Value::Number).unwrap_or(serde_json::Value::Null),
            Cell::Int(i) => (*i).into(),
            Cell::Text(s) => s.clone().into(),
            Cell::Bool(b) => (*b).into(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Keeps `t` and every column named `f` or `f_…` for some field `f`.
    pub fn select(&self, fields: &[String]) -> Table {
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|&k| {
                let c = &self.columns[k];
                c == "t" || fields.iter().any(|f| c == f || c.strip_prefix(f.as_str()).is_some_and(|rest| rest.starts_with('_')))
            })
            .collect();
        Table {
            columns: keep.iter().map(|&k| self.columns[k].clone()).collect(),
            rows: self.rows.iter().map(|r| keep.iter().map(|&k| r[k].clone()).collect()).collect(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[k]).collect())
    }

    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::csv_text))?;
                }
                w.flush()
            }
            Format::Jsonl => {
                for row in &self.rows {
                    let obj: serde_json::Map<String, serde_json::Value> = self.columns.iter().cloned().zip(row.iter().map(Cell::json)).collect();
                    serde_json::to_writer(&mut *out, &obj)?;
                    out.write_all(b"\n")?;
                }
                Ok(())
            }
        }
    }

    pub fn to_string(&self, format: Format) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_keeps_groups_and_time() {
        let mut t = Table::new(vec!["t".into(), "q_0".into(), "q_1".into(), "H".into(), "H_drift".into(), "normS".into()]);
        t.push(vec![Cell::Num(0.0), Cell::Num(1.0), Cell::Num(2.0), Cell::Num(3.0), Cell::Num(0.0), Cell::Num(4.0)]);
        let s = t.select(&["q".into(), "normS".into()]);
        assert_eq!(s.columns, ["t", "q_0", "q_1", "normS"]);
    }

    #[test]
    fn csv_numbers_round_trip() {
        let x = 0.1 + 0.2;
        let mut t = Table::new(vec!["t".into()]);
        t.push(vec![Cell::Num(x)]);
        let text = t.to_string(Format::Csv);
        let back: f64 = text.lines().nth(1).unwrap().parse().unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn jsonl_has_one_object_per_row() {
        let mut t = Table::new(vec!["t".into(), "class".into()]);
        t.push(vec![Cell::Num(1.5), Cell::Text("Bounded".into())]);
        t.push(vec![Cell::Num(2.5), Cell::Text("Unbounded".into())]);
        let text = t.to_string(Format::Jsonl);
        let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1]["class"], "Unbounded");
    }
}
