//! Deterministic JSON and CSV emission.

use serde_json::{Map, Number, Value};
use std::str::FromStr;

/// A float with 17 significant digits, `null` when not finite.
pub fn num(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    Value::Number(Number::from_str(&fmt_float(x)).expect("formatted float is valid JSON"))
}

pub fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

pub fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

pub fn text(s: &str) -> Value {
    Value::String(s.to_string())
}

/// Scientific notation with 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    if x == 0.0 {
        return "0.0000000000000000e0".to_string();
    }
    format!("{x:.16e}")
}

/// Ordered JSON object builder.
#[derive(Default)]
pub struct Obj(Map<String, Value>);

impl Obj {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn put(mut self, key: &str, v: Value) -> Self {
        self.0.insert(key.to_string(), v);
        self
    }

    pub fn f(self, key: &str, x: f64) -> Self {
        self.put(key, num(x))
    }

    pub fn s(self, key: &str, v: &str) -> Self {
        self.put(key, text(v))
    }

    pub fn value(self) -> Value {
        Value::Object(self.0)
    }
}

/// A CSV cell.
pub enum Cell {
    F(f64),
    S(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) if x.is_finite() => fmt_float(*x),
            Cell::F(x) => format!("{x}"),
            Cell::S(s) => s.clone(),
        }
    }
}

/// A table written with one `#` provenance line and a column header.
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        self.rows.push(row);
    }

    pub fn floats(&mut self, row: &[f64]) {
        self.rows.push(row.iter().map(|&x| Cell::F(x)).collect());
    }

    pub fn render(&self, provenance: &str) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv output is UTF-8");
        let line = provenance.replace(['\n', '\r'], " ");
        Ok(format!("# {line}\n{body}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_carry_seventeen_digits() {
        assert_eq!(fmt_float(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_float(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        assert_eq!(num(f64::NAN), Value::Null);
    }

    #[test]
    fn json_keeps_insertion_order() {
        let v = Obj::new().f("z", 1.0).f("a", 2.0).value();
        assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"z":1.0000000000000000e+0,"a":2.0000000000000000e+0}"#);
    }

    #[test]
    fn csv_has_single_comment_and_lf() {
        let mut t = Table::new(&["a", "b"]);
        t.floats(&[1.0, 2.0]);
        let s = t.render("x\ny").unwrap();
        assert_eq!(s, "# x y\na,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
