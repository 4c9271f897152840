//! Report tables: unit-suffixed headers, deterministic number formatting.

use std::fmt::Write as _;

/// Report cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Flag(bool),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Num(x as f64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Flag(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Empty, Into::into)
    }
}

/// Seven significant digits; plain notation inside `[1e-3, 1e7)`.
pub fn fmt_num(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "nan".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let r: f64 = format!("{x:.6e}").parse().expect("formatted float parses");
    let a = r.abs();
    if r == 0.0 {
        "0".into()
    } else if (1e-3..1e7).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_num(*x),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: impl IntoIterator<Item = S>) -> Self {
        Self { headers: headers.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.headers.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn col(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    /// Numeric column; non-numeric cells become NaN.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.col(name)?;
        Some(self.rows.iter().map(|r| r[j].as_f64().unwrap_or(f64::NAN)).collect())
    }

    pub fn get(&self, row: usize, name: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.col(name)?)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(&self.headers).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    /// Reads a CSV; cells that parse as numbers become [`Cell::Num`].
    pub fn from_csv_str(text: &str) -> Result<Self, csv::Error> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let headers = r.headers()?.iter().map(String::from).collect();
        let mut t = Table { headers, rows: Vec::new() };
        for rec in r.records() {
            let rec = rec?;
            t.rows.push(
                rec.iter()
                    .map(|s| match s {
                        "" => Cell::Empty,
                        "true" => Cell::Flag(true),
                        "false" => Cell::Flag(false),
                        _ => s.parse::<f64>().map(Cell::Num).unwrap_or_else(|_| Cell::Text(s.into())),
                    })
                    .collect(),
            );
        }
        Ok(t)
    }

    /// `label = value` lines for terminal output.
    pub fn describe(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            for (h, c) in self.headers.iter().zip(r) {
                let _ = writeln!(s, "{h:>24} = {}", c.render());
            }
            if self.rows.len() > 1 {
                s.push('\n');
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_is_stable() {
        assert_eq!(fmt_num(3.0875), "3.0875");
        assert_eq!(fmt_num(20.840_000_000_01), "20.84");
        assert_eq!(fmt_num(3.3e-6), "3.3e-6");
        assert_eq!(fmt_num(140e3), "140000");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(-1.5e9), "-1.5e9");
    }

    #[test]
    fn csv_round_trip() {
        let mut t = Table::new(["name", "x_V", "ok"]);
        t.push(vec!["a, b".into(), 1.25.into(), true.into()]);
        t.push(vec!["c".into(), Cell::Empty, false.into()]);
        let back = Table::from_csv_str(&t.to_csv()).unwrap();
        assert_eq!(back, t);
    }
}
