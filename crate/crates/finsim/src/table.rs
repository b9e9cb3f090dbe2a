//! Comma-separated tables with locale-independent, round-trip number formatting.

use crate::error::{Error, Result};

/// Shortest decimal that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

#[derive(Debug, Clone)]
pub struct Table {
    out: String,
    width: usize,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        let mut out = header.join(",");
        out.push('\n');
        Self {
            out,
            width: header.len(),
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        debug_assert_eq!(cells.len(), self.width);
        self.out.push_str(&cells.join(","));
        self.out.push('\n');
    }

    pub fn render(self) -> String {
        self.out
    }
}

/// Header plus rows of cells, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Every cell of `name` as a number.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let col = self
            .column(name)
            .ok_or_else(|| Error::parse(format!("missing column '{name}'")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row[col].trim().parse::<f64>().map_err(|e| Error::Parse {
                    message: format!("column '{name}': {e}"),
                    line: Some(i + 2),
                    column: Some(col + 1),
                    field: Some(name.to_string()),
                })
            })
            .collect()
    }
}

pub fn read_table(text: &str) -> Result<ParsedTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if header.iter().all(|h| h.is_empty()) {
        return Err(Error::parse("empty table"));
    }
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(str::to_string).collect()).map_err(csv_error))
        .collect::<Result<Vec<Vec<String>>>>()?;
    Ok(ParsedTable { header, rows })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize);
    Error::Parse {
        message: e.to_string(),
        line,
        column: None,
        field: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -1.5, 1e-7, 0.1 + 0.2, 123456.789, f64::MIN_POSITIVE] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn write_then_read() {
        let mut t = Table::new(&["a", "b"]);
        t.row(&[num(1.0), num(0.25)]);
        t.row(&[num(-2.0), num(1e-3)]);
        let parsed = read_table(&t.render()).unwrap();
        assert_eq!(parsed.header, vec!["a", "b"]);
        assert_eq!(parsed.numbers("b").unwrap(), vec![0.25, 1e-3]);
        assert!(parsed.numbers("c").is_err());
    }

    #[test]
    fn ragged_rows_are_errors() {
        assert!(read_table("a,b\n1\n").is_err());
    }
}
