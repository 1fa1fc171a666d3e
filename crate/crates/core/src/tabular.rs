//! Reader for the crate's headed numeric CSV artifacts: `#` metadata
//! lines, one header row of column names, then rows of f64 cells.

use crate::error::{Error, Result};

/// A parsed numeric table.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl NumericTable {
    /// Index of a named column.
    pub fn column(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("no column `{name}`")))
    }
}

/// Parse a headed numeric CSV, skipping `#` metadata lines. Every data
/// cell must be a finite or non-finite f64; row widths must match the
/// header.
pub fn read_numeric_csv(text: &str) -> Result<NumericTable> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
    let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if columns.is_empty() || columns.iter().any(|c| c.is_empty()) {
        return Err(Error::InvalidArgument(format!("bad CSV header `{header}`")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::InvalidArgument(format!("row {}: bad number `{s}`", i + 1)))
            })
            .collect::<Result<_>>()?;
        if row.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row {} has {} cells, header has {}",
                i + 1,
                row.len(),
                columns.len()
            )));
        }
        rows.push(row);
    }
    Ok(NumericTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_headed_table_with_metadata() {
        let text = "# tool = mixedpath 0.1.0\n# seed = 7\nx,y\n1.5,-2e-3\n0,3\n";
        let t = read_numeric_csv(text).unwrap();
        assert_eq!(t.columns, vec!["x", "y"]);
        assert_eq!(t.rows, vec![vec![1.5, -2e-3], vec![0.0, 3.0]]);
        assert_eq!(t.column("y").unwrap(), 1);
        assert!(t.column("z").is_err());
    }

    #[test]
    fn rejects_ragged_rows_and_bad_cells() {
        assert!(read_numeric_csv("a,b\n1\n").is_err());
        assert!(read_numeric_csv("a,b\n1,zzz\n").is_err());
        assert!(read_numeric_csv("").is_err());
    }

    #[test]
    fn full_precision_values_round_trip() {
        let x = std::f64::consts::PI * 1e-7;
        let text = format!("v\n{x:.17e}\n");
        let t = read_numeric_csv(&text).unwrap();
        assert_eq!(t.rows[0][0], x);
    }
}
