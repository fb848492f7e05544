//! Numeric CSV ingestion.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsvDataset {
    pub x: Vec<Vec<f64>>,
    pub targets: Option<Vec<f64>>,
}

/// Read a numeric CSV, one sample per line.
///
/// A first line that does not parse as numbers is taken as a header. The
/// last column holds targets when `has_target` is `Some(true)`, or when it
/// is `None` and the header names that column `target`.
pub fn load_csv_dataset(path: &Path, has_target: Option<bool>) -> Result<CsvDataset> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid("data.csv", format!("{}: {e}", path.display())))?;
    parse_csv_dataset(&text, has_target)
}

pub fn parse_csv_dataset(text: &str, has_target: Option<bool>) -> Result<CsvDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut header: Option<Vec<String>> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(index as u64 + 1, |p| p.line());
            Error::invalid("data.csv", format!("line {line}: {e}"))
        })?;
        let line = record.position().map_or(index as u64 + 1, |p| p.line());
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => {
                if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
                    return Err(Error::invalid(
                        "data.csv",
                        format!("line {line}, column {}: non-finite value", bad + 1),
                    ));
                }
                rows.push(values);
            }
            Err(_) if index == 0 => header = Some(record.iter().map(str::to_string).collect()),
            Err(_) => {
                let column = record.iter().position(|c| c.parse::<f64>().is_err()).unwrap_or(0);
                return Err(Error::invalid(
                    "data.csv",
                    format!("line {line}, column {}: `{}` is not a number", column + 1, &record[column]),
                ));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::invalid("data.csv", "no data rows"));
    }
    let with_target = has_target.unwrap_or_else(|| {
        header
            .as_ref()
            .and_then(|h| h.last())
            .is_some_and(|name| name.eq_ignore_ascii_case("target"))
    });
    let width = rows[0].len();
    if with_target && width < 2 {
        return Err(Error::invalid("data.csv", "a target column needs at least one feature column"));
    }
    if !with_target {
        return Ok(CsvDataset { x: rows, targets: None });
    }
    let targets = rows.iter_mut().map(|r| r.pop().expect("width checked")).collect();
    Ok(CsvDataset { x: rows, targets: Some(targets) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_matrix() {
        let d = parse_csv_dataset("1,2\n3,4\n5,6\n", None).unwrap();
        assert_eq!(d.x, vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert!(d.targets.is_none());
    }

    #[test]
    fn header_target_column() {
        let d = parse_csv_dataset("x,target\n1,10\n2,20\n3,30\n", None).unwrap();
        assert_eq!(d.x, vec![vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(d.targets, Some(vec![10.0, 20.0, 30.0]));
        let forced = parse_csv_dataset("1,10\n2,20\n", Some(true)).unwrap();
        assert_eq!(forced.targets, Some(vec![10.0, 20.0]));
        let off = parse_csv_dataset("x,target\n1,10\n", Some(false)).unwrap();
        assert_eq!(off.x, vec![vec![1.0, 10.0]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(parse_csv_dataset("", None).is_err());
        assert!(parse_csv_dataset("a,b\n", None).is_err());
        let e = parse_csv_dataset("1,2\n3,x\n", None).unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("column 2"), "{e}");
        let e = parse_csv_dataset("1,2\n3\n", None).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
        let e = parse_csv_dataset("1,2\n3,inf\n", None).unwrap_err().to_string();
        assert!(e.contains("line 2"), "{e}");
    }
}
