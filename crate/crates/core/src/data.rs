//! Column-per-node observation matrices and their CSV form.

use std::io::{Read, Write};

use crate::dag::{Dag, NodeId};
use crate::error::{RcaError, Result};

/// Synchronized observations, one column per node, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    rows: usize,
    values: Vec<f64>,
}

impl Dataset {
    pub fn new(names: Vec<String>, rows: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * names.len() {
            return Err(RcaError::Parse(format!(
                "{} values do not fill {} rows of {} columns",
                values.len(),
                rows,
                names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(RcaError::Parse("dataset contains non-finite values".into()));
        }
        Ok(Dataset { names, rows, values })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let cols = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(RcaError::ColumnMismatch { expected: cols, got: r.len() });
        }
        Self::new(names, rows.len(), rows.concat())
    }

    pub fn empty(names: Vec<String>) -> Self {
        Dataset { names, rows: 0, values: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, row: usize, node: NodeId) -> f64 {
        self.values[row * self.cols() + node.0]
    }

    pub fn column(&self, node: NodeId) -> impl Iterator<Item = f64> + '_ {
        let c = self.cols();
        (0..self.rows).map(move |r| self.values[r * c + node.0])
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.rows).map(move |r| self.row(r))
    }

    /// Row-wise concatenation of two datasets with identical columns.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.cols() != other.cols() {
            return Err(RcaError::ColumnMismatch { expected: self.cols(), got: other.cols() });
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values);
        Ok(Dataset { names: self.names.clone(), rows: self.rows + other.rows, values })
    }

    /// Rows `range` as a new dataset.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        let c = self.cols();
        Dataset {
            names: self.names.clone(),
            rows: range.len(),
            values: self.values[range.start * c..range.end * c].to_vec(),
        }
    }

    /// Fails unless the dataset has exactly one column per node of `dag`.
    pub fn check_against(&self, dag: &Dag) -> Result<()> {
        if self.cols() != dag.node_count() {
            return Err(RcaError::ColumnMismatch { expected: dag.node_count(), got: self.cols() });
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.names)?;
        for row in self.iter_rows() {
            w.write_record(row.iter().map(|v| format!("{v:?}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| RcaError::Parse(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Dataset> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let names: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        let mut values = Vec::new();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != names.len() {
                return Err(RcaError::ColumnMismatch { expected: names.len(), got: rec.len() });
            }
            for field in rec.iter() {
                let v: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| RcaError::Parse(format!("not a number: {field:?}")))?;
                values.push(v);
            }
            rows += 1;
        }
        Dataset::new(names, rows, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let d = Dataset::from_rows(
            vec!["a".into(), "b".into()],
            &[vec![0.1, -1.0 / 3.0], vec![1e-300, 12345.678901234567]],
        )
        .unwrap();
        let text = d.to_csv_string().unwrap();
        assert!(text.starts_with("a,b\n"));
        assert_eq!(Dataset::read_csv(text.as_bytes()).unwrap(), d);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = Dataset::from_rows(vec!["a".into()], &[vec![1.0, 2.0]]).unwrap_err();
        assert!(matches!(err, RcaError::ColumnMismatch { expected: 1, got: 2 }));
        assert!(Dataset::read_csv("a,b\n1,x\n".as_bytes()).is_err());
    }
}
