use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major design matrix with named columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
    names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>, names: Vec<String>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "{} values for a {n_rows}x{n_cols} matrix",
                data.len()
            )));
        }
        if names.len() != n_cols {
            return Err(Error::Shape(format!("{} names for {n_cols} columns", names.len())));
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
            names,
        })
    }

    /// Matrix with generated column names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::Shape(format!(
                    "row {i} has {} values, expected {n_cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        let names = (0..n_cols).map(|j| format!("x{j}")).collect();
        Self::new(rows.len(), n_cols, data, names)
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_cols {
            return Err(Error::Shape(format!(
                "{} names for {} columns",
                names.len(),
                self.n_cols
            )));
        }
        self.names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.n_cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.n_cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.n_cols..(row + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols.max(1)).take(self.n_rows)
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, col)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.n_cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            data,
            names: self.names.clone(),
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for i in 0..self.n_rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Self {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
        }
    }

    /// Selects columns by name, in the given order.
    pub fn select_named(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::UnknownFeature(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&idx))
    }

    pub fn has_nan(&self) -> bool {
        self.data.iter().any(|v| v.is_nan())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_rows_and_columns() {
        let m = FeatureMatrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let r = m.select_rows(&[1, 1, 0]);
        assert_eq!(r.row(0), &[4.0, 5.0, 6.0]);
        assert_eq!(r.n_rows(), 3);
        let c = m.select_columns(&[2, 0]);
        assert_eq!(c.row(1), &[6.0, 4.0]);
        assert_eq!(c.names(), &["x2".to_string(), "x0".to_string()]);
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(FeatureMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
