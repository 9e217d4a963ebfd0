use std::io::{Read, Write};
use std::path::Path;

use crate::cohort::schema::{validate_columns, ColumnKind, ColumnSpec, Schema};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

/// Options for [`load_csv`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Cell contents (after trimming) treated as missing.
    pub missing_tokens: Vec<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            missing_tokens: vec![String::new(), "NA".to_string()],
        }
    }
}

/// Column-typed cohort table.
///
/// Values are stored row-major as `f64`; categorical cells hold the index of
/// their category. Masked cells hold `NaN` and must not be read as data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    columns: Vec<ColumnSpec>,
    n_rows: usize,
    values: Vec<f64>,
    missing: Vec<bool>,
    provenance: Vec<String>,
}

impl Dataset {
    pub fn new(columns: Vec<ColumnSpec>, n_rows: usize, values: Vec<f64>, missing: Vec<bool>) -> Result<Self> {
        validate_columns(&columns)?;
        let n_cols = columns.len();
        if values.len() != n_rows * n_cols || missing.len() != n_rows * n_cols {
            return Err(Error::Shape(format!(
                "{} values / {} mask entries for {n_rows} rows x {n_cols} columns",
                values.len(),
                missing.len()
            )));
        }
        let ds = Self {
            columns,
            n_rows,
            values,
            missing,
            provenance: Vec::new(),
        };
        ds.check_cells()?;
        Ok(ds)
    }

    fn check_cells(&self) -> Result<()> {
        for (j, col) in self.columns.iter().enumerate() {
            for i in 0..self.n_rows {
                if self.is_missing(i, j) {
                    if col.kind == ColumnKind::BinaryTarget {
                        return Err(Error::MissingTarget { row: i });
                    }
                    continue;
                }
                let v = self.raw(i, j);
                let ok = match col.kind {
                    ColumnKind::Continuous => v.is_finite(),
                    ColumnKind::Binary | ColumnKind::BinaryTarget => v == 0.0 || v == 1.0,
                    ColumnKind::Categorical => v >= 0.0 && v.fract() == 0.0 && (v as usize) < col.categories.len(),
                };
                if !ok {
                    return Err(Error::Domain(format!(
                        "row {i}, column `{}`: invalid value {v}",
                        col.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn column(&self, j: usize) -> &ColumnSpec {
        &self.columns[j]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    pub fn target_index(&self) -> usize {
        self.columns
            .iter()
            .position(|c| c.kind == ColumnKind::BinaryTarget)
            .expect("dataset always has a target column")
    }

    /// Indices of all non-target columns.
    pub fn feature_indices(&self) -> Vec<usize> {
        (0..self.n_cols()).filter(|&j| self.columns[j].is_feature()).collect()
    }

    pub fn provenance(&self) -> &[String] {
        &self.provenance
    }

    pub(crate) fn log(&mut self, entry: impl Into<String>) {
        self.provenance.push(entry.into());
    }

    #[inline]
    pub(crate) fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.columns.len() + col]
    }

    #[inline]
    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[row * self.columns.len() + col]
    }

    /// Cell value, `None` when masked.
    #[inline]
    pub fn value(&self, row: usize, col: usize) -> Option<f64> {
        if self.is_missing(row, col) {
            None
        } else {
            Some(self.raw(row, col))
        }
    }

    pub fn missing_count(&self, col: usize) -> usize {
        (0..self.n_rows).filter(|&i| self.is_missing(i, col)).count()
    }

    pub fn has_missing(&self) -> bool {
        self.missing.iter().any(|&m| m)
    }

    /// Target labels as 0/1.
    pub fn target(&self) -> Vec<u8> {
        let t = self.target_index();
        (0..self.n_rows).map(|i| self.raw(i, t) as u8).collect()
    }

    /// Observed values of one column (masked cells skipped).
    pub fn observed(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).filter_map(|i| self.value(i, col)).collect()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Dataset {
        let n_cols = self.n_cols();
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        let mut missing = Vec::with_capacity(rows.len() * n_cols);
        for &r in rows {
            values.extend_from_slice(&self.values[r * n_cols..(r + 1) * n_cols]);
            missing.extend_from_slice(&self.missing[r * n_cols..(r + 1) * n_cols]);
        }
        Dataset {
            columns: self.columns.clone(),
            n_rows: rows.len(),
            values,
            missing,
            provenance: self.provenance.clone(),
        }
    }

    /// Keeps only the listed columns, in their original order.
    pub(crate) fn retain_columns(&self, keep: &[bool]) -> Dataset {
        let n_cols = self.n_cols();
        let columns = self
            .columns
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(c, _)| c.clone())
            .collect();
        let mut values = Vec::new();
        let mut missing = Vec::new();
        for i in 0..self.n_rows {
            for j in (0..n_cols).filter(|&j| keep[j]) {
                values.push(self.values[i * n_cols + j]);
                missing.push(self.missing[i * n_cols + j]);
            }
        }
        Dataset {
            columns,
            n_rows: self.n_rows,
            values,
            missing,
            provenance: self.provenance.clone(),
        }
    }

    /// Builds a dataset from per-column vectors (`None` = missing).
    pub(crate) fn from_columns(
        columns: Vec<ColumnSpec>,
        data: Vec<Vec<Option<f64>>>,
        provenance: Vec<String>,
    ) -> Result<Dataset> {
        let n_rows = data.first().map_or(0, Vec::len);
        let n_cols = columns.len();
        let mut values = vec![f64::NAN; n_rows * n_cols];
        let mut missing = vec![false; n_rows * n_cols];
        for (j, col) in data.iter().enumerate() {
            for (i, v) in col.iter().enumerate() {
                match v {
                    Some(x) => values[i * n_cols + j] = *x,
                    None => missing[i * n_cols + j] = true,
                }
            }
        }
        let mut ds = Dataset::new(columns, n_rows, values, missing)?;
        ds.provenance = provenance;
        Ok(ds)
    }

    /// Column-major copy of all cells.
    pub(crate) fn to_columns(&self) -> Vec<Vec<Option<f64>>> {
        (0..self.n_cols())
            .map(|j| (0..self.n_rows).map(|i| self.value(i, j)).collect())
            .collect()
    }

    /// Appends a column; `values` must have one entry per row.
    pub fn push_column(&mut self, spec: ColumnSpec, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.n_rows {
            return Err(Error::Shape(format!(
                "column `{}` has {} values for {} rows",
                spec.name,
                values.len(),
                self.n_rows
            )));
        }
        let mut columns = self.columns.clone();
        columns.push(spec);
        let mut data = self.to_columns();
        data.push(values);
        let provenance = std::mem::take(&mut self.provenance);
        *self = Dataset::from_columns(columns, data, provenance)?;
        Ok(())
    }

    /// Numeric design matrix of all feature columns plus the 0/1 target.
    ///
    /// Requires a complete dataset without categorical columns (run
    /// [`crate::cohort::one_hot`] first).
    pub fn design_matrix(&self) -> Result<(FeatureMatrix, Vec<u8>)> {
        if self.has_missing() {
            return Err(Error::Domain(
                "design matrix requires a dataset without missing cells".into(),
            ));
        }
        let feats = self.feature_indices();
        if let Some(&j) = feats.iter().find(|&&j| self.columns[j].kind == ColumnKind::Categorical) {
            return Err(Error::Domain(format!(
                "categorical column `{}` must be one-hot encoded first",
                self.columns[j].name
            )));
        }
        let mut data = Vec::with_capacity(self.n_rows * feats.len());
        for i in 0..self.n_rows {
            data.extend(feats.iter().map(|&j| self.raw(i, j)));
        }
        let names = feats.iter().map(|&j| self.columns[j].name.clone()).collect();
        let x = FeatureMatrix::new(self.n_rows, feats.len(), data, names)?;
        Ok((x, self.target()))
    }

    pub fn schema(&self) -> Schema {
        Schema {
            columns: self.columns.clone(),
        }
    }

    /// Writes the table as CSV; masked cells become `NA`, categoricals their
    /// category label.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.columns.iter().map(|c| c.name.as_str()))?;
        let mut record = Vec::with_capacity(self.n_cols());
        for i in 0..self.n_rows {
            record.clear();
            for (j, col) in self.columns.iter().enumerate() {
                record.push(match self.value(i, j) {
                    None => "NA".to_string(),
                    Some(v) if col.kind == ColumnKind::Categorical => col.categories[v as usize].clone(),
                    Some(v) => format_number(v),
                });
            }
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Shortest round-trip decimal form; integers print without a fraction.
pub(crate) fn format_number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Loads a CSV cohort table against `schema`.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    let mut ds = read_csv(file, schema, options)?;
    ds.log(format!("load_csv: {} rows from {}", ds.n_rows(), path.display()));
    Ok(ds)
}

/// Reads CSV from any reader. The header must contain exactly the schema's
/// column names (any order); columns are stored in schema order.
pub fn read_csv<R: Read>(reader: R, schema: &Schema, options: &LoadOptions) -> Result<Dataset> {
    validate_columns(&schema.columns)?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut position = Vec::with_capacity(schema.columns.len());
    for col in &schema.columns {
        match header.iter().position(|h| h == &col.name) {
            Some(p) => position.push(p),
            None => {
                return Err(Error::SchemaMismatch(format!(
                    "column `{}` missing from header",
                    col.name
                )))
            }
        }
    }
    if header.len() != schema.columns.len() {
        let extra: Vec<&str> = header
            .iter()
            .filter(|h| !schema.columns.iter().any(|c| &c.name == *h))
            .map(String::as_str)
            .collect();
        return Err(Error::SchemaMismatch(format!(
            "header has columns not in schema: {}",
            extra.join(", ")
        )));
    }

    let n_cols = schema.columns.len();
    let mut values = Vec::new();
    let mut missing = Vec::new();
    let mut n_rows = 0;
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (col, &p) in schema.columns.iter().zip(&position) {
            let cell = record.get(p).unwrap_or("");
            if options.missing_tokens.iter().any(|t| t == cell) {
                if col.kind == ColumnKind::BinaryTarget {
                    return Err(Error::MissingTarget { row });
                }
                values.push(f64::NAN);
                missing.push(true);
                continue;
            }
            let v = parse_cell(col, cell, row)?;
            values.push(v);
            missing.push(false);
        }
        n_rows += 1;
    }
    debug_assert_eq!(values.len(), n_rows * n_cols);
    Dataset::new(schema.columns.clone(), n_rows, values, missing)
}

fn parse_cell(col: &ColumnSpec, cell: &str, row: usize) -> Result<f64> {
    let non_numeric = || Error::NonNumeric {
        row,
        column: col.name.clone(),
        value: cell.to_string(),
    };
    match col.kind {
        ColumnKind::Categorical => col
            .categories
            .iter()
            .position(|c| c == cell)
            .map(|i| i as f64)
            .ok_or_else(|| Error::UnknownCategory {
                row,
                column: col.name.clone(),
                value: cell.to_string(),
            }),
        ColumnKind::Continuous => {
            let v: f64 = cell.parse().map_err(|_| non_numeric())?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(non_numeric())
            }
        }
        ColumnKind::Binary | ColumnKind::BinaryTarget => {
            let v: f64 = cell.parse().map_err(|_| non_numeric())?;
            if v == 0.0 || v == 1.0 {
                Ok(v)
            } else {
                Err(Error::Domain(format!(
                    "row {row}, column `{}`: expected 0 or 1, got `{cell}`",
                    col.name
                )))
            }
        }
    }
}
