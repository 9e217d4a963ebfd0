//! Cohort tables: schema, ingestion, preprocessing, derived clinical
//! variables and the stratified baseline table.

mod clinical;
mod dataset;
mod preprocess;
mod schema;
mod stats;

pub use clinical::{
    bmi, compute_egfr, derive_clinical_flags, derive_egfr, BmiClass, ClinicalColumns, Sex, BMI_CLASSES,
};
pub use dataset::{load_csv, read_csv, Dataset, LoadOptions};
pub use preprocess::{
    drop_constant_features, drop_incomplete_rows, drop_sparse_features, one_hot, standardize, ColumnScaler, Scaler,
};
pub use schema::{ColumnKind, ColumnSpec, Schema};
pub use stats::{
    baseline_table, chi_square_test, t_test, CohortSummary, GroupSummary, SummaryRow, TestKind, TestResult,
};
