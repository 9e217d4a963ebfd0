use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("cannot parse {what}: {message}")]
    Parse { what: String, message: String },

    #[error("header does not match schema: {0}")]
    SchemaMismatch(String),
    #[error("row {row}: target value is missing")]
    MissingTarget { row: usize },
    #[error("row {row}, column `{column}`: unknown category `{value}`")]
    UnknownCategory { row: usize, column: String, value: String },
    #[error("row {row}, column `{column}`: `{value}` is not numeric")]
    NonNumeric { row: usize, column: String, value: String },
    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("every feature was removed")]
    EmptyFeatureSet,
    #[error("no rows remain")]
    EmptyCohort,
    #[error("domain error: {0}")]
    Domain(String),
    #[error("feature `{0}` has zero variance")]
    ConstantFeature(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("brute-force Shapley limited to {max} features, got {n_features}")]
    ComplexityGuard { n_features: usize, max: usize },
    #[error("unknown feature `{0}`")]
    UnknownFeature(String),
    #[error("binning error: {0}")]
    Binning(String),
    #[error("invalid cohort spec: {0}")]
    Spec(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
}

impl Error {
    pub(crate) fn parse(what: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            what: what.into(),
            message: message.to_string(),
        }
    }
}
