use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical,
    /// A 0/1 feature; never standardized, kept as a single column.
    Binary,
    BinaryTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub categories: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<String>,
    /// Source column of a one-hot indicator.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
            categories: Vec::new(),
            unit: None,
            origin: None,
        }
    }

    pub fn binary(name: impl Into<String>) -> Self {
        Self {
            kind: ColumnKind::Binary,
            ..Self::continuous(name)
        }
    }

    pub fn target(name: impl Into<String>) -> Self {
        Self {
            kind: ColumnKind::BinaryTarget,
            ..Self::continuous(name)
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            kind: ColumnKind::Categorical,
            categories: categories.into_iter().map(Into::into).collect(),
            ..Self::continuous(name)
        }
    }

    pub fn with_unit(mut self, unit: impl Into<String>) -> Self {
        self.unit = Some(unit.into());
        self
    }

    pub fn is_feature(&self) -> bool {
        self.kind != ColumnKind::BinaryTarget
    }
}

/// Ordered column declarations of a cohort table.
///
/// Stored on disk as TOML:
///
/// ```toml
/// [[column]]
/// name = "Duration"
/// kind = "continuous"
/// unit = "years"
///
/// [[column]]
/// name = "Hypertension"
/// kind = "categorical"
/// categories = ["Yes", "No"]
///
/// [[column]]
/// name = "DN"
/// kind = "binary_target"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    #[serde(rename = "column")]
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        validate_columns(&columns)?;
        Ok(Self { columns })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text).map_err(|e| Error::parse("schema", e))?;
        validate_columns(&schema.columns)?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::parse("schema", e))
    }

    pub fn target(&self) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.kind == ColumnKind::BinaryTarget)
            .expect("validated schema has a target")
    }
}

pub(crate) fn validate_columns(columns: &[ColumnSpec]) -> Result<()> {
    let targets = columns.iter().filter(|c| c.kind == ColumnKind::BinaryTarget).count();
    if targets != 1 {
        return Err(Error::InvalidSchema(format!(
            "expected exactly one binary_target column, found {targets}"
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for c in columns {
        if !seen.insert(c.name.as_str()) {
            return Err(Error::InvalidSchema(format!("duplicate column `{}`", c.name)));
        }
        if c.kind == ColumnKind::Categorical {
            if c.categories.is_empty() {
                return Err(Error::InvalidSchema(format!(
                    "categorical column `{}` has no categories",
                    c.name
                )));
            }
            let mut cats = std::collections::HashSet::new();
            for cat in &c.categories {
                if cat.is_empty() || !cats.insert(cat.as_str()) {
                    return Err(Error::InvalidSchema(format!(
                        "column `{}`: categories must be unique and nonempty",
                        c.name
                    )));
                }
            }
        }
    }
    Ok(())
}
