//! Dataset schema, ingestion, and clamping rules.
//!
//! Feature borders are static and data-independent: numerical values outside
//! the declared range are clamped at ingestion, categorical values must be
//! members of the schema's value list. Categories map to dense integer codes
//! in schema order, never data order.

use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::DataError;

/// Prediction task of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Classification,
}

/// Static per-feature description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    /// Data-independent feature border (v_min, v_max).
    Numerical { min: f64, max: f64 },
    /// Distinct category symbols; code = position in this list.
    Categorical { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl FeatureSpec {
    pub fn numerical(name: &str, min: f64, max: f64) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Numerical { min, max },
        }
    }

    pub fn categorical(name: &str, values: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            kind: FeatureKind::Categorical {
                values: values.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self.kind, FeatureKind::Numerical { .. })
    }

    fn validate(&self) -> Result<(), DataError> {
        match &self.kind {
            FeatureKind::Numerical { min, max } => {
                if !(min < max) {
                    return Err(DataError::InvalidSchema(format!(
                        "feature '{}': require v_min < v_max, got [{min}, {max}]",
                        self.name
                    )));
                }
            }
            FeatureKind::Categorical { values } => {
                if values.is_empty() {
                    return Err(DataError::InvalidSchema(format!(
                        "feature '{}': empty category list",
                        self.name
                    )));
                }
                let mut sorted = values.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != values.len() {
                    return Err(DataError::InvalidSchema(format!(
                        "feature '{}': duplicate category",
                        self.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Clamp a numerical value into its declared border. Idempotent.
pub fn clamp_to_border(value: f64, min: f64, max: f64) -> f64 {
    value.clamp(min, max)
}

/// Full dataset schema: feature list plus label handling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub task: Task,
    pub label: String,
    /// For classification: the two label symbols, mapped to 0.0 and 1.0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_values: Option<[String; 2]>,
    pub features: Vec<FeatureSpec>,
}

impl Schema {
    pub fn validate(&self) -> Result<(), DataError> {
        if self.features.is_empty() {
            return Err(DataError::InvalidSchema("no features".into()));
        }
        for f in &self.features {
            f.validate()?;
        }
        if self.task == Task::Classification && self.label_values.is_none() {
            return Err(DataError::InvalidSchema(
                "classification schema needs label_values".into(),
            ));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, DataError> {
        let schema: Schema =
            serde_json::from_str(text).map_err(|e| DataError::InvalidSchema(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn num_features(&self) -> usize {
        self.features.len()
    }
}

/// In-memory dataset: row-major feature matrix plus labels.
///
/// Categorical cells hold their integer code as f64. Immutable after
/// construction; cheap to share across threads.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: Arc<Schema>,
    features: Vec<f64>,
    labels: Vec<f64>,
    n: usize,
}

impl Dataset {
    pub fn new(schema: Arc<Schema>, features: Vec<f64>, labels: Vec<f64>) -> Self {
        let m = schema.num_features();
        assert_eq!(features.len(), labels.len() * m, "ragged feature matrix");
        let n = labels.len();
        Self {
            schema,
            features,
            labels,
            n,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.schema.num_features();
        &self.features[i * m..(i + 1) * m]
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    /// Dataset restricted to `indices` (copies rows; order preserved).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let m = self.schema.num_features();
        let mut features = Vec::with_capacity(indices.len() * m);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Dataset::new(self.schema.clone(), features, labels)
    }
}

/// Parse a CSV file (comma separated, header row) against a schema.
pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Dataset, DataError> {
    let file = std::fs::File::open(path)?;
    load_dataset_from_reader(file, schema)
}

/// Reader-based loader; the entry point the CSV fuzz target drives.
pub fn load_dataset_from_reader<R: Read>(reader: R, schema: &Schema) -> Result<Dataset, DataError> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers = rdr
        .headers()
        .map_err(|e| DataError::Parse {
            row: 0,
            msg: e.to_string(),
        })?
        .clone();
    let col_of = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let label_col = col_of(&schema.label)?;
    let feature_cols: Vec<usize> = schema
        .features
        .iter()
        .map(|f| col_of(&f.name))
        .collect::<Result<_, _>>()?;

    let m = schema.num_features();
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let row = idx + 1;
        let record = record.map_err(|e| DataError::Parse {
            row,
            msg: e.to_string(),
        })?;
        for (j, spec) in schema.features.iter().enumerate() {
            let raw = record.get(feature_cols[j]).ok_or_else(|| DataError::Parse {
                row,
                msg: format!("missing column '{}'", spec.name),
            })?;
            let value = match &spec.kind {
                FeatureKind::Numerical { min, max } => {
                    let v: f64 = raw.trim().parse().map_err(|_| DataError::Parse {
                        row,
                        msg: format!("'{}' is not a number in column '{}'", raw, spec.name),
                    })?;
                    if !v.is_finite() {
                        return Err(DataError::Parse {
                            row,
                            msg: format!("non-finite value in column '{}'", spec.name),
                        });
                    }
                    clamp_to_border(v, *min, *max)
                }
                FeatureKind::Categorical { values } => {
                    let raw = raw.trim();
                    match values.iter().position(|v| v == raw) {
                        Some(code) => code as f64,
                        None => {
                            return Err(DataError::Schema {
                                row,
                                column: spec.name.clone(),
                                msg: format!("unknown category '{raw}'"),
                            })
                        }
                    }
                }
            };
            features.push(value);
        }
        let raw_label = record.get(label_col).ok_or_else(|| DataError::Parse {
            row,
            msg: "missing label".into(),
        })?;
        let label = match (&schema.task, &schema.label_values) {
            (Task::Classification, Some([neg, pos])) => {
                let raw_label = raw_label.trim();
                if raw_label == neg {
                    0.0
                } else if raw_label == pos {
                    1.0
                } else {
                    return Err(DataError::Schema {
                        row,
                        column: schema.label.clone(),
                        msg: format!("unknown label '{raw_label}'"),
                    });
                }
            }
            _ => raw_label.trim().parse().map_err(|_| DataError::Parse {
                row,
                msg: format!("'{raw_label}' is not a numeric label"),
            })?,
        };
        labels.push(label);
    }
    debug_assert_eq!(features.len(), labels.len() * m);
    Ok(Dataset::new(Arc::new(schema.clone()), features, labels))
}
