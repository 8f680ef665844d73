use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// The sample that produced a check's verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Vec<f64>,
    pub arg: Vec<f64>,
    /// Second argument for two-point checks (midpoint convexity).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arg2: Option<Vec<f64>>,
    /// Value of the checked quantity at the witness.
    pub value: f64,
    /// Value it was compared against.
    pub reference: f64,
}

/// Pass/fail outcome of a sampled property check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    pub max_residual: f64,
    pub witness: Option<Witness>,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub residuals: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl CheckReport {
    pub fn new(check: impl Into<String>, seed: u64) -> Self {
        CheckReport {
            check: check.into(),
            pass: true,
            max_residual: 0.0,
            witness: None,
            samples: 0,
            seed,
            residuals: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }
}
