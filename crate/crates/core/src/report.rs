//! Structured experiment results.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// A number with its unit and optional one-sigma uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    pub unit: String,
}

impl Quantity {
    pub fn new(value: f64, unit: &str) -> Self {
        Quantity {
            value,
            sigma: None,
            unit: unit.to_string(),
        }
    }

    pub fn with_sigma(value: f64, sigma: f64, unit: &str) -> Self {
        Quantity {
            value,
            sigma: Some(sigma),
            unit: unit.to_string(),
        }
    }
}

/// Tabular data written as its own CSV file. Column names carry units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Series {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Series {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Outcome of one acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Criterion identifier, `AC1` … `AC10`.
    pub criterion: String,
    pub description: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub inputs: BTreeMap<String, Quantity>,
    pub outputs: BTreeMap<String, Quantity>,
    pub series: Vec<Series>,
    pub verdicts: Vec<Verdict>,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64) -> Self {
        ExperimentReport {
            name: name.to_string(),
            seed,
            ..Default::default()
        }
    }

    pub fn input(&mut self, key: &str, q: Quantity) {
        self.inputs.insert(key.to_string(), q);
    }

    pub fn output(&mut self, key: &str, q: Quantity) {
        self.outputs.insert(key.to_string(), q);
    }

    pub fn verdict(&mut self, criterion: &str, description: &str, passed: bool, detail: String) {
        self.verdicts.push(Verdict {
            criterion: criterion.to_string(),
            description: description.to_string(),
            passed,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn find_verdict(&self, criterion: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.criterion == criterion)
    }

    pub fn value(&self, key: &str) -> Option<f64> {
        self.outputs.get(key).map(|q| q.value)
    }
}
