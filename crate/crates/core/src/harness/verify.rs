use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{HarnessError, RunOutput};
use crate::model::ResultSet;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mismatch {
    pub instance: String,
    /// Normalized payloads; `None` when that side has no successful result.
    pub left: Option<ResultSet>,
    pub right: Option<ResultSet>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub left: String,
    pub right: String,
    pub plan_digest: String,
    pub compared: usize,
    pub mismatches: Vec<Mismatch>,
}

impl EquivalenceReport {
    pub fn is_clean(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Compares the captured results of two runs of the same plan instance by
/// instance. Float cells may differ by `rel_tol` relative.
pub fn verify_equivalence(
    left_id: &str,
    left: &RunOutput,
    right_id: &str,
    right: &RunOutput,
    rel_tol: f64,
) -> Result<EquivalenceReport, HarnessError> {
    if left.plan_digest != right.plan_digest {
        return Err(HarnessError::PlanMismatch { left: left.plan_digest.clone(), right: right.plan_digest.clone() });
    }
    let a = left.results.as_ref().ok_or_else(|| HarnessError::OpaqueResults(left_id.into()))?;
    let b = right.results.as_ref().ok_or_else(|| HarnessError::OpaqueResults(right_id.into()))?;
    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
    let mut mismatches = Vec::new();
    for key in &keys {
        let (x, y) = (a.get(*key), b.get(*key));
        let same = match (x, y) {
            (Some(x), Some(y)) => x.equivalent_within(y, rel_tol),
            _ => false,
        };
        if !same {
            mismatches.push(Mismatch { instance: key.to_string(), left: x.cloned(), right: y.cloned() });
        }
    }
    Ok(EquivalenceReport {
        left: left_id.into(),
        right: right_id.into(),
        plan_digest: left.plan_digest.clone(),
        compared: keys.len(),
        mismatches,
    })
}
