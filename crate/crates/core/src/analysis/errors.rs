use std::collections::BTreeMap;

use serde::Serialize;

use super::{AnalysisError, GroundTruth};
use crate::share_dist::ShareDistribution;

/// Per-state comparison of predicted weighted means with actual shares.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StateError {
    pub predicted_c1: f64,
    pub actual_c1: f64,
    pub error_c1: f64,
    pub predicted_c2: f64,
    pub actual_c2: f64,
    pub error_c2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorReport {
    pub year: i32,
    pub c1: String,
    pub c2: String,
    pub per_state: BTreeMap<String, StateError>,
    pub mean_c1: f64,
    pub mean_c2: f64,
    /// Population standard deviation over states.
    pub stddev_c1: f64,
    pub stddev_c2: f64,
}

/// Weighted-mean predictions aligned with the truth table.
///
/// Only cells of the truth year whose candidate and opponent are the two
/// truth candidates take part; every truth entry needs exactly one such cell
/// and every such cell needs a truth entry.
pub(crate) fn predicted_means(
    cells: &[ShareDistribution],
    truth: &GroundTruth,
) -> Result<BTreeMap<String, [f64; 2]>, AnalysisError> {
    let [a, b] = truth.candidates();
    let mut found: BTreeMap<String, [Option<f64>; 2]> = BTreeMap::new();
    for cell in cells {
        let m = cell.meta();
        let relevant = m.year == truth.year()
            && ((m.candidate == *a && m.opponent == *b) || (m.candidate == *b && m.opponent == *a));
        if !relevant {
            continue;
        }
        if !truth.shares().contains_key(&m.state) {
            return Err(AnalysisError::MissingTruth {
                state: m.state.clone(),
                candidate: m.candidate.clone(),
            });
        }
        let slot = truth.slot(&m.candidate).expect("candidate is a truth candidate");
        let entry = found.entry(m.state.clone()).or_default();
        if entry[slot].replace(cell.weighted_mean()).is_some() {
            return Err(AnalysisError::DuplicateCell {
                state: m.state.clone(),
                candidate: m.candidate.clone(),
            });
        }
    }
    let mut means = BTreeMap::new();
    for state in truth.states() {
        let entry = found.get(state).copied().unwrap_or_default();
        let mut pair = [0.0; 2];
        for (slot, value) in entry.iter().enumerate() {
            pair[slot] = value.ok_or_else(|| AnalysisError::MissingCell {
                state: state.to_string(),
                candidate: truth.candidates()[slot].clone(),
                year: truth.year(),
            })?;
        }
        means.insert(state.to_string(), pair);
    }
    Ok(means)
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn population_stddev(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Absolute error between each cell's weighted mean and the actual share.
pub fn error_table(
    cells: &[ShareDistribution],
    truth: &GroundTruth,
) -> Result<ErrorReport, AnalysisError> {
    let means = predicted_means(cells, truth)?;
    let mut per_state = BTreeMap::new();
    for (state, predicted) in &means {
        let actual = truth.shares()[state];
        per_state.insert(
            state.clone(),
            StateError {
                predicted_c1: predicted[0],
                actual_c1: actual[0],
                error_c1: (predicted[0] - actual[0]).abs(),
                predicted_c2: predicted[1],
                actual_c2: actual[1],
                error_c2: (predicted[1] - actual[1]).abs(),
            },
        );
    }
    let e1: Vec<f64> = per_state.values().map(|e| e.error_c1).collect();
    let e2: Vec<f64> = per_state.values().map(|e| e.error_c2).collect();
    let [c1, c2] = truth.candidates().clone();
    Ok(ErrorReport {
        year: truth.year(),
        c1,
        c2,
        mean_c1: mean(&e1),
        mean_c2: mean(&e2),
        stddev_c1: population_stddev(&e1),
        stddev_c2: population_stddev(&e2),
        per_state,
    })
}
