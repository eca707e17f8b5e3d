use serde::Serialize;

use super::errors::{mean, predicted_means};
use super::{AnalysisError, GroundTruth};
use crate::share_dist::ShareDistribution;

/// Margin, in percentage points, under which a state counts as a swing state.
pub const DEFAULT_SWING_MARGIN: f64 = 5.0;

/// Mean signed error (predicted − actual) over a group of states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupBias {
    pub states: usize,
    /// `None` when the group is empty.
    pub mean_signed_c1: Option<f64>,
    pub mean_signed_c2: Option<f64>,
}

impl GroupBias {
    fn over(errors: &[[f64; 2]]) -> Self {
        let pick = |i: usize| {
            let v: Vec<f64> = errors.iter().map(|e| e[i]).collect();
            (!v.is_empty()).then(|| mean(&v))
        };
        GroupBias {
            states: errors.len(),
            mean_signed_c1: pick(0),
            mean_signed_c2: pick(1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiasReport {
    pub year: i32,
    pub c1: String,
    pub c2: String,
    pub margin_threshold: f64,
    pub swing_states: Vec<String>,
    pub swing: GroupBias,
    pub non_swing: GroupBias,
    pub overall: GroupBias,
}

/// Signed prediction error split by whether the actual margin is below
/// `margin_threshold` points.
pub fn swing_bias_report(
    cells: &[ShareDistribution],
    truth: &GroundTruth,
    margin_threshold: f64,
) -> Result<BiasReport, AnalysisError> {
    if !(margin_threshold >= 0.0 && margin_threshold.is_finite()) {
        return Err(AnalysisError::InvalidArgument(format!(
            "margin threshold {margin_threshold} must be a finite non-negative number"
        )));
    }
    let means = predicted_means(cells, truth)?;
    let mut swing_states = Vec::new();
    let (mut swing, mut safe, mut all) = (Vec::new(), Vec::new(), Vec::new());
    for (state, predicted) in &means {
        let actual = truth.shares()[state];
        let signed = [predicted[0] - actual[0], predicted[1] - actual[1]];
        all.push(signed);
        if (actual[0] - actual[1]).abs() < margin_threshold {
            swing_states.push(state.clone());
            swing.push(signed);
        } else {
            safe.push(signed);
        }
    }
    let [c1, c2] = truth.candidates().clone();
    Ok(BiasReport {
        year: truth.year(),
        c1,
        c2,
        margin_threshold,
        swing_states,
        swing: GroupBias::over(&swing),
        non_swing: GroupBias::over(&safe),
        overall: GroupBias::over(&all),
    })
}
