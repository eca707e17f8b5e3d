use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;

use super::AnalysisError;

/// Actual two-candidate vote shares for one election year.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    year: i32,
    candidates: [String; 2],
    /// state -> [share of candidates[0], share of candidates[1]]
    shares: BTreeMap<String, [f64; 2]>,
}

#[derive(Deserialize)]
struct TruthRow {
    state: String,
    candidate: String,
    share_percent: f64,
}

impl GroundTruth {
    /// Builds from `(state, candidate, share)` records.
    ///
    /// Exactly two candidate names may appear, each state must list both, and
    /// the first name seen becomes the first candidate.
    pub fn from_records<I>(year: i32, records: I) -> Result<Self, AnalysisError>
    where
        I: IntoIterator<Item = (String, String, f64)>,
    {
        let invalid = |msg: String| AnalysisError::InvalidTruth(msg);
        let mut names: Vec<String> = Vec::new();
        let mut partial: BTreeMap<String, [Option<f64>; 2]> = BTreeMap::new();
        for (state, candidate, share) in records {
            let state = state.trim().to_string();
            let candidate = candidate.trim().to_string();
            if state.is_empty() || candidate.is_empty() {
                return Err(invalid("empty state or candidate name".into()));
            }
            if !(0.0..=100.0).contains(&share) {
                return Err(invalid(format!("{candidate} in {state}: share {share} outside 0..=100")));
            }
            let slot = match names.iter().position(|n| *n == candidate) {
                Some(i) => i,
                None if names.len() < 2 => {
                    names.push(candidate.clone());
                    names.len() - 1
                }
                None => {
                    return Err(invalid(format!(
                        "third candidate {candidate:?} after {:?} and {:?}",
                        names[0], names[1]
                    )))
                }
            };
            let entry = partial.entry(state.clone()).or_default();
            if entry[slot].replace(share).is_some() {
                return Err(invalid(format!("{candidate} listed twice for {state}")));
            }
        }
        if names.len() != 2 {
            return Err(invalid("expected results for exactly two candidates".into()));
        }
        let mut shares = BTreeMap::new();
        for (state, [a, b]) in partial {
            match (a, b) {
                (Some(a), Some(b)) => {
                    shares.insert(state, [a, b]);
                }
                _ => return Err(invalid(format!("{state} does not list both candidates"))),
            }
        }
        let [a, b]: [String; 2] = names.try_into().expect("two names");
        Ok(GroundTruth {
            year,
            candidates: [a, b],
            shares,
        })
    }

    /// Reads a `state,candidate,share_percent` CSV with a header row.
    pub fn from_csv_reader<R: Read>(year: i32, reader: R) -> Result<Self, AnalysisError> {
        let mut csv = csv::Reader::from_reader(reader);
        let headers = csv.headers()?.clone();
        for required in ["state", "candidate", "share_percent"] {
            if !headers.iter().any(|h| h.trim() == required) {
                return Err(AnalysisError::InvalidTruth(format!("header lacks {required:?}")));
            }
        }
        let mut records = Vec::new();
        for row in csv.deserialize() {
            let row: TruthRow = row?;
            records.push((row.state, row.candidate, row.share_percent));
        }
        Self::from_records(year, records)
    }

    pub fn from_csv_path(year: i32, path: &Path) -> Result<Self, AnalysisError> {
        let file = std::fs::File::open(path).map_err(|e| {
            AnalysisError::InvalidTruth(format!("{}: {e}", path.display()))
        })?;
        Self::from_csv_reader(year, file)
    }

    pub fn year(&self) -> i32 {
        self.year
    }

    pub fn candidates(&self) -> &[String; 2] {
        &self.candidates
    }

    /// Index of `candidate` in [`Self::candidates`].
    pub fn slot(&self, candidate: &str) -> Option<usize> {
        self.candidates.iter().position(|c| c == candidate)
    }

    pub fn shares(&self) -> &BTreeMap<String, [f64; 2]> {
        &self.shares
    }

    pub fn share(&self, state: &str, candidate: &str) -> Option<f64> {
        Some(self.shares.get(state)?[self.slot(candidate)?])
    }

    pub fn states(&self) -> impl Iterator<Item = &str> {
        self.shares.keys().map(String::as_str)
    }
}
