//! Experiment pipeline over elicited cells: error tables against actual
//! results, average-case maps, matchup grids and swing-state bias.

mod bias;
mod errors;
mod map;
mod matchup;
pub mod report;
mod truth;

use thiserror::Error;

use crate::electoral::ElectoralError;
use crate::ingest::{IngestError, RaceLookupError};
use crate::pairwise::RaceError;

pub use bias::{swing_bias_report, BiasReport, GroupBias, DEFAULT_SWING_MARGIN};
pub use errors::{error_table, ErrorReport, StateError};
pub use map::{average_case_map, map_report, state_color, MapReport, MapRow};
pub use matchup::{
    matchup_keys, run_matchups, state_win_probabilities, AllocationPlan, MatchupCell, MatchupGrid,
    MatchupOptions,
};
pub use truth::GroundTruth;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("no cell for {candidate} in {state} {year}")]
    MissingCell {
        state: String,
        candidate: String,
        year: i32,
    },
    #[error("no ground truth for {candidate} in {state}")]
    MissingTruth { state: String, candidate: String },
    #[error("more than one cell for {candidate} in {state}")]
    DuplicateCell { state: String, candidate: String },
    #[error("weighted means are exactly equal in: {}", .0.join(", "))]
    ExactMeanTie(Vec<String>),
    #[error("invalid ground truth: {0}")]
    InvalidTruth(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("reading ground truth: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{} cell(s) could not be obtained", .0.len())]
    Fetch(Vec<IngestError>),
    #[error(transparent)]
    Lookup(#[from] RaceLookupError),
    #[error(transparent)]
    Race(#[from] RaceError),
    #[error(transparent)]
    Electoral(#[from] ElectoralError),
    #[error("{c1} vs {c2} ({year}): {source}")]
    Matchup {
        year: i32,
        c1: String,
        c2: String,
        #[source]
        source: Box<AnalysisError>,
    },
}
