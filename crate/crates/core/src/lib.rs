//! Vote-share distributions elicited from LLM token probabilities, turned
//! into state win probabilities and exact Electoral College outcome
//! distributions, with error and bias reports against actual results.

pub mod analysis;
pub mod electoral;
pub mod ingest;
pub mod pairwise;
pub mod share_dist;

pub use electoral::{brute_force_ec, ec_distribution, ECDistribution, EVAllocation, ElectoralError};
pub use pairwise::{tie_probability, win_probability, RaceError, StateRace, WinProbabilities};
pub use share_dist::{CellMeta, ShareDistribution, ShareError};
