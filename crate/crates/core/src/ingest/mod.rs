//! Elicitation of share distributions from a logprob-exposing chat endpoint,
//! plus the cell-store file format.

mod client;
mod prompt;
pub mod replay;
mod source;
mod store;
mod tokens;

use thiserror::Error;

use crate::pairwise::RaceError;
use crate::share_dist::ShareError;

pub use client::{fetch_token_distribution, ChatClient, EndpointConfig, API_KEY_ENV};
pub use prompt::{build_prompt, PromptPair, SYSTEM_PROMPT};
pub use source::{fetch_cells, fetch_race, CachedSource, CellSource, LiveSource};
pub use store::{
    from_json, load_cells, save_cells, to_json, write_atomic, CellKey, CellStore, RaceLookupError,
    STORE_VERSION,
};
pub use tokens::{parse_share, tokens_to_shares, RawTokenDistribution, TokenProb};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("invalid {field}: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("invalid endpoint configuration: {0}")]
    Config(String),
    #[error("environment variable {API_KEY_ENV} is not set")]
    MissingApiKey,
    #[error("invalid token distribution: {0}")]
    InvalidRaw(String),
    #[error("no returned token parses as an integer share in 0..=100")]
    NoConformingTokens,
    #[error("network failure after {attempts} attempt(s): {message}")]
    Network { attempts: u32, message: String },
    #[error("endpoint rejected credentials (HTTP {status})")]
    Auth { status: u16 },
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error(transparent)]
    Share(#[from] ShareError),
    #[error(transparent)]
    Race(#[from] RaceError),
    #[error("{candidate} vs {opponent}, {state} {year}: {source}")]
    Cell {
        candidate: String,
        opponent: String,
        state: String,
        year: i32,
        #[source]
        source: Box<IngestError>,
    },
    #[error("no cell for {0}")]
    MissingCell(CellKey),
    #[error("cell {0} appears more than once")]
    DuplicateCell(CellKey),
    #[error("schema error{}: {field}: {message}", .index.map(|i| format!(" in cell {i}")).unwrap_or_default())]
    Schema {
        index: Option<usize>,
        field: String,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn for_cell(key: &CellKey, source: IngestError) -> IngestError {
        IngestError::Cell {
            candidate: key.candidate.clone(),
            opponent: key.opponent.clone(),
            state: key.state.clone(),
            year: key.year,
            source: Box::new(source),
        }
    }
}
