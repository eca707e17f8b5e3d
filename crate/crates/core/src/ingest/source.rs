use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use super::{build_prompt, tokens_to_shares, CellKey, CellStore, ChatClient, EndpointConfig, IngestError};
use crate::pairwise::StateRace;
use crate::share_dist::{CellMeta, ShareDistribution};

/// Anything that can produce the share distribution for one directional cell.
pub trait CellSource: Sync {
    fn get_cell(&self, key: &CellKey) -> Result<ShareDistribution, IngestError>;
}

impl CellSource for CellStore {
    fn get_cell(&self, key: &CellKey) -> Result<ShareDistribution, IngestError> {
        self.get(key)
            .cloned()
            .ok_or_else(|| IngestError::MissingCell(key.clone()))
    }
}

/// Elicits each cell from a chat-completions endpoint.
#[derive(Debug, Clone)]
pub struct LiveSource {
    client: ChatClient,
}

impl LiveSource {
    pub fn new(cfg: EndpointConfig) -> Result<Self, IngestError> {
        Ok(LiveSource {
            client: ChatClient::new(cfg)?,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        self.client.config()
    }
}

impl CellSource for LiveSource {
    fn get_cell(&self, key: &CellKey) -> Result<ShareDistribution, IngestError> {
        let prompt = build_prompt(&key.candidate, &key.opponent, key.year, &key.state)?;
        let raw = self.client.fetch(&prompt)?;
        let meta = CellMeta {
            state: key.state.clone(),
            candidate: key.candidate.clone(),
            opponent: key.opponent.clone(),
            year: key.year,
            model: raw.model().to_string(),
            prompt_fingerprint: prompt.fingerprint(),
        };
        tokens_to_shares(&raw, meta)
    }
}

/// Serves cells from a store and falls back to another source on a miss.
///
/// Cells obtained from the fallback are kept so the caller can persist them.
pub struct CachedSource<'a> {
    store: &'a CellStore,
    fallback: Option<&'a dyn CellSource>,
    fetched: Mutex<Vec<ShareDistribution>>,
    misses: AtomicUsize,
}

impl<'a> CachedSource<'a> {
    pub fn new(store: &'a CellStore, fallback: Option<&'a dyn CellSource>) -> Self {
        CachedSource {
            store,
            fallback,
            fetched: Mutex::new(Vec::new()),
            misses: AtomicUsize::new(0),
        }
    }

    /// Number of lookups that went to the fallback.
    pub fn fallback_calls(&self) -> usize {
        self.misses.load(Ordering::SeqCst)
    }

    /// Cells successfully obtained from the fallback, in completion order.
    pub fn into_fetched(self) -> Vec<ShareDistribution> {
        self.fetched.into_inner().unwrap_or_else(|e| e.into_inner())
    }
}

impl CellSource for CachedSource<'_> {
    fn get_cell(&self, key: &CellKey) -> Result<ShareDistribution, IngestError> {
        if let Some(cell) = self.store.get(key) {
            return Ok(cell.clone());
        }
        let Some(fallback) = self.fallback else {
            return Err(IngestError::MissingCell(key.clone()));
        };
        self.misses.fetch_add(1, Ordering::SeqCst);
        let cell = fallback.get_cell(key)?;
        self.fetched
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push(cell.clone());
        Ok(cell)
    }
}

/// Resolves `keys` with at most `parallel` lookups in flight.
///
/// Results come back in key order; failures are tagged with their cell.
pub fn fetch_cells(
    source: &dyn CellSource,
    keys: &[CellKey],
    parallel: usize,
) -> Vec<Result<ShareDistribution, IngestError>> {
    let workers = parallel.max(1).min(keys.len());
    if workers <= 1 {
        return keys.iter().map(|k| lookup(source, k)).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<ShareDistribution, IngestError>>>> =
        keys.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(key) = keys.get(i) else { break };
                let result = lookup(source, key);
                *slots[i].lock().unwrap_or_else(|e| e.into_inner()) = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .unwrap_or_else(|e| e.into_inner())
                .expect("every slot is filled")
        })
        .collect()
}

fn lookup(source: &dyn CellSource, key: &CellKey) -> Result<ShareDistribution, IngestError> {
    source.get_cell(key).map_err(|e| match e {
        e @ IngestError::Cell { .. } => e,
        e => IngestError::for_cell(key, e),
    })
}

/// Both directions of one state race, fetched as independent requests.
pub fn fetch_race(
    source: &dyn CellSource,
    state: &str,
    c1: &str,
    c2: &str,
    year: i32,
) -> Result<StateRace, IngestError> {
    let keys = [CellKey::new(state, c1, c2, year), CellKey::new(state, c2, c1, year)];
    let mut results = fetch_cells(source, &keys, 2).into_iter();
    let first = results.next().expect("two results")?;
    let second = results.next().expect("two results")?;
    Ok(StateRace::new(first, second)?)
}
