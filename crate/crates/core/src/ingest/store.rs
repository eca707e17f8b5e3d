//! Versioned JSON cell files.
//!
//! ```json
//! { "version": 1, "cells": [ { "meta": {...}, "conforming_mass": 0.93, "masses": { "47": 0.9, ... } } ] }
//! ```
//!
//! Mass keys are canonical decimal strings written in ascending share order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;
use crate::pairwise::StateRace;
use crate::share_dist::{CellMeta, ShareDistribution};

pub const STORE_VERSION: u32 = 1;

/// Lookup key for one directional cell; the model and prompt fingerprint are
/// not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellKey {
    pub state: String,
    pub candidate: String,
    pub opponent: String,
    pub year: i32,
}

impl CellKey {
    pub fn new(state: &str, candidate: &str, opponent: &str, year: i32) -> Self {
        CellKey {
            state: state.to_string(),
            candidate: candidate.to_string(),
            opponent: opponent.to_string(),
            year,
        }
    }

    pub fn of(meta: &CellMeta) -> Self {
        Self::new(&meta.state, &meta.candidate, &meta.opponent, meta.year)
    }

    /// The opposite direction of the same race.
    pub fn mirror(&self) -> Self {
        Self::new(&self.state, &self.opponent, &self.candidate, self.year)
    }
}

impl fmt::Display for CellKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vs {} in {} {}",
            self.candidate, self.opponent, self.state, self.year
        )
    }
}

#[derive(Serialize)]
struct FileOut<'a> {
    version: u32,
    cells: Vec<CellOut<'a>>,
}

#[derive(Serialize)]
struct CellOut<'a> {
    meta: &'a CellMeta,
    conforming_mass: f64,
    masses: &'a BTreeMap<u8, f64>,
}

#[derive(Deserialize)]
struct FileIn {
    version: serde_json::Value,
    cells: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CellIn {
    meta: CellMeta,
    conforming_mass: f64,
    masses: BTreeMap<String, f64>,
}

fn schema(index: Option<usize>, field: &str, message: impl ToString) -> IngestError {
    IngestError::Schema {
        index,
        field: field.to_string(),
        message: message.to_string(),
    }
}

/// Canonical serialization of a cell list.
pub fn to_json(cells: &[ShareDistribution]) -> String {
    let doc = FileOut {
        version: STORE_VERSION,
        cells: cells
            .iter()
            .map(|c| CellOut {
                meta: c.meta(),
                conforming_mass: c.conforming_mass(),
                masses: c.masses(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("cell list serializes");
    text.push('\n');
    text
}

pub fn from_json(text: &str) -> Result<Vec<ShareDistribution>, IngestError> {
    let doc: FileIn = serde_json::from_str(text).map_err(|e| schema(None, "document", e))?;
    if doc.version != serde_json::json!(STORE_VERSION) {
        return Err(schema(
            None,
            "version",
            format!("expected {STORE_VERSION}, found {}", doc.version),
        ));
    }
    doc.cells
        .into_iter()
        .enumerate()
        .map(|(i, value)| parse_cell(i, value))
        .collect()
}

fn parse_cell(index: usize, value: serde_json::Value) -> Result<ShareDistribution, IngestError> {
    let at = Some(index);
    let cell: CellIn = serde_json::from_value(value).map_err(|e| schema(at, "cell", e))?;
    cell.meta.validate().map_err(|e| schema(at, "meta", e))?;
    let mut masses = BTreeMap::new();
    for (key, mass) in cell.masses {
        let share: u8 = key
            .parse()
            .ok()
            .filter(|s: &u8| s.to_string() == key && *s <= 100)
            .ok_or_else(|| schema(at, "masses", format!("key {key:?} is not a share in 0..=100")))?;
        masses.insert(share, mass);
    }
    ShareDistribution::from_normalized(masses, cell.conforming_mass, cell.meta).map_err(|e| {
        let field = match e {
            crate::share_dist::ShareError::ConformingMassOutOfRange(_) => "conforming_mass",
            _ => "masses",
        };
        schema(at, field, e)
    })
}

/// Writes `contents` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), IngestError> {
    let io = |source| IngestError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.as_file().sync_all().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn save_cells(cells: &[ShareDistribution], path: &Path) -> Result<(), IngestError> {
    write_atomic(path, to_json(cells).as_bytes())
}

pub fn load_cells(path: &Path) -> Result<Vec<ShareDistribution>, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text)
}

/// Cells indexed by [`CellKey`], kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct CellStore {
    cells: Vec<ShareDistribution>,
    index: HashMap<CellKey, usize>,
}

impl CellStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a store, rejecting two cells with the same key.
    pub fn from_cells(cells: Vec<ShareDistribution>) -> Result<Self, IngestError> {
        let mut store = CellStore::new();
        for cell in cells {
            let key = CellKey::of(cell.meta());
            if store.index.contains_key(&key) {
                return Err(IngestError::DuplicateCell(key));
            }
            store.insert(cell);
        }
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        Self::from_cells(load_cells(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), IngestError> {
        save_cells(&self.cells, path)
    }

    /// Inserts or replaces the cell with the same key.
    pub fn insert(&mut self, cell: ShareDistribution) {
        let key = CellKey::of(cell.meta());
        match self.index.get(&key) {
            Some(&i) => self.cells[i] = cell,
            None => {
                self.index.insert(key, self.cells.len());
                self.cells.push(cell);
            }
        }
    }

    pub fn get(&self, key: &CellKey) -> Option<&ShareDistribution> {
        self.index.get(key).map(|&i| &self.cells[i])
    }

    pub fn cells(&self) -> &[ShareDistribution] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Candidate names in order of first appearance.
    pub fn candidates(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for c in &self.cells {
            for name in [&c.meta().candidate, &c.meta().opponent] {
                if !seen.contains(name) {
                    seen.push(name.clone());
                }
            }
        }
        seen
    }

    /// Distinct years, ascending.
    pub fn years(&self) -> Vec<i32> {
        let mut years: Vec<i32> = self.cells.iter().map(|c| c.meta().year).collect();
        years.sort_unstable();
        years.dedup();
        years
    }

    /// Races for `c1` against `c2` in each requested state.
    ///
    /// On failure returns every state that lacks either direction.
    pub fn races<'a>(
        &self,
        c1: &str,
        c2: &str,
        year: i32,
        states: impl IntoIterator<Item = &'a str>,
    ) -> Result<BTreeMap<String, StateRace>, RaceLookupError> {
        let mut races = BTreeMap::new();
        let mut missing = Vec::new();
        for state in states {
            let a = self.get(&CellKey::new(state, c1, c2, year));
            let b = self.get(&CellKey::new(state, c2, c1, year));
            match (a, b) {
                (Some(a), Some(b)) => {
                    let race = StateRace::new(a.clone(), b.clone())
                        .map_err(|e| RaceLookupError::Invalid(IngestError::Race(e)))?;
                    races.insert(state.to_string(), race);
                }
                _ => missing.push(state.to_string()),
            }
        }
        if missing.is_empty() {
            Ok(races)
        } else {
            Err(RaceLookupError::Missing(missing))
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RaceLookupError {
    #[error("store is missing races for: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error(transparent)]
    Invalid(IngestError),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cell(state: &str, candidate: &str, opponent: &str, masses: &[(i64, f64)]) -> ShareDistribution {
        ShareDistribution::new(
            masses.iter().copied(),
            0.75,
            CellMeta {
                state: state.into(),
                candidate: candidate.into(),
                opponent: opponent.into(),
                year: 2024,
                model: "m".into(),
                prompt_fingerprint: "abc".into(),
            },
        )
        .unwrap()
    }

    #[test]
    fn canonical_layout() {
        let text = to_json(&[cell("Iowa", "A", "B", &[(100, 1.0), (7, 1.0), (47, 2.0)])]);
        let expected = r#"{
  "version": 1,
  "cells": [
    {
      "meta": {
        "state": "Iowa",
        "candidate": "A",
        "opponent": "B",
        "year": 2024,
        "model": "m",
        "prompt_fingerprint": "abc"
      },
      "conforming_mass": 0.75,
      "masses": {
        "7": 0.25,
        "47": 0.5,
        "100": 0.25
      }
    }
  ]
}
"#;
        assert_eq!(text, expected);
        assert_eq!(to_json(&from_json(&text).unwrap()), text);
    }

    #[test]
    fn empty_list_round_trips() {
        let text = to_json(&[]);
        assert!(from_json(&text).unwrap().is_empty());
    }

    #[test]
    fn unnormalized_cell_is_named() {
        let mut text = to_json(&[cell("Iowa", "A", "B", &[(40, 1.0)]), cell("Ohio", "A", "B", &[(40, 1.0)])]);
        let needle = "\"40\": 1.0";
        let pos = text.rfind(needle).unwrap();
        text.replace_range(pos..pos + needle.len(), "\"40\": 0.5");
        match from_json(&text) {
            Err(IngestError::Schema { index, field, .. }) => {
                assert_eq!(index, Some(1));
                assert_eq!(field, "masses");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        let good = to_json(&[cell("Iowa", "A", "B", &[(40, 1.0)])]);
        let cases = [
            (good.replace("\"version\": 1", "\"version\": 2"), None, "version"),
            (good.replace("\"40\"", "\"040\""), Some(0), "masses"),
            (good.replace("\"40\"", "\"101\""), Some(0), "masses"),
            (good.replace("\"40\": 1.0", "\"40\": -1.0"), Some(0), "masses"),
            (good.replace("0.75", "1.5"), Some(0), "conforming_mass"),
            (good.replace("\"opponent\": \"B\"", "\"opponent\": \"A\""), Some(0), "meta"),
            (good.replace("\"model\"", "\"modle\""), Some(0), "cell"),
            ("[]".to_string(), None, "document"),
        ];
        for (text, index, field) in cases {
            match from_json(&text) {
                Err(IngestError::Schema { index: i, field: f, .. }) => {
                    assert_eq!((i, f.as_str()), (index, field), "{text}");
                }
                other => panic!("expected schema error for {text}, got {other:?}"),
            }
        }
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cells.json");
        let cells = vec![cell("Iowa", "A", "B", &[(40, 1.0), (41, 3.0)])];
        save_cells(&cells, &path).unwrap();
        assert_eq!(load_cells(&path).unwrap(), cells);
        // overwrite in place
        save_cells(&[], &path).unwrap();
        assert!(load_cells(&path).unwrap().is_empty());
        assert!(matches!(
            load_cells(&dir.path().join("missing.json")),
            Err(IngestError::Io { .. })
        ));
    }

    #[test]
    fn store_indexing_and_races() {
        let store = CellStore::from_cells(vec![
            cell("Iowa", "A", "B", &[(55, 1.0)]),
            cell("Iowa", "B", "A", &[(45, 1.0)]),
            cell("Ohio", "A", "B", &[(50, 1.0)]),
        ])
        .unwrap();
        assert_eq!(store.candidates(), vec!["A".to_string(), "B".to_string()]);
        assert_eq!(store.years(), vec![2024]);
        let races = store.races("A", "B", 2024, ["Iowa"]).unwrap();
        assert_eq!(races["Iowa"].c1().prob(55), 1.0);
        match store.races("A", "B", 2024, ["Iowa", "Ohio", "Utah"]) {
            Err(RaceLookupError::Missing(m)) => assert_eq!(m, vec!["Ohio", "Utah"]),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            CellStore::from_cells(vec![cell("Iowa", "A", "B", &[(1, 1.0)]), cell("Iowa", "A", "B", &[(2, 1.0)])]),
            Err(IngestError::DuplicateCell(_))
        ));
    }
}
