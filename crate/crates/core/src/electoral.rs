//! Exact Electoral College outcome distributions.
//!
//! The PMF over c1's electoral-vote total is the coefficient vector of
//! `Π_s [P_s(c2) + P_s(c1)·z^{e_s}]`, built by dense polynomial
//! multiplication one state at a time.

use std::collections::BTreeMap;
use std::io::Read;
use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

/// Conventional majority of a 538-vote college.
pub const DEFAULT_MAJORITY: u32 = 270;

/// Largest instance [`brute_force_ec`] will enumerate.
pub const BRUTE_FORCE_MAX_STATES: usize = 20;

#[derive(Debug, Error)]
pub enum ElectoralError {
    #[error("state sets differ; missing win probabilities for {missing:?}, not in allocation {extra:?}")]
    StateMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },
    #[error("win probability {p} for {state} is outside [0, 1]")]
    ProbabilityOutOfRange { state: String, p: f64 },
    #[error("{0} states exceeds the enumeration limit of {BRUTE_FORCE_MAX_STATES}")]
    TooManyStates(usize),
    #[error("threshold {threshold} is outside 0..={max}")]
    ThresholdOutOfRange { threshold: u32, max: u32 },
    #[error("total of {0} electoral votes is odd; no exact tie is possible")]
    OddTotal(u32),
    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),
    #[error("reading allocation: {0}")]
    Csv(#[from] csv::Error),
    #[error("reading allocation: {0}")]
    Io(#[from] std::io::Error),
}

/// 2020-census apportionment, used for the 2024 and 2028 elections.
const APPORTIONMENT_2020: [(&str, u32); 51] = [
    ("Alabama", 9),
    ("Alaska", 3),
    ("Arizona", 11),
    ("Arkansas", 6),
    ("California", 54),
    ("Colorado", 10),
    ("Connecticut", 7),
    ("Delaware", 3),
    ("District of Columbia", 3),
    ("Florida", 30),
    ("Georgia", 16),
    ("Hawaii", 4),
    ("Idaho", 4),
    ("Illinois", 19),
    ("Indiana", 11),
    ("Iowa", 6),
    ("Kansas", 6),
    ("Kentucky", 8),
    ("Louisiana", 8),
    ("Maine", 4),
    ("Maryland", 10),
    ("Massachusetts", 11),
    ("Michigan", 15),
    ("Minnesota", 10),
    ("Mississippi", 6),
    ("Missouri", 10),
    ("Montana", 4),
    ("Nebraska", 5),
    ("Nevada", 6),
    ("New Hampshire", 4),
    ("New Jersey", 14),
    ("New Mexico", 5),
    ("New York", 28),
    ("North Carolina", 16),
    ("North Dakota", 3),
    ("Ohio", 17),
    ("Oklahoma", 7),
    ("Oregon", 8),
    ("Pennsylvania", 19),
    ("Rhode Island", 4),
    ("South Carolina", 9),
    ("South Dakota", 3),
    ("Tennessee", 11),
    ("Texas", 40),
    ("Utah", 6),
    ("Vermont", 3),
    ("Virginia", 13),
    ("Washington", 12),
    ("West Virginia", 4),
    ("Wisconsin", 10),
    ("Wyoming", 3),
];

/// States whose 2010-census count differs from the 2020-census table.
const APPORTIONMENT_2010_CHANGES: [(&str, u32); 13] = [
    ("California", 55),
    ("Colorado", 9),
    ("Florida", 29),
    ("Illinois", 20),
    ("Michigan", 16),
    ("Montana", 3),
    ("New York", 29),
    ("North Carolina", 15),
    ("Ohio", 18),
    ("Oregon", 7),
    ("Pennsylvania", 20),
    ("Texas", 38),
    ("West Virginia", 5),
];

/// Electoral votes per winner-take-all unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EVAllocation {
    votes: BTreeMap<String, u32>,
}

#[derive(Deserialize)]
struct AllocationRow {
    state: String,
    electoral_votes: u32,
}

impl EVAllocation {
    pub fn new(votes: BTreeMap<String, u32>) -> Result<Self, ElectoralError> {
        if votes.is_empty() {
            return Err(ElectoralError::InvalidAllocation("no states".into()));
        }
        if let Some((state, _)) = votes.iter().find(|(_, &e)| e == 0) {
            return Err(ElectoralError::InvalidAllocation(format!(
                "{state} has zero electoral votes"
            )));
        }
        if let Some(state) = votes.keys().find(|s| s.trim().is_empty()) {
            return Err(ElectoralError::InvalidAllocation(format!(
                "empty state name {state:?}"
            )));
        }
        Ok(EVAllocation { votes })
    }

    /// The 2020-census apportionment (51 units, 538 votes).
    pub fn bundled_2024() -> Self {
        EVAllocation {
            votes: APPORTIONMENT_2020
                .iter()
                .map(|&(s, e)| (s.to_string(), e))
                .collect(),
        }
    }

    /// The 2010-census apportionment used in 2012, 2016 and 2020.
    pub fn bundled_2010_census() -> Self {
        let mut alloc = Self::bundled_2024();
        for &(state, e) in &APPORTIONMENT_2010_CHANGES {
            alloc.votes.insert(state.to_string(), e);
        }
        alloc
    }

    /// Bundled apportionment in force for a presidential election year.
    pub fn for_year(year: i32) -> Self {
        if (2012..=2020).contains(&year) {
            Self::bundled_2010_census()
        } else {
            Self::bundled_2024()
        }
    }

    /// Reads a `state,electoral_votes` CSV with a header row.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self, ElectoralError> {
        let mut votes = BTreeMap::new();
        for row in csv::Reader::from_reader(reader).deserialize() {
            let row: AllocationRow = row?;
            let state = row.state.trim().to_string();
            if votes.insert(state.clone(), row.electoral_votes).is_some() {
                return Err(ElectoralError::InvalidAllocation(format!(
                    "{state} listed twice"
                )));
            }
        }
        Self::new(votes)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self, ElectoralError> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn votes(&self) -> &BTreeMap<String, u32> {
        &self.votes
    }

    pub fn get(&self, state: &str) -> Option<u32> {
        self.votes.get(state).copied()
    }

    pub fn states(&self) -> impl Iterator<Item = &str> {
        self.votes.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn total(&self) -> u32 {
        self.votes.values().sum()
    }

    /// Majority of the total: `⌊E/2⌋ + 1`.
    pub fn majority(&self) -> u32 {
        self.total() / 2 + 1
    }
}

/// PMF over c1's electoral-vote total, indexed `0..=E`.
#[derive(Debug, Clone, PartialEq)]
pub struct ECDistribution {
    pmf: Vec<f64>,
}

impl ECDistribution {
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn e_total(&self) -> u32 {
        (self.pmf.len() - 1) as u32
    }

    /// `P(V ≥ threshold)` for `threshold` in `0..=E+1`.
    pub fn win_chance(&self, threshold: u32) -> Result<f64, ElectoralError> {
        let max = self.e_total() + 1;
        if threshold > max {
            return Err(ElectoralError::ThresholdOutOfRange { threshold, max });
        }
        Ok(self.pmf[threshold as usize..].iter().sum())
    }

    /// `P(V = E/2)`. Errors when `E` is odd.
    pub fn exact_tie_probability(&self) -> Result<f64, ElectoralError> {
        let e = self.e_total();
        if e % 2 == 1 {
            return Err(ElectoralError::OddTotal(e));
        }
        Ok(self.pmf[(e / 2) as usize])
    }

    /// `Σ k·P(V = k)`.
    pub fn expected_votes(&self) -> f64 {
        self.pmf
            .iter()
            .enumerate()
            .map(|(k, p)| k as f64 * p)
            .sum()
    }

    /// The same outcomes seen from c2: `P(V' = E − k) = P(V = k)`.
    pub fn mirrored(&self) -> ECDistribution {
        let mut pmf = self.pmf.clone();
        pmf.reverse();
        ECDistribution { pmf }
    }

    /// Probability that c2 reaches `threshold`, i.e. c1 loses outright.
    pub fn loss_chance(&self, threshold: u32) -> Result<f64, ElectoralError> {
        self.mirrored().win_chance(threshold)
    }

    pub fn total_mass(&self) -> f64 {
        self.pmf.iter().sum()
    }
}

fn check_inputs(
    state_wins: &BTreeMap<String, f64>,
    alloc: &EVAllocation,
) -> Result<Vec<(u32, f64)>, ElectoralError> {
    let missing: Vec<String> = alloc
        .states()
        .filter(|s| !state_wins.contains_key(*s))
        .map(String::from)
        .collect();
    let extra: Vec<String> = state_wins
        .keys()
        .filter(|s| alloc.get(s).is_none())
        .cloned()
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(ElectoralError::StateMismatch { missing, extra });
    }
    let mut units = Vec::with_capacity(state_wins.len());
    for (state, &p) in state_wins {
        if !(0.0..=1.0).contains(&p) {
            return Err(ElectoralError::ProbabilityOutOfRange {
                state: state.clone(),
                p,
            });
        }
        units.push((state.as_str(), alloc.votes[state], p));
    }
    // descending electoral votes, then by name, for a deterministic product
    units.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    Ok(units.into_iter().map(|(_, e, p)| (e, p)).collect())
}

/// Multiplies `(1 − p) + p·z^e` factors in the given order.
///
/// Each unit is `(electoral_votes, p_c1_wins)`; probabilities are assumed
/// already validated.
pub fn convolve_units(units: &[(u32, f64)]) -> ECDistribution {
    let total: usize = units.iter().map(|&(e, _)| e as usize).sum();
    let mut pmf = vec![0.0; total + 1];
    pmf[0] = 1.0;
    let mut reach = 0usize;
    for &(e, p) in units {
        let e = e as usize;
        let q = 1.0 - p;
        reach += e;
        for k in (0..=reach).rev() {
            let carried = if k >= e { pmf[k - e] * p } else { 0.0 };
            pmf[k] = pmf[k] * q + carried;
        }
    }
    ECDistribution { pmf }
}

/// Exact PMF of c1's electoral votes from independent state win probabilities.
pub fn ec_distribution(
    state_wins: &BTreeMap<String, f64>,
    alloc: &EVAllocation,
) -> Result<ECDistribution, ElectoralError> {
    let units = check_inputs(state_wins, alloc)?;
    Ok(convolve_units(&units))
}

/// The same PMF by enumerating every subset of states c1 could carry.
pub fn brute_force_ec(
    state_wins: &BTreeMap<String, f64>,
    alloc: &EVAllocation,
) -> Result<ECDistribution, ElectoralError> {
    if state_wins.len() > BRUTE_FORCE_MAX_STATES || alloc.len() > BRUTE_FORCE_MAX_STATES {
        return Err(ElectoralError::TooManyStates(
            state_wins.len().max(alloc.len()),
        ));
    }
    let units = check_inputs(state_wins, alloc)?;
    let total: usize = units.iter().map(|&(e, _)| e as usize).sum();
    let mut pmf = vec![0.0; total + 1];
    for subset in 0u32..(1u32 << units.len()) {
        let mut votes = 0usize;
        let mut prob = 1.0;
        for (i, &(e, p)) in units.iter().enumerate() {
            if subset & (1 << i) != 0 {
                votes += e as usize;
                prob *= p;
            } else {
                prob *= 1.0 - p;
            }
        }
        pmf[votes] += prob;
    }
    Ok(ECDistribution { pmf })
}
