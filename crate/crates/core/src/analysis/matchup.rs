use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::AnalysisError;
use crate::electoral::{ec_distribution, EVAllocation};
use crate::ingest::{fetch_cells, CellKey, CellSource};
use crate::pairwise::{win_probability, StateRace};
use crate::share_dist::ShareDistribution;

/// Which electoral-vote table to use for each simulated year.
#[derive(Debug, Clone, Default)]
pub enum AllocationPlan {
    /// Bundled apportionment in force for the year.
    #[default]
    ByYear,
    Fixed(EVAllocation),
}

impl AllocationPlan {
    pub fn for_year(&self, year: i32) -> EVAllocation {
        match self {
            AllocationPlan::ByYear => EVAllocation::for_year(year),
            AllocationPlan::Fixed(a) => a.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MatchupOptions {
    pub allocation: AllocationPlan,
    /// Votes needed to win; the allocation's majority when `None`.
    pub threshold: Option<u32>,
    /// Maximum concurrent cell lookups.
    pub parallel: usize,
}

impl Default for MatchupOptions {
    fn default() -> Self {
        MatchupOptions {
            allocation: AllocationPlan::ByYear,
            threshold: None,
            parallel: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchupCell {
    pub c1: String,
    pub c2: String,
    pub expected_ev_c1: f64,
    pub win_prob_c1: f64,
    /// Exact electoral tie; `None` for an odd total.
    pub tie_prob: Option<f64>,
    pub loss_prob_c1: f64,
    pub e_total: u32,
    pub threshold: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchupGrid {
    pub year: i32,
    /// c1 side.
    pub rows: Vec<String>,
    /// c2 side.
    pub cols: Vec<String>,
    /// Row-major, one per (row, col).
    pub cells: Vec<MatchupCell>,
}

impl MatchupGrid {
    pub fn get(&self, row: &str, col: &str) -> Option<&MatchupCell> {
        self.cells.iter().find(|c| c.c1 == row && c.c2 == col)
    }
}

/// Tie-excluded c1 win probability per state.
pub fn state_win_probabilities(
    races: &BTreeMap<String, StateRace>,
) -> Result<BTreeMap<String, f64>, AnalysisError> {
    races
        .iter()
        .map(|(state, race)| Ok((state.clone(), win_probability(race)?.p_c1_wins)))
        .collect()
}

/// Every directional cell a matchup run needs, in a fixed order.
pub fn matchup_keys(
    c1_side: &[String],
    c2_side: &[String],
    years: &[i32],
    plan: &AllocationPlan,
) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &year in years {
        let alloc = plan.for_year(year);
        for c1 in c1_side {
            for c2 in c2_side {
                for state in alloc.states() {
                    keys.push(CellKey::new(state, c1, c2, year));
                    keys.push(CellKey::new(state, c2, c1, year));
                }
            }
        }
    }
    keys
}

fn check_sides(c1_side: &[String], c2_side: &[String], years: &[i32]) -> Result<(), AnalysisError> {
    if c1_side.is_empty() || c2_side.is_empty() || years.is_empty() {
        return Err(AnalysisError::InvalidArgument(
            "matchups need at least one candidate per side and one year".into(),
        ));
    }
    if let Some(both) = c1_side.iter().find(|c| c2_side.contains(c)) {
        return Err(AnalysisError::InvalidArgument(format!(
            "{both} appears on both sides"
        )));
    }
    Ok(())
}

fn simulate(
    cells: &HashMap<CellKey, ShareDistribution>,
    alloc: &EVAllocation,
    c1: &str,
    c2: &str,
    year: i32,
    threshold: Option<u32>,
) -> Result<MatchupCell, AnalysisError> {
    let mut races = BTreeMap::new();
    for state in alloc.states() {
        let a = cells[&CellKey::new(state, c1, c2, year)].clone();
        let b = cells[&CellKey::new(state, c2, c1, year)].clone();
        races.insert(state.to_string(), StateRace::new(a, b)?);
    }
    let wins = state_win_probabilities(&races)?;
    let dist = ec_distribution(&wins, alloc)?;
    let threshold = threshold.unwrap_or_else(|| alloc.majority());
    Ok(MatchupCell {
        c1: c1.to_string(),
        c2: c2.to_string(),
        expected_ev_c1: dist.expected_votes(),
        win_prob_c1: dist.win_chance(threshold)?,
        tie_prob: dist.exact_tie_probability().ok(),
        loss_prob_c1: dist.loss_chance(threshold)?,
        e_total: dist.e_total(),
        threshold,
    })
}

/// Simulates every (c1, c2) pairing in every year.
///
/// All cells are resolved up front through `source`, with at most
/// `opts.parallel` lookups in flight; any failures are returned together.
pub fn run_matchups(
    source: &dyn CellSource,
    c1_side: &[String],
    c2_side: &[String],
    years: &[i32],
    opts: &MatchupOptions,
) -> Result<Vec<MatchupGrid>, AnalysisError> {
    check_sides(c1_side, c2_side, years)?;
    let keys = matchup_keys(c1_side, c2_side, years, &opts.allocation);
    let mut cells = HashMap::with_capacity(keys.len());
    let mut failures = Vec::new();
    for (key, result) in keys.iter().zip(fetch_cells(source, &keys, opts.parallel)) {
        match result {
            Ok(cell) => {
                cells.insert(key.clone(), cell);
            }
            Err(e) => failures.push(e),
        }
    }
    if !failures.is_empty() {
        return Err(AnalysisError::Fetch(failures));
    }

    let mut grids = Vec::with_capacity(years.len());
    for &year in years {
        let alloc = opts.allocation.for_year(year);
        let mut grid_cells = Vec::with_capacity(c1_side.len() * c2_side.len());
        for c1 in c1_side {
            for c2 in c2_side {
                let cell = simulate(&cells, &alloc, c1, c2, year, opts.threshold).map_err(|e| {
                    AnalysisError::Matchup {
                        year,
                        c1: c1.clone(),
                        c2: c2.clone(),
                        source: Box::new(e),
                    }
                })?;
                grid_cells.push(cell);
            }
        }
        grids.push(MatchupGrid {
            year,
            rows: c1_side.to_vec(),
            cols: c2_side.to_vec(),
            cells: grid_cells,
        });
    }
    Ok(grids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::CellStore;
    use crate::share_dist::CellMeta;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn sweep_store(c1: &str, c2: &str, year: i32, alloc: &EVAllocation) -> CellStore {
        let mut cells = Vec::new();
        for state in alloc.states() {
            for (cand, opp, share) in [(c1, c2, 60), (c2, c1, 40)] {
                cells.push(
                    ShareDistribution::point(
                        share,
                        1.0,
                        CellMeta {
                            state: state.into(),
                            candidate: cand.into(),
                            opponent: opp.into(),
                            year,
                            model: "m".into(),
                            prompt_fingerprint: String::new(),
                        },
                    )
                    .unwrap(),
                );
            }
        }
        CellStore::from_cells(cells).unwrap()
    }

    #[test]
    fn certain_sweep_cell() {
        let alloc = EVAllocation::bundled_2024();
        let store = sweep_store("D", "R", 2024, &alloc);
        let grids = run_matchups(&store, &names(&["D"]), &names(&["R"]), &[2024], &MatchupOptions::default()).unwrap();
        let cell = grids[0].get("D", "R").unwrap();
        assert_eq!(cell.win_prob_c1, 1.0);
        assert_eq!(cell.expected_ev_c1, 538.0);
        assert_eq!(cell.tie_prob, Some(0.0));
        assert_eq!(cell.loss_prob_c1, 0.0);
        assert_eq!(cell.threshold, 270);
    }

    #[test]
    fn grid_cardinality() {
        let rows = names(&["D1", "D2", "D3", "D4", "D5"]);
        let cols = names(&["R1", "R2", "R3", "R4", "R5"]);
        let keys = matchup_keys(&rows, &cols, &[2016, 2020, 2024], &AllocationPlan::ByYear);
        assert_eq!(keys.len(), 7650);
    }

    #[test]
    fn missing_cells_are_all_listed() {
        let store = CellStore::new();
        match run_matchups(&store, &names(&["D"]), &names(&["R"]), &[2024], &MatchupOptions::default()) {
            Err(AnalysisError::Fetch(errors)) => assert_eq!(errors.len(), 102),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_sides() {
        let store = CellStore::new();
        let opts = MatchupOptions::default();
        assert!(matches!(
            run_matchups(&store, &[], &names(&["R"]), &[2024], &opts),
            Err(AnalysisError::InvalidArgument(_))
        ));
        assert!(matches!(
            run_matchups(&store, &names(&["X"]), &names(&["X"]), &[2024], &opts),
            Err(AnalysisError::InvalidArgument(_))
        ));
    }
}
