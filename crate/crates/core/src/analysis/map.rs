use std::collections::BTreeMap;

use serde::Serialize;

use super::AnalysisError;
use crate::electoral::EVAllocation;
use crate::pairwise::{win_probability, StateRace};

/// Average-case winner per state: the candidate with the larger weighted mean.
pub fn average_case_map(
    races: &BTreeMap<String, StateRace>,
) -> Result<BTreeMap<String, String>, AnalysisError> {
    let mut winners = BTreeMap::new();
    let mut tied = Vec::new();
    for (state, race) in races {
        let (m1, m2) = (race.c1().weighted_mean(), race.c2().weighted_mean());
        if m1 > m2 {
            winners.insert(state.clone(), race.c1().meta().candidate.clone());
        } else if m2 > m1 {
            winners.insert(state.clone(), race.c2().meta().candidate.clone());
        } else {
            tied.push(state.clone());
        }
    }
    if tied.is_empty() {
        Ok(winners)
    } else {
        Err(AnalysisError::ExactMeanTie(tied))
    }
}

const C2_RGB: [f64; 3] = [178.0, 24.0, 43.0];
const C1_RGB: [f64; 3] = [33.0, 102.0, 172.0];

/// Hex colour sliding from red (`p = 0`) to blue (`p = 1`).
pub fn state_color(p_c1_wins: f64) -> String {
    let p = p_c1_wins.clamp(0.0, 1.0);
    let [r, g, b] = [0, 1, 2].map(|i| (C2_RGB[i] + (C1_RGB[i] - C2_RGB[i]) * p).round() as u8);
    format!("#{r:02x}{g:02x}{b:02x}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapRow {
    pub state: String,
    pub electoral_votes: Option<u32>,
    pub mean_c1: f64,
    pub mean_c2: f64,
    pub winner: String,
    pub p_c1_wins: f64,
    pub tie_mass: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapReport {
    pub c1: String,
    pub c2: String,
    pub year: i32,
    pub rows: Vec<MapRow>,
    /// Electoral votes carried in the average case, when an allocation is given.
    pub ev_c1: Option<u32>,
    pub ev_c2: Option<u32>,
}

/// Average-case map plus tie-excluded win probabilities and colours.
pub fn map_report(
    races: &BTreeMap<String, StateRace>,
    alloc: Option<&EVAllocation>,
) -> Result<MapReport, AnalysisError> {
    let first = races
        .values()
        .next()
        .ok_or_else(|| AnalysisError::InvalidArgument("no races to map".into()))?;
    let c1 = first.c1().meta().candidate.clone();
    let c2 = first.c2().meta().candidate.clone();
    let year = first.c1().meta().year;
    if let Some(odd) = races
        .values()
        .find(|r| r.c1().meta().candidate != c1 || r.c1().meta().opponent != c2 || r.c1().meta().year != year)
    {
        return Err(AnalysisError::InvalidArgument(format!(
            "{} mixes matchups: {} vs {} ({})",
            odd.state(),
            odd.c1().meta().candidate,
            odd.c1().meta().opponent,
            odd.c1().meta().year
        )));
    }
    let winners = average_case_map(races)?;
    let mut rows = Vec::with_capacity(races.len());
    let (mut ev_c1, mut ev_c2) = (0u32, 0u32);
    for (state, race) in races {
        let w = win_probability(race)?;
        let ev = alloc.and_then(|a| a.get(state));
        let winner = winners[state].clone();
        if let Some(e) = ev {
            if winner == c1 {
                ev_c1 += e;
            } else {
                ev_c2 += e;
            }
        }
        rows.push(MapRow {
            state: state.clone(),
            electoral_votes: ev,
            mean_c1: race.c1().weighted_mean(),
            mean_c2: race.c2().weighted_mean(),
            winner,
            p_c1_wins: w.p_c1_wins,
            tie_mass: w.raw_tie_mass,
            color: state_color(w.p_c1_wins),
        });
    }
    Ok(MapReport {
        c1,
        c2,
        year,
        rows,
        ev_c1: alloc.map(|_| ev_c1),
        ev_c2: alloc.map(|_| ev_c2),
    })
}
