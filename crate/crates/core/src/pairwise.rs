//! Tie-excluded win probabilities for a two-candidate state race.

use thiserror::Error;

use crate::share_dist::{ShareDistribution, SUPPORT_LEN};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RaceError {
    #[error("race distributions disagree: {0}")]
    Mismatch(String),
    #[error("every outcome in {state} is a tie; win probabilities are undefined")]
    AllTies { state: String },
}

/// The two candidates' share distributions for one state and year.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRace {
    c1: ShareDistribution,
    c2: ShareDistribution,
}

impl StateRace {
    pub fn new(c1: ShareDistribution, c2: ShareDistribution) -> Result<Self, RaceError> {
        let (m1, m2) = (c1.meta(), c2.meta());
        if m1.state != m2.state {
            return Err(RaceError::Mismatch(format!(
                "states {:?} and {:?}",
                m1.state, m2.state
            )));
        }
        if m1.year != m2.year {
            return Err(RaceError::Mismatch(format!(
                "years {} and {} in {}",
                m1.year, m2.year, m1.state
            )));
        }
        if m1.candidate != m2.opponent || m2.candidate != m1.opponent {
            return Err(RaceError::Mismatch(format!(
                "{} vs {} does not mirror {} vs {} in {}",
                m1.candidate, m1.opponent, m2.candidate, m2.opponent, m1.state
            )));
        }
        Ok(StateRace { c1, c2 })
    }

    pub fn c1(&self) -> &ShareDistribution {
        &self.c1
    }

    pub fn c2(&self) -> &ShareDistribution {
        &self.c2
    }

    pub fn state(&self) -> &str {
        &self.c1.meta().state
    }

    pub fn swapped(&self) -> StateRace {
        StateRace {
            c1: self.c2.clone(),
            c2: self.c1.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WinProbabilities {
    pub p_c1_wins: f64,
    pub p_c2_wins: f64,
    /// Probability both candidates land on the same integer share.
    pub raw_tie_mass: f64,
    /// `P(y1 > y2)` before tie exclusion.
    pub raw_c1: f64,
    /// `P(y2 > y1)` before tie exclusion.
    pub raw_c2: f64,
}

/// `Σ_y a(y) · P_b(y' < y)`, the probability a strictly beats b.
fn strictly_beats(a: &ShareDistribution, b: &ShareDistribution) -> f64 {
    let b_dense = b.to_dense();
    let mut below = [0.0; SUPPORT_LEN];
    let mut running = 0.0;
    for (share, slot) in below.iter_mut().enumerate() {
        *slot = running;
        running += b_dense[share];
    }
    a.masses()
        .iter()
        .map(|(&share, &mass)| mass * below[share as usize])
        .sum()
}

/// `Σ_y P_c1(y)·P_c2(y)`.
pub fn tie_probability(race: &StateRace) -> f64 {
    race.c1
        .masses()
        .iter()
        .map(|(&share, &mass)| mass * race.c2.prob(share))
        .sum()
}

/// Win probabilities for both candidates, conditioned on the shares differing.
pub fn win_probability(race: &StateRace) -> Result<WinProbabilities, RaceError> {
    let raw_c1 = strictly_beats(&race.c1, &race.c2);
    let raw_c2 = strictly_beats(&race.c2, &race.c1);
    let raw_tie_mass = tie_probability(race);
    let decided = raw_c1 + raw_c2;
    if decided <= 0.0 {
        return Err(RaceError::AllTies {
            state: race.state().to_string(),
        });
    }
    Ok(WinProbabilities {
        p_c1_wins: raw_c1 / decided,
        p_c2_wins: raw_c2 / decided,
        raw_tie_mass,
        raw_c1,
        raw_c2,
    })
}
