//! Discrete vote-share distributions.
//!
//! A [`ShareDistribution`] is a probability mass function over integer vote
//! shares `0..=100` for one (state, candidate, year) cell. Storage is sparse:
//! only shares with positive mass are kept, so two distributions with the
//! same support and masses compare equal.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest representable vote share, in percent.
pub const MAX_SHARE: u32 = 100;

/// Number of points in the share support `0..=100`.
pub const SUPPORT_LEN: usize = MAX_SHARE as usize + 1;

/// Tolerance on the total mass of a stored distribution.
pub const STORED_SUM_TOLERANCE: f64 = 1e-9;

/// Tolerance on a freshly normalized sum.
pub const FRESH_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShareError {
    #[error("distribution has no positive mass")]
    EmptyDistribution,
    #[error("share {0} is outside 0..=100")]
    ShareOutOfRange(i64),
    #[error("share {share} has negative mass {mass}")]
    NegativeMass { share: i64, mass: f64 },
    #[error("share {share} has non-finite mass")]
    NonFiniteMass { share: i64 },
    #[error("conforming mass {0} is outside [0, 1]")]
    ConformingMassOutOfRange(f64),
    #[error("share {0} is stored with an explicit zero mass")]
    ZeroMassEntry(u8),
    #[error("masses sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("invalid cell metadata: {0}")]
    InvalidMeta(String),
}

/// Identifies which (state, candidate, year) cell a distribution belongs to,
/// and how it was elicited.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellMeta {
    pub state: String,
    pub candidate: String,
    pub opponent: String,
    pub year: i32,
    pub model: String,
    pub prompt_fingerprint: String,
}

impl CellMeta {
    pub fn validate(&self) -> Result<(), ShareError> {
        if self.state.trim().is_empty() {
            return Err(ShareError::InvalidMeta("state is empty".into()));
        }
        if self.candidate.trim().is_empty() || self.opponent.trim().is_empty() {
            return Err(ShareError::InvalidMeta("candidate or opponent is empty".into()));
        }
        if self.candidate == self.opponent {
            return Err(ShareError::InvalidMeta(format!(
                "candidate and opponent are both {:?}",
                self.candidate
            )));
        }
        if !(1000..=9999).contains(&self.year) {
            return Err(ShareError::InvalidMeta(format!(
                "year {} is not a 4-digit year",
                self.year
            )));
        }
        Ok(())
    }
}

/// Normalized probability mass over integer vote shares, plus the fraction
/// of the original model probability that conformed to the share format.
#[derive(Debug, Clone, PartialEq)]
pub struct ShareDistribution {
    masses: BTreeMap<u8, f64>,
    conforming_mass: f64,
    meta: CellMeta,
}

fn check_conforming(conforming_mass: f64) -> Result<(), ShareError> {
    if !(0.0..=1.0).contains(&conforming_mass) {
        return Err(ShareError::ConformingMassOutOfRange(conforming_mass));
    }
    Ok(())
}

fn check_entry(share: i64, mass: f64) -> Result<u8, ShareError> {
    if !(0..=MAX_SHARE as i64).contains(&share) {
        return Err(ShareError::ShareOutOfRange(share));
    }
    if !mass.is_finite() {
        return Err(ShareError::NonFiniteMass { share });
    }
    if mass < 0.0 {
        return Err(ShareError::NegativeMass { share, mass });
    }
    Ok(share as u8)
}

impl ShareDistribution {
    /// Normalizes non-negative raw masses to total 1.
    ///
    /// Repeated shares in `raw_masses` are summed. Zero masses are dropped.
    /// `conforming_mass` is stored unmodified.
    pub fn new<I>(raw_masses: I, conforming_mass: f64, meta: CellMeta) -> Result<Self, ShareError>
    where
        I: IntoIterator<Item = (i64, f64)>,
    {
        check_conforming(conforming_mass)?;
        meta.validate()?;

        let mut acc: BTreeMap<u8, f64> = BTreeMap::new();
        for (share, mass) in raw_masses {
            let share = check_entry(share, mass)?;
            if mass > 0.0 {
                *acc.entry(share).or_insert(0.0) += mass;
            }
        }
        let total: f64 = acc.values().sum();
        if acc.is_empty() || total <= 0.0 {
            return Err(ShareError::EmptyDistribution);
        }
        for mass in acc.values_mut() {
            *mass /= total;
        }
        acc.retain(|_, m| *m > 0.0);
        if acc.is_empty() {
            return Err(ShareError::EmptyDistribution);
        }

        Ok(ShareDistribution {
            masses: acc,
            conforming_mass,
            meta,
        })
    }

    /// Wraps already-normalized masses without rescaling them.
    ///
    /// Used when loading persisted cells so that values survive bit for bit.
    pub fn from_normalized(
        masses: BTreeMap<u8, f64>,
        conforming_mass: f64,
        meta: CellMeta,
    ) -> Result<Self, ShareError> {
        check_conforming(conforming_mass)?;
        meta.validate()?;
        for (&share, &mass) in &masses {
            check_entry(share as i64, mass)?;
            if mass == 0.0 {
                return Err(ShareError::ZeroMassEntry(share));
            }
        }
        if masses.is_empty() {
            return Err(ShareError::EmptyDistribution);
        }
        let total: f64 = masses.values().sum();
        if (total - 1.0).abs() > STORED_SUM_TOLERANCE {
            return Err(ShareError::NotNormalized(total));
        }
        Ok(ShareDistribution {
            masses,
            conforming_mass,
            meta,
        })
    }

    /// A point mass at `share`.
    pub fn point(share: u8, conforming_mass: f64, meta: CellMeta) -> Result<Self, ShareError> {
        Self::new([(share as i64, 1.0)], conforming_mass, meta)
    }

    pub fn masses(&self) -> &BTreeMap<u8, f64> {
        &self.masses
    }

    pub fn conforming_mass(&self) -> f64 {
        self.conforming_mass
    }

    pub fn meta(&self) -> &CellMeta {
        &self.meta
    }

    /// Probability of exactly `share` percent.
    pub fn prob(&self, share: u8) -> f64 {
        self.masses.get(&share).copied().unwrap_or(0.0)
    }

    /// Dense view indexed by share.
    pub fn to_dense(&self) -> [f64; SUPPORT_LEN] {
        let mut dense = [0.0; SUPPORT_LEN];
        for (&share, &mass) in &self.masses {
            dense[share as usize] = mass;
        }
        dense
    }

    /// Expected vote share, `Σ y·P(y)`.
    pub fn weighted_mean(&self) -> f64 {
        self.masses
            .iter()
            .map(|(&share, &mass)| share as f64 * mass)
            .sum()
    }

    /// `Σ_{y < threshold} P(y)` for `threshold` in `0..=100`.
    pub fn cdf_below(&self, threshold: u32) -> Result<f64, ShareError> {
        if threshold > MAX_SHARE {
            return Err(ShareError::ShareOutOfRange(threshold as i64));
        }
        Ok(self
            .masses
            .range(..threshold as u8)
            .map(|(_, &mass)| mass)
            .sum())
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.values().sum()
    }

    /// Same distribution relabelled with new metadata.
    pub fn with_meta(mut self, meta: CellMeta) -> Result<Self, ShareError> {
        meta.validate()?;
        self.meta = meta;
        Ok(self)
    }
}
