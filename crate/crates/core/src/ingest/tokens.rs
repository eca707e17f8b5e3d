use std::time::SystemTime;

use super::IngestError;
use crate::share_dist::{CellMeta, ShareDistribution, MAX_SHARE};

/// Slack allowed on the listed probabilities summing past 1.
const RAW_SUM_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct TokenProb {
    pub token: String,
    pub probability: f64,
}

/// Top-k first-position token probabilities as returned by the endpoint.
///
/// The listed probabilities may sum to less than one because of top-k
/// truncation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTokenDistribution {
    entries: Vec<TokenProb>,
    model: String,
    retrieved_at: SystemTime,
}

impl RawTokenDistribution {
    pub fn new(
        entries: Vec<TokenProb>,
        model: impl Into<String>,
        retrieved_at: SystemTime,
    ) -> Result<Self, IngestError> {
        for e in &entries {
            if !(0.0..=1.0).contains(&e.probability) {
                return Err(IngestError::InvalidRaw(format!(
                    "token {:?} has probability {}",
                    e.token, e.probability
                )));
            }
        }
        let total: f64 = entries.iter().map(|e| e.probability).sum();
        if total > 1.0 + RAW_SUM_SLACK {
            return Err(IngestError::InvalidRaw(format!(
                "listed probabilities sum to {total}"
            )));
        }
        Ok(RawTokenDistribution {
            entries,
            model: model.into(),
            retrieved_at,
        })
    }

    /// Convenience constructor from `(token, probability)` pairs.
    pub fn from_pairs<S: Into<String>>(
        pairs: impl IntoIterator<Item = (S, f64)>,
        model: impl Into<String>,
    ) -> Result<Self, IngestError> {
        let entries = pairs
            .into_iter()
            .map(|(token, probability)| TokenProb {
                token: token.into(),
                probability,
            })
            .collect();
        Self::new(entries, model, SystemTime::now())
    }

    pub fn entries(&self) -> &[TokenProb] {
        &self.entries
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn retrieved_at(&self) -> SystemTime {
        self.retrieved_at
    }
}

/// Parses a token as a vote share.
///
/// After trimming surrounding whitespace the token must be a non-empty run of
/// ASCII digits whose value lies in `0..=100`. Signs, decimal points and any
/// other characters make the token nonconforming.
pub fn parse_share(token: &str) -> Option<u8> {
    let digits = token.trim();
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    // long zero-padded spellings still parse; anything over 3 significant digits is out of range
    let significant = digits.trim_start_matches('0');
    if significant.len() > 3 {
        return None;
    }
    let value: u32 = if significant.is_empty() {
        0
    } else {
        significant.parse().ok()?
    };
    (value <= MAX_SHARE).then_some(value as u8)
}

/// Converts top-k token probabilities into a normalized share distribution.
///
/// `conforming_mass` is the absolute probability carried by conforming
/// tokens, so mass lost to top-k truncation counts as nonconforming.
pub fn tokens_to_shares(
    raw: &RawTokenDistribution,
    meta: CellMeta,
) -> Result<ShareDistribution, IngestError> {
    let conforming: Vec<(i64, f64)> = raw
        .entries
        .iter()
        .filter_map(|e| parse_share(&e.token).map(|s| (s as i64, e.probability)))
        .collect();
    let conforming_mass: f64 = conforming.iter().map(|&(_, p)| p).sum();
    if conforming_mass <= 0.0 {
        return Err(IngestError::NoConformingTokens);
    }
    Ok(ShareDistribution::new(
        conforming,
        conforming_mass.min(1.0),
        meta,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn meta() -> CellMeta {
        CellMeta {
            state: "Iowa".into(),
            candidate: "A".into(),
            opponent: "B".into(),
            year: 2024,
            model: "m".into(),
            prompt_fingerprint: "f".into(),
        }
    }

    fn raw(pairs: &[(&str, f64)]) -> RawTokenDistribution {
        RawTokenDistribution::from_pairs(pairs.iter().copied(), "m").unwrap()
    }

    #[test]
    fn parse_share_rules() {
        assert_eq!(parse_share("52"), Some(52));
        assert_eq!(parse_share(" 47"), Some(47));
        assert_eq!(parse_share("47\n"), Some(47));
        assert_eq!(parse_share("0"), Some(0));
        assert_eq!(parse_share("100"), Some(100));
        assert_eq!(parse_share("007"), Some(7));
        assert_eq!(parse_share("0000000000100"), Some(100));
        assert_eq!(parse_share("101"), None);
        assert_eq!(parse_share("99999999999999999999"), None);
        assert_eq!(parse_share("+5"), None);
        assert_eq!(parse_share("-5"), None);
        assert_eq!(parse_share("5.0"), None);
        assert_eq!(parse_share("5%"), None);
        assert_eq!(parse_share("4 7"), None);
        assert_eq!(parse_share(""), None);
        assert_eq!(parse_share("  "), None);
        assert_eq!(parse_share("٥"), None);
    }

    #[test]
    fn mixed_tokens() {
        let d = tokens_to_shares(&raw(&[("52", 0.7), ("53", 0.2), ("banana", 0.05)]), meta()).unwrap();
        assert!((d.conforming_mass() - 0.9).abs() < 1e-15);
        assert!((d.prob(52) - 7.0 / 9.0).abs() < 1e-15);
        assert!((d.prob(53) - 2.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn whitespace_variants_merge() {
        let d = tokens_to_shares(&raw(&[(" 47", 0.4), ("47", 0.4)]), meta()).unwrap();
        assert!((d.conforming_mass() - 0.8).abs() < 1e-15);
        assert_eq!(d.masses().len(), 1);
        assert_eq!(d.prob(47), 1.0);
    }

    #[test]
    fn nothing_conforms() {
        assert!(matches!(
            tokens_to_shares(&raw(&[("x", 0.3), ("y", 0.1)]), meta()),
            Err(IngestError::NoConformingTokens)
        ));
        assert!(matches!(
            tokens_to_shares(&raw(&[("50", 0.0)]), meta()),
            Err(IngestError::NoConformingTokens)
        ));
        assert!(matches!(
            tokens_to_shares(&raw(&[]), meta()),
            Err(IngestError::NoConformingTokens)
        ));
    }

    #[test]
    fn raw_validation() {
        assert!(RawTokenDistribution::from_pairs([("1", 1.2)], "m").is_err());
        assert!(RawTokenDistribution::from_pairs([("1", -0.1)], "m").is_err());
        assert!(RawTokenDistribution::from_pairs([("1", 0.6), ("2", 0.6)], "m").is_err());
        assert!(RawTokenDistribution::from_pairs([("1", 0.5), ("2", 0.5 + 1e-7)], "m").is_ok());
    }

    fn entries() -> impl Strategy<Value = Vec<(String, f64)>> {
        let token = prop_oneof![
            (0u32..=120).prop_map(|n| n.to_string()),
            (0u32..=100).prop_map(|n| format!(" {n}")),
            "[a-z]{1,4}",
        ];
        prop::collection::vec((token, 0.0f64..1.0), 0..12).prop_map(|v| {
            let total: f64 = v.iter().map(|(_, p)| p).sum();
            let scale = if total > 1.0 { 1.0 / total } else { 1.0 };
            v.into_iter().map(|(t, p)| (t, p * scale * 0.999)).collect()
        })
    }

    proptest! {
        #[test]
        fn support_stays_in_range(v in entries()) {
            let r = RawTokenDistribution::from_pairs(v, "m").unwrap();
            if let Ok(d) = tokens_to_shares(&r, meta()) {
                prop_assert!(d.masses().keys().all(|&s| s <= 100));
            }
        }

        #[test]
        fn entry_order_is_irrelevant(v in entries(), seed in any::<u64>()) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = v.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = tokens_to_shares(&RawTokenDistribution::from_pairs(v, "m").unwrap(), meta());
            let b = tokens_to_shares(&RawTokenDistribution::from_pairs(shuffled, "m").unwrap(), meta());
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    prop_assert!((a.conforming_mass() - b.conforming_mass()).abs() <= 1e-12);
                    prop_assert_eq!(a.masses().len(), b.masses().len());
                    for (s, m) in a.masses() {
                        prop_assert!((m - b.prob(*s)).abs() <= 1e-12);
                    }
                }
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "conformance differs under permutation"),
            }
        }

        #[test]
        fn removing_conforming_entry_never_raises_mass(v in entries(), pick in any::<prop::sample::Index>()) {
            let full = RawTokenDistribution::from_pairs(v.clone(), "m").unwrap();
            let conforming: Vec<usize> = v.iter().enumerate()
                .filter(|(_, (t, _))| parse_share(t).is_some())
                .map(|(i, _)| i)
                .collect();
            prop_assume!(!conforming.is_empty());
            let drop = conforming[pick.index(conforming.len())];
            let mut reduced = v.clone();
            reduced.remove(drop);
            let before = tokens_to_shares(&full, meta()).map(|d| d.conforming_mass()).unwrap_or(0.0);
            let reduced = RawTokenDistribution::from_pairs(reduced, "m").unwrap();
            let after = tokens_to_shares(&reduced, meta()).map(|d| d.conforming_mass()).unwrap_or(0.0);
            prop_assert!(after <= before + 1e-15);
        }
    }
}
