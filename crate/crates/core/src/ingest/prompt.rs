use sha2::{Digest, Sha256};

use super::IngestError;

pub const SYSTEM_PROMPT: &str = "You are an impartial election prediction machine. \
Respond with a single integer token between 0 and 100 representing the vote share.";

/// System and user messages for one directional elicitation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptPair {
    pub system_text: String,
    pub user_text: String,
}

impl PromptPair {
    /// First 16 hex digits of SHA-256 over both messages.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.system_text.as_bytes());
        hasher.update([0u8]);
        hasher.update(self.user_text.as_bytes());
        hex::encode(&hasher.finalize()[..8])
    }
}

fn check_field(name: &'static str, value: &str) -> Result<(), IngestError> {
    if value.trim().is_empty() {
        return Err(IngestError::EmptyField(name));
    }
    if value.contains(['{', '}']) {
        return Err(IngestError::InvalidField {
            field: name,
            reason: "braces are not allowed".into(),
        });
    }
    Ok(())
}

pub fn build_prompt(
    candidate: &str,
    opponent: &str,
    year: i32,
    state: &str,
) -> Result<PromptPair, IngestError> {
    check_field("candidate", candidate)?;
    check_field("opponent", opponent)?;
    check_field("state", state)?;
    if !(1000..=9999).contains(&year) {
        return Err(IngestError::InvalidField {
            field: "year",
            reason: format!("{year} is not a 4-digit year"),
        });
    }
    Ok(PromptPair {
        system_text: SYSTEM_PROMPT.to_string(),
        user_text: format!(
            "{candidate} is running against {opponent}, what percentage of the vote will \
             {candidate} win in the {year} presidential election in {state}?"
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn substitutes_all_fields() {
        let p = build_prompt("Kamala Harris", "Donald Trump", 2024, "Iowa").unwrap();
        assert_eq!(
            p.user_text,
            "Kamala Harris is running against Donald Trump, what percentage of the vote will \
             Kamala Harris win in the 2024 presidential election in Iowa?"
        );
        assert_eq!(p.system_text, SYSTEM_PROMPT);
        assert!(!p.system_text.contains('{'));
    }

    #[test]
    fn short_names() {
        let p = build_prompt("A", "B", 2020, "Ohio").unwrap();
        assert!(p.user_text.contains("2020"));
        assert!(p.user_text.contains("Ohio"));
        assert!(!p.user_text.contains('{'));
        assert!(!p.user_text.contains('}'));
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(matches!(
            build_prompt("", "B", 2024, "Iowa"),
            Err(IngestError::EmptyField("candidate"))
        ));
        assert!(matches!(
            build_prompt("A", " ", 2024, "Iowa"),
            Err(IngestError::EmptyField("opponent"))
        ));
        assert!(matches!(
            build_prompt("A", "B", 2024, ""),
            Err(IngestError::EmptyField("state"))
        ));
        assert!(matches!(
            build_prompt("A", "B", 24, "Iowa"),
            Err(IngestError::InvalidField { field: "year", .. })
        ));
        assert!(matches!(
            build_prompt("{x}", "B", 2024, "Iowa"),
            Err(IngestError::InvalidField { field: "candidate", .. })
        ));
    }

    #[test]
    fn fingerprint_is_stable_and_direction_sensitive() {
        let a = build_prompt("A", "B", 2024, "Iowa").unwrap();
        let b = build_prompt("B", "A", 2024, "Iowa").unwrap();
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
        assert_eq!(a.fingerprint().len(), 16);
        assert_ne!(a.fingerprint(), b.fingerprint());
    }
}
