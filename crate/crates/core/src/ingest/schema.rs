use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{IngestError, RecipientKind};

/// Where a field lives in a delimited row.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Header(String),
}

/// Layout of one family of delimited input files.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IngestSchema {
    #[serde(default)]
    pub pattern: Option<String>,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_decimal")]
    pub decimal_separator: char,
    #[serde(default)]
    pub thousands_separator: Option<char>,
    #[serde(default = "default_encoding")]
    pub encoding: String,
    #[serde(default)]
    pub quote: Option<char>,
    #[serde(default = "default_true")]
    pub has_header: bool,
    #[serde(default)]
    pub null_tokens: Vec<String>,
    #[serde(default)]
    pub recipient_kind: Option<RecipientKind>,
    #[serde(default)]
    pub elected_values: Vec<String>,
    pub columns: BTreeMap<String, ColumnRef>,
    #[serde(default)]
    pub defaults: BTreeMap<String, String>,
}

fn default_delimiter() -> char {
    ';'
}
fn default_decimal() -> char {
    ','
}
fn default_encoding() -> String {
    "windows-1252".into()
}
fn default_true() -> bool {
    true
}

pub const DONATION_FIELDS: &[&str] = &[
    "amount",
    "donor_id",
    "donor_cpf",
    "donor_cnpj",
    "original_donor_id",
    "recipient_id",
    "recipient_kind",
    "party",
    "federal_unit",
    "office",
];

pub const OUTCOME_FIELDS: &[&str] = &["candidate_id", "federal_unit", "office", "situation"];

/// The donation and outcome layouts for a whole data directory.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaSet {
    #[serde(default)]
    pub donations: Vec<IngestSchema>,
    #[serde(default)]
    pub outcomes: Vec<IngestSchema>,
}

/// Built-in layout for the 2014 TSE exports.
pub const TSE_2014_SCHEMA: &str = include_str!("../../schemas/tse2014.toml");

impl SchemaSet {
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        let set: SchemaSet =
            toml::from_str(text).map_err(|e| IngestError::Schema(e.to_string()))?;
        for s in &set.donations {
            s.validate_for_donations()?;
        }
        for s in &set.outcomes {
            s.validate_for_outcomes()?;
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn tse2014() -> Self {
        Self::parse(TSE_2014_SCHEMA).expect("bundled schema is valid")
    }

    /// First donation schema whose pattern matches `file_name`.
    pub fn donation_schema_for(&self, file_name: &str) -> Option<&IngestSchema> {
        self.donations.iter().find(|s| s.matches(file_name))
    }

    pub fn outcome_schema_for(&self, file_name: &str) -> Option<&IngestSchema> {
        self.outcomes.iter().find(|s| s.matches(file_name))
    }
}

impl IngestSchema {
    pub fn matches(&self, file_name: &str) -> bool {
        match &self.pattern {
            Some(p) => glob::Pattern::new(p)
                .map(|pat| pat.matches(file_name))
                .unwrap_or(false),
            None => false,
        }
    }

    fn validate_common(&self, allowed: &[&str]) -> Result<(), IngestError> {
        for c in [self.delimiter, self.decimal_separator] {
            if !c.is_ascii() {
                return Err(IngestError::Schema(format!(
                    "separator {c:?} must be ASCII"
                )));
            }
        }
        if let Some(q) = self.quote {
            if !q.is_ascii() {
                return Err(IngestError::Schema(format!("quote {q:?} must be ASCII")));
            }
        }
        if self.delimiter == self.decimal_separator {
            return Err(IngestError::Schema(
                "delimiter and decimal separator coincide".into(),
            ));
        }
        if encoding_rs::Encoding::for_label(self.encoding.as_bytes()).is_none() {
            return Err(IngestError::Schema(format!(
                "unknown encoding {:?}",
                self.encoding
            )));
        }
        if let Some(p) = &self.pattern {
            glob::Pattern::new(p)
                .map_err(|e| IngestError::Schema(format!("pattern {p:?}: {e}")))?;
        }
        for key in self.columns.keys().chain(self.defaults.keys()) {
            if !allowed.contains(&key.as_str()) {
                return Err(IngestError::Schema(format!("unknown field {key:?}")));
            }
        }
        let mut seen: Vec<&ColumnRef> = Vec::new();
        for col in self.columns.values() {
            let dup = seen.iter().any(|s| match (s, col) {
                (ColumnRef::Index(a), ColumnRef::Index(b)) => a == b,
                (ColumnRef::Header(a), ColumnRef::Header(b)) => {
                    normalize_header(a) == normalize_header(b)
                }
                _ => false,
            });
            if dup {
                return Err(IngestError::Schema(format!("column {col:?} mapped twice")));
            }
            seen.push(col);
        }
        let by_header = self
            .columns
            .values()
            .any(|c| matches!(c, ColumnRef::Header(_)));
        if by_header && !self.has_header {
            return Err(IngestError::Schema(
                "header names used but has_header = false".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_for_donations(&self) -> Result<(), IngestError> {
        self.validate_common(DONATION_FIELDS)?;
        for required in ["amount", "recipient_id"] {
            if !self.columns.contains_key(required) {
                return Err(IngestError::Schema(format!(
                    "donation schema lacks {required:?}"
                )));
            }
        }
        if !["donor_id", "donor_cpf", "donor_cnpj"]
            .iter()
            .any(|k| self.columns.contains_key(*k))
        {
            return Err(IngestError::Schema(
                "donation schema maps no donor identifier (donor_id, donor_cpf or donor_cnpj)"
                    .into(),
            ));
        }
        if self.recipient_kind.is_none() && !self.columns.contains_key("recipient_kind") {
            return Err(IngestError::Schema(
                "recipient kind neither fixed nor mapped".into(),
            ));
        }
        Ok(())
    }

    pub fn validate_for_outcomes(&self) -> Result<(), IngestError> {
        self.validate_common(OUTCOME_FIELDS)?;
        for required in ["candidate_id", "situation"] {
            if !self.columns.contains_key(required) {
                return Err(IngestError::Schema(format!(
                    "outcome schema lacks {required:?}"
                )));
            }
        }
        if self.elected_values.is_empty() {
            return Err(IngestError::Schema(
                "outcome schema lists no elected_values".into(),
            ));
        }
        Ok(())
    }

    pub fn is_null(&self, value: &str) -> bool {
        let v = value.trim();
        self.null_tokens.iter().any(|t| t.trim() == v)
    }
}

/// Case-insensitive header key with whitespace runs collapsed.
pub fn normalize_header(h: &str) -> String {
    h.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_uppercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_schema_parses() {
        let set = SchemaSet::tse2014();
        assert_eq!(set.donations.len(), 3);
        assert_eq!(set.outcomes.len(), 1);
        let s = set
            .donation_schema_for("receitas_candidatos_2014_AC.txt")
            .unwrap();
        assert_eq!(s.recipient_kind, Some(RecipientKind::Candidate));
        assert_eq!(s.delimiter, ';');
        assert_eq!(s.decimal_separator, ',');
        assert!(set
            .donation_schema_for("despesas_candidatos_2014_AC.txt")
            .is_none());
        assert!(set.outcome_schema_for("resultados_2014_RS.csv").is_some());
    }

    #[test]
    fn rejects_duplicate_columns() {
        let text = r#"
            [[donations]]
            recipient_kind = "party"
            [donations.columns]
            amount = 3
            donor_id = 3
            recipient_id = 1
        "#;
        assert!(matches!(
            SchemaSet::parse(text),
            Err(IngestError::Schema(_))
        ));
    }

    #[test]
    fn rejects_missing_donor_identifier() {
        let text = r#"
            [[donations]]
            recipient_kind = "party"
            [donations.columns]
            amount = 0
            recipient_id = 1
        "#;
        assert!(SchemaSet::parse(text).is_err());
    }

    #[test]
    fn rejects_unknown_fields_and_encodings() {
        let bad_field = r#"
            [[donations]]
            recipient_kind = "party"
            [donations.columns]
            amount = 0
            donor_id = 2
            recipient_id = 1
            colour = 5
        "#;
        assert!(SchemaSet::parse(bad_field).is_err());
        let bad_enc = r#"
            [[donations]]
            recipient_kind = "party"
            encoding = "klingon"
            [donations.columns]
            amount = 0
            donor_id = 2
            recipient_id = 1
        "#;
        assert!(SchemaSet::parse(bad_enc).is_err());
    }

    #[test]
    fn header_normalization() {
        assert_eq!(
            normalize_header("Sigla  Partido"),
            normalize_header(" sigla partido ")
        );
    }
}
