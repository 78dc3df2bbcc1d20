//! Parsing of donation and election-result exports into canonical records,
//! donor classification and file integrity checks.

mod canonical;
mod checksum;
mod parse;
mod schema;

pub use canonical::{
    read_canonical, read_outcomes, write_canonical, write_outcomes, CANONICAL_HEADER,
    OUTCOME_HEADER,
};
pub use checksum::{
    md5_hex, parse_manifest, verify_checksum, verify_manifest, ManifestEntry, ManifestStatus,
};
pub use parse::{
    classify_donor, join_donations_to_candidates, parse_donations, parse_outcomes, JoinResult,
    MalformedRow, ParseReport, MAX_MALFORMED_FRACTION,
};
pub use schema::{normalize_header, ColumnRef, IngestSchema, SchemaSet, TSE_2014_SCHEMA};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Cents;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{file}: row {row}: schema mismatch: {detail}")]
    SchemaMismatch {
        file: String,
        row: u64,
        detail: String,
    },
    #[error("{file}: row {row}: duplicate candidate {candidate_id:?} for office {office:?}")]
    DuplicateCandidate {
        file: String,
        row: u64,
        candidate_id: String,
        office: String,
    },
    #[error("invalid md5 digest {0:?}")]
    InvalidDigest(String),
    #[error("{file}: row {row}: {detail}")]
    Canonical {
        file: String,
        row: u64,
        detail: String,
    },
}

impl IngestError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Donor category, by the identifier attached to the donation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DonorCategory {
    #[serde(rename = "CNPJ")]
    Cnpj,
    #[serde(rename = "CPF")]
    Cpf,
    NonOriginal,
    Unknown,
}

impl DonorCategory {
    pub const ALL: [DonorCategory; 4] = [
        DonorCategory::Cnpj,
        DonorCategory::Cpf,
        DonorCategory::NonOriginal,
        DonorCategory::Unknown,
    ];

    /// Canonical token used in CSV dumps.
    pub fn as_str(self) -> &'static str {
        match self {
            DonorCategory::Cnpj => "CNPJ",
            DonorCategory::Cpf => "CPF",
            DonorCategory::NonOriginal => "NonOriginal",
            DonorCategory::Unknown => "Unknown",
        }
    }

    /// Label used in typeset tables.
    pub fn display_name(self) -> &'static str {
        match self {
            DonorCategory::NonOriginal => "Non-original",
            other => other.as_str(),
        }
    }
}

impl fmt::Display for DonorCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DonorCategory {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "CNPJ" => Ok(DonorCategory::Cnpj),
            "CPF" => Ok(DonorCategory::Cpf),
            "NonOriginal" | "Non-original" => Ok(DonorCategory::NonOriginal),
            "Unknown" => Ok(DonorCategory::Unknown),
            other => Err(format!("unknown donor category {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecipientKind {
    #[serde(alias = "Candidate")]
    Candidate,
    #[serde(alias = "Party")]
    Party,
    #[serde(alias = "Committee")]
    Committee,
}

impl RecipientKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecipientKind::Candidate => "Candidate",
            RecipientKind::Party => "Party",
            RecipientKind::Committee => "Committee",
        }
    }
}

impl fmt::Display for RecipientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecipientKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "candidate" | "candidato" => Ok(RecipientKind::Candidate),
            "party" | "partido" => Ok(RecipientKind::Party),
            "committee" | "comite" | "comitê" => Ok(RecipientKind::Committee),
            other => Err(format!("unknown recipient kind {other:?}")),
        }
    }
}

/// One declared donation.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DonationRecord {
    pub amount: Cents,
    pub donor_category: DonorCategory,
    pub donor_id: Option<String>,
    pub recipient_kind: RecipientKind,
    pub recipient_id: String,
    pub party: String,
    pub federal_unit: String,
    pub office: String,
}

/// One candidate's election result and the donations it received.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateOutcome {
    pub candidate_id: String,
    pub federal_unit: String,
    pub office: String,
    pub elected: bool,
    pub total_donations: Cents,
}

/// Case- and whitespace-insensitive key for offices and federal units.
pub fn normalize_key(s: &str) -> String {
    normalize_header(s)
}
