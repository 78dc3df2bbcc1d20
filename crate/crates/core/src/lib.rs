//! Forensic statistics for electoral campaign finance declarations.
//!
//! The crate ingests donation and election-result exports, describes
//! donation sets, tests their first significant digits against Benford's
//! law, fits a truncated log-logistic model to donation amounts (and samples
//! synthetic control sets from it), regresses election outcome on donation
//! share, and emits the resulting tables.

pub mod benford;
pub mod cli;
pub mod donation_model;
pub mod ingest;
pub mod logit;
pub mod money;
pub mod numerics;
pub mod report;
pub mod stats;
