use std::io::{Read, Write};

use super::{CandidateOutcome, DonationRecord, IngestError};
use crate::money::Cents;

pub const CANONICAL_HEADER: &str =
    "amount_cents,donor_category,donor_id,recipient_kind,recipient_id,party,federal_unit,office";

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

/// Write records as UTF-8 CSV in input order.
pub fn write_canonical<W: Write>(out: W, records: &[DonationRecord]) -> std::io::Result<()> {
    let mut w = writer(out);
    w.write_record(CANONICAL_HEADER.split(','))?;
    for r in records {
        let amount = r.amount.value().to_string();
        w.write_record([
            amount.as_str(),
            r.donor_category.as_str(),
            r.donor_id.as_deref().unwrap_or(""),
            r.recipient_kind.as_str(),
            &r.recipient_id,
            &r.party,
            &r.federal_unit,
            &r.office,
        ])?;
    }
    w.flush()
}

/// Read a canonical dump back; `file` only labels errors.
pub fn read_canonical<R: Read>(input: R, file: &str) -> Result<Vec<DonationRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let mut records = Vec::new();
    let err = |row: u64, detail: String| IngestError::Canonical {
        file: file.to_string(),
        row,
        detail,
    };
    for (i, rec) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        if row == 1 {
            let header: Vec<&str> = rec.iter().collect();
            if header.join(",") != CANONICAL_HEADER {
                return Err(err(
                    row,
                    format!("unexpected header {:?}", header.join(",")),
                ));
            }
            continue;
        }
        if rec.len() != 8 {
            return Err(err(row, format!("expected 8 fields, got {}", rec.len())));
        }
        let amount: u64 = rec[0]
            .parse()
            .map_err(|_| err(row, format!("bad amount {:?}", &rec[0])))?;
        let donor_id = if rec[2].is_empty() {
            None
        } else {
            Some(rec[2].to_string())
        };
        records.push(DonationRecord {
            amount: Cents(amount),
            donor_category: rec[1].parse().map_err(|e: String| err(row, e))?,
            donor_id,
            recipient_kind: rec[3].parse().map_err(|e: String| err(row, e))?,
            recipient_id: rec[4].to_string(),
            party: rec[5].to_string(),
            federal_unit: rec[6].to_string(),
            office: rec[7].to_string(),
        });
    }
    Ok(records)
}

pub const OUTCOME_HEADER: &str = "candidate_id,federal_unit,office,elected";

/// Write outcomes (without donation totals) as UTF-8 CSV.
pub fn write_outcomes<W: Write>(out: W, outcomes: &[CandidateOutcome]) -> std::io::Result<()> {
    let mut w = writer(out);
    w.write_record(OUTCOME_HEADER.split(','))?;
    for o in outcomes {
        w.write_record([
            o.candidate_id.as_str(),
            &o.federal_unit,
            &o.office,
            if o.elected { "1" } else { "0" },
        ])?;
    }
    w.flush()
}

pub fn read_outcomes<R: Read>(input: R, file: &str) -> Result<Vec<CandidateOutcome>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(input);
    let err = |row: u64, detail: String| IngestError::Canonical {
        file: file.to_string(),
        row,
        detail,
    };
    let mut outcomes = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let row = i as u64 + 1;
        let rec = rec.map_err(|e| err(row, e.to_string()))?;
        if row == 1 {
            let header: Vec<&str> = rec.iter().collect();
            if header.join(",") != OUTCOME_HEADER {
                return Err(err(
                    row,
                    format!("unexpected header {:?}", header.join(",")),
                ));
            }
            continue;
        }
        if rec.len() != 4 {
            return Err(err(row, format!("expected 4 fields, got {}", rec.len())));
        }
        let elected = match &rec[3] {
            "1" => true,
            "0" => false,
            other => return Err(err(row, format!("bad elected flag {other:?}"))),
        };
        outcomes.push(CandidateOutcome {
            candidate_id: rec[0].to_string(),
            federal_unit: rec[1].to_string(),
            office: rec[2].to_string(),
            elected,
            total_donations: Cents::ZERO,
        });
    }
    Ok(outcomes)
}
