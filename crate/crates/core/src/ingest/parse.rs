use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use encoding_rs::Encoding;

use super::schema::{normalize_header, ColumnRef, IngestSchema};
use super::{
    normalize_key, CandidateOutcome, DonationRecord, DonorCategory, IngestError, RecipientKind,
};
use crate::money::Cents;

/// Fraction of malformed rows above which a file is rejected.
pub const MAX_MALFORMED_FRACTION: f64 = 0.001;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedRow {
    /// 1-based record number in the file, header included.
    pub row: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParseReport {
    pub file: String,
    pub data_rows: u64,
    pub accepted: u64,
    pub malformed: Vec<MalformedRow>,
}

impl ParseReport {
    pub fn malformed_fraction(&self) -> f64 {
        if self.data_rows == 0 {
            0.0
        } else {
            self.malformed.len() as f64 / self.data_rows as f64
        }
    }

    pub fn exceeds_threshold(&self) -> bool {
        self.malformed_fraction() > MAX_MALFORMED_FRACTION
    }
}

type Row = (u64, Result<Vec<String>, String>);

struct Table {
    file: String,
    header: Option<Vec<String>>,
    rows: Vec<Row>,
}

fn decode_field(encoding: &'static Encoding, bytes: &[u8]) -> Option<String> {
    encoding
        .decode_without_bom_handling_and_without_replacement(bytes)
        .map(|c| c.into_owned())
}

fn read_table(path: &Path, schema: &IngestSchema) -> Result<Table, IngestError> {
    let file = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let mut bytes = std::fs::read(path).map_err(|e| IngestError::io(path, e))?;
    let encoding = Encoding::for_label(schema.encoding.as_bytes())
        .ok_or_else(|| IngestError::Schema(format!("unknown encoding {:?}", schema.encoding)))?;
    if encoding == encoding_rs::UTF_8 && bytes.starts_with(&[0xEF, 0xBB, 0xBF]) {
        bytes.drain(..3);
    }

    let mut builder = csv::ReaderBuilder::new();
    builder
        .has_headers(false)
        .flexible(true)
        .delimiter(schema.delimiter as u8);
    match schema.quote {
        Some(q) => builder.quote(q as u8),
        None => builder.quoting(false),
    };
    let mut reader = builder.from_reader(bytes.as_slice());

    let mut header = None;
    let mut rows = Vec::new();
    let mut record = csv::ByteRecord::new();
    let mut index: u64 = 0;
    loop {
        index += 1;
        let row = match reader.read_byte_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {
                let decoded: Option<Vec<String>> =
                    record.iter().map(|f| decode_field(encoding, f)).collect();
                decoded.ok_or_else(|| format!("undecodable bytes for encoding {}", encoding.name()))
            }
            Err(e) => Err(format!("malformed record: {e}")),
        };
        if schema.has_header && header.is_none() {
            let fields = row.map_err(|detail| IngestError::SchemaMismatch {
                file: file.clone(),
                row: index,
                detail: format!("unreadable header: {detail}"),
            })?;
            header = Some(fields);
            continue;
        }
        rows.push((index, row));
    }
    Ok(Table { file, header, rows })
}

/// Resolve mapped fields to column indices against the header.
fn resolve_columns(
    table: &Table,
    schema: &IngestSchema,
) -> Result<BTreeMap<String, usize>, IngestError> {
    let mut out = BTreeMap::new();
    for (field, col) in &schema.columns {
        let idx = match col {
            ColumnRef::Index(i) => *i,
            ColumnRef::Header(name) => {
                let wanted = normalize_header(name);
                let header = table
                    .header
                    .as_ref()
                    .ok_or_else(|| IngestError::SchemaMismatch {
                        file: table.file.clone(),
                        row: 1,
                        detail: "file has no header row".into(),
                    })?;
                header
                    .iter()
                    .position(|h| normalize_header(h) == wanted)
                    .ok_or_else(|| IngestError::SchemaMismatch {
                        file: table.file.clone(),
                        row: 1,
                        detail: format!("no column named {name:?} for field {field:?}"),
                    })?
            }
        };
        out.insert(field.clone(), idx);
    }
    Ok(out)
}

struct RowView<'a> {
    fields: &'a [String],
    columns: &'a BTreeMap<String, usize>,
    schema: &'a IngestSchema,
}

impl RowView<'_> {
    /// Trimmed field value; `None` when unmapped or a null token.
    fn get(&self, field: &str) -> Option<&str> {
        let idx = *self.columns.get(field)?;
        let v = self.fields[idx].trim();
        if self.schema.is_null(v) {
            None
        } else {
            Some(v)
        }
    }

    fn get_or_default(&self, field: &str) -> String {
        self.get(field)
            .map(str::to_string)
            .or_else(|| self.schema.defaults.get(field).cloned())
            .unwrap_or_default()
    }
}

fn check_width(
    table: &Table,
    columns: &BTreeMap<String, usize>,
    row: u64,
    width: usize,
) -> Result<(), IngestError> {
    if let Some((field, &idx)) = columns.iter().find(|(_, &i)| i >= width) {
        return Err(IngestError::SchemaMismatch {
            file: table.file.clone(),
            row,
            detail: format!("row has {width} fields, column {idx} (field {field:?}) missing"),
        });
    }
    Ok(())
}

fn digits(s: &str) -> String {
    s.chars().filter(char::is_ascii_digit).collect()
}

/// Donor category from the identifiers present on a donation.
///
/// A CNPJ takes precedence over a CPF; an originating-donor attribution
/// overrides both; with neither identifier the donation is Unknown.
pub fn classify_donor(
    cnpj: Option<&str>,
    cpf: Option<&str>,
    has_original_donor: bool,
) -> DonorCategory {
    let present = |s: Option<&str>| s.map(|v| !v.trim().is_empty()).unwrap_or(false);
    if has_original_donor {
        DonorCategory::NonOriginal
    } else if present(cnpj) {
        DonorCategory::Cnpj
    } else if present(cpf) {
        DonorCategory::Cpf
    } else {
        DonorCategory::Unknown
    }
}

/// Split a combined CPF/CNPJ field by digit count: more than 11 digits is a
/// CNPJ (14 when zero-padded), otherwise a CPF.
fn split_combined(id: &str) -> (Option<&str>, Option<&str>) {
    let n = digits(id).len();
    if n == 0 {
        (None, None)
    } else if n > 11 {
        (Some(id), None)
    } else {
        (None, Some(id))
    }
}

fn donation_from_row(view: &RowView<'_>) -> Result<DonationRecord, String> {
    let schema = view.schema;
    let amount_text = view.get("amount").ok_or("missing amount")?;
    let amount = Cents::parse_decimal(
        amount_text,
        schema.decimal_separator,
        schema.thousands_separator,
    )
    .map_err(|e| e.to_string())?;
    if amount == Cents::ZERO {
        return Err("zero amount".into());
    }

    let (mut cnpj, mut cpf) = (view.get("donor_cnpj"), view.get("donor_cpf"));
    if let Some(combined) = view.get("donor_id") {
        let (a, b) = split_combined(combined);
        cnpj = cnpj.or(a);
        cpf = cpf.or(b);
    }
    let has_original = view.get("original_donor_id").is_some_and(|v| !v.is_empty());
    let donor_category = classify_donor(cnpj, cpf, has_original);
    let donor_id = cnpj.or(cpf).map(str::to_string);

    let recipient_kind = match view.get("recipient_kind") {
        Some(text) => text.parse::<RecipientKind>()?,
        None => schema
            .recipient_kind
            .ok_or("recipient kind not available")?,
    };
    let recipient_id = view
        .get("recipient_id")
        .ok_or("missing recipient id")?
        .to_string();

    Ok(DonationRecord {
        amount,
        donor_category,
        donor_id,
        recipient_kind,
        recipient_id,
        party: view.get_or_default("party"),
        federal_unit: view.get_or_default("federal_unit").to_uppercase(),
        office: view.get_or_default("office"),
    })
}

/// Parse a donation export. Malformed rows are reported, not dropped
/// silently; a row too short for a mapped column aborts the parse.
pub fn parse_donations(
    path: &Path,
    schema: &IngestSchema,
) -> Result<(Vec<DonationRecord>, ParseReport), IngestError> {
    schema.validate_for_donations()?;
    let table = read_table(path, schema)?;
    let columns = resolve_columns(&table, schema)?;
    let mut report = ParseReport {
        file: table.file.clone(),
        ..Default::default()
    };
    let mut records = Vec::new();
    for (row, fields) in &table.rows {
        report.data_rows += 1;
        let fields = match fields {
            Ok(f) => f,
            Err(reason) => {
                report.malformed.push(MalformedRow {
                    row: *row,
                    reason: reason.clone(),
                });
                continue;
            }
        };
        check_width(&table, &columns, *row, fields.len())?;
        let view = RowView {
            fields,
            columns: &columns,
            schema,
        };
        match donation_from_row(&view) {
            Ok(r) => {
                report.accepted += 1;
                records.push(r);
            }
            Err(reason) => report.malformed.push(MalformedRow { row: *row, reason }),
        }
    }
    Ok((records, report))
}

/// Parse an election-result export. Both elected situations (by quotient
/// or by average) map to `elected = true`.
pub fn parse_outcomes(
    path: &Path,
    schema: &IngestSchema,
) -> Result<(Vec<CandidateOutcome>, ParseReport), IngestError> {
    schema.validate_for_outcomes()?;
    let table = read_table(path, schema)?;
    let columns = resolve_columns(&table, schema)?;
    let elected: Vec<String> = schema
        .elected_values
        .iter()
        .map(|v| normalize_key(v))
        .collect();
    let mut report = ParseReport {
        file: table.file.clone(),
        ..Default::default()
    };
    let mut outcomes = Vec::new();
    let mut seen: HashMap<(String, String, String), u64> = HashMap::new();
    for (row, fields) in &table.rows {
        report.data_rows += 1;
        let fields = match fields {
            Ok(f) => f,
            Err(reason) => {
                report.malformed.push(MalformedRow {
                    row: *row,
                    reason: reason.clone(),
                });
                continue;
            }
        };
        check_width(&table, &columns, *row, fields.len())?;
        let view = RowView {
            fields,
            columns: &columns,
            schema,
        };
        let Some(candidate_id) = view.get("candidate_id") else {
            report.malformed.push(MalformedRow {
                row: *row,
                reason: "missing candidate id".into(),
            });
            continue;
        };
        let Some(situation) = view.get("situation") else {
            report.malformed.push(MalformedRow {
                row: *row,
                reason: "missing situation".into(),
            });
            continue;
        };
        let federal_unit = view.get_or_default("federal_unit").to_uppercase();
        let office = view.get_or_default("office");
        let key = (
            normalize_key(&federal_unit),
            normalize_key(&office),
            candidate_id.to_string(),
        );
        if seen.insert(key, *row).is_some() {
            return Err(IngestError::DuplicateCandidate {
                file: table.file.clone(),
                row: *row,
                candidate_id: candidate_id.to_string(),
                office,
            });
        }
        report.accepted += 1;
        outcomes.push(CandidateOutcome {
            candidate_id: candidate_id.to_string(),
            federal_unit,
            office,
            elected: elected.contains(&normalize_key(situation)),
            total_donations: Cents::ZERO,
        });
    }
    Ok((outcomes, report))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinResult {
    pub outcomes: Vec<CandidateOutcome>,
    /// Donations that matched no candidate, in input order.
    pub residual: Vec<DonationRecord>,
}

/// Fill each outcome's total with the exact sum of its candidate donations.
///
/// Donations match on (federal unit, office, candidate id), with federal
/// unit and office compared case-insensitively.
pub fn join_donations_to_candidates(
    donations: &[DonationRecord],
    outcomes: &[CandidateOutcome],
) -> JoinResult {
    let mut index: HashMap<(String, String, &str), usize> = HashMap::new();
    for (i, o) in outcomes.iter().enumerate() {
        index.insert(
            (
                normalize_key(&o.federal_unit),
                normalize_key(&o.office),
                o.candidate_id.as_str(),
            ),
            i,
        );
    }
    let mut joined: Vec<CandidateOutcome> = outcomes
        .iter()
        .map(|o| CandidateOutcome {
            total_donations: Cents::ZERO,
            ..o.clone()
        })
        .collect();
    let mut residual = Vec::new();
    for d in donations {
        let hit = if d.recipient_kind == RecipientKind::Candidate {
            index
                .get(&(
                    normalize_key(&d.federal_unit),
                    normalize_key(&d.office),
                    d.recipient_id.as_str(),
                ))
                .copied()
        } else {
            None
        };
        match hit {
            Some(i) => joined[i].total_donations += d.amount,
            None => residual.push(d.clone()),
        }
    }
    JoinResult {
        outcomes: joined,
        residual,
    }
}
