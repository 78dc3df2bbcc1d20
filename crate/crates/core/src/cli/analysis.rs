//! Grouping of donation records into sets and the per-set and per-race
//! analyses behind the commands.

use std::collections::BTreeMap;

use clap::ValueEnum;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::benford::test_set;
use crate::donation_model::{self, ControlInput, DonationModelFit, FitOptions, SyntheticSet};
use crate::ingest::{
    join_donations_to_candidates, normalize_key, CandidateOutcome, DonationRecord,
};
use crate::logit::{build_races, fit_race, summarize_races, LogitFit, LogitSummary, RaceDataset};
use crate::money::Cents;
use crate::report::{
    BenfordRow, CurveRow, DescriptiveRow, FitParamsRow, SetCategory, SetKey, SetSource,
};
use crate::stats::{cumulative_curve, describe};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, ValueEnum, Serialize, Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKey {
    Party,
    Category,
    FederalUnit,
    Office,
    RecipientKind,
}

impl GroupKey {
    fn value(self, r: &DonationRecord) -> &str {
        match self {
            GroupKey::Party => r.party.trim(),
            GroupKey::FederalUnit => r.federal_unit.trim(),
            GroupKey::Office => r.office.trim(),
            GroupKey::RecipientKind => r.recipient_kind.as_str(),
            GroupKey::Category => r.donor_category.as_str(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DonationSet {
    pub key: SetKey,
    pub amounts: Vec<Cents>,
}

/// One set per group (the values of the non-category keys, joined with
/// " / "), plus one per donor category when `by` includes the category.
pub fn build_sets(records: &[DonationRecord], by: &[GroupKey]) -> Vec<DonationSet> {
    let split = by.contains(&GroupKey::Category);
    let group_keys: Vec<GroupKey> = by
        .iter()
        .copied()
        .filter(|k| *k != GroupKey::Category)
        .collect();
    let mut sets: BTreeMap<SetKey, Vec<Cents>> = BTreeMap::new();
    for r in records {
        let group = group_keys
            .iter()
            .map(|k| k.value(r))
            .collect::<Vec<_>>()
            .join(" / ");
        sets.entry(SetKey::new(
            group.clone(),
            SetCategory::All,
            SetSource::Real,
        ))
        .or_default()
        .push(r.amount);
        if split {
            let key = SetKey::new(group, r.donor_category.into(), SetSource::Real);
            sets.entry(key).or_default().push(r.amount);
        }
    }
    sets.into_iter()
        .map(|(key, amounts)| DonationSet { key, amounts })
        .collect()
}

/// Keep records whose office contains `filter`, compared case-insensitively.
pub fn office_matches(office: &str, filter: Option<&str>) -> bool {
    filter.is_none_or(|f| normalize_key(office).contains(&normalize_key(f)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub min_n: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub key: SetKey,
    pub max: Option<Cents>,
    /// Amounts of one cent sit on the lower bound and are left out of the fit.
    pub excluded: usize,
    pub fit: Result<DonationModelFit, String>,
}

#[derive(Debug, Clone)]
pub struct SyntheticOutput {
    pub key: SetKey,
    pub set: SyntheticSet,
}

#[derive(Debug, Clone, Default)]
pub struct SetAnalysis {
    pub descriptive: Vec<DescriptiveRow>,
    pub benford: Vec<BenfordRow>,
    pub fits: Vec<FitOutcome>,
    pub curves: Vec<CurveRow>,
    pub synthetic: Vec<SyntheticOutput>,
    pub warnings: Vec<String>,
}

impl SetAnalysis {
    pub fn fit_rows(&self) -> Vec<FitParamsRow> {
        self.fits
            .iter()
            .filter_map(|f| match (&f.fit, f.max) {
                (Ok(fit), Some(max)) => Some(FitParamsRow {
                    key: f.key.clone(),
                    max,
                    fit: *fit,
                }),
                _ => None,
            })
            .collect()
    }
}

fn fit_set(set: &DonationSet, options: &FitOptions) -> FitOutcome {
    let usable: Vec<Cents> = set
        .amounts
        .iter()
        .copied()
        .filter(|a| a.value() > 1)
        .collect();
    let fit = donation_model::fit(&usable, options).map_err(|e| e.to_string());
    FitOutcome {
        key: set.key.clone(),
        max: set.amounts.iter().max().copied(),
        excluded: set.amounts.len() - usable.len(),
        fit,
    }
}

pub fn describe_sets(sets: &[DonationSet]) -> Vec<DescriptiveRow> {
    sets.par_iter()
        .map(|s| DescriptiveRow {
            key: s.key.clone(),
            stats: describe(&s.amounts),
        })
        .collect()
}

fn benford_row(
    key: &SetKey,
    amounts: &[Cents],
    min_n: usize,
    fit: Option<DonationModelFit>,
) -> Option<BenfordRow> {
    let test = test_set(amounts, &key.label(), min_n).expect("amounts are positive")?;
    Some(BenfordRow {
        key: key.clone(),
        test,
        stats: describe(amounts),
        fit,
    })
}

pub fn benford_sets(sets: &[DonationSet], min_n: usize) -> Vec<BenfordRow> {
    sets.par_iter()
        .filter_map(|s| benford_row(&s.key, &s.amounts, min_n, None))
        .collect()
}

pub fn fit_sets(sets: &[DonationSet], options: &FitOptions) -> Vec<FitOutcome> {
    sets.par_iter().map(|s| fit_set(s, options)).collect()
}

fn fit_warnings(fits: &[FitOutcome]) -> Vec<String> {
    let mut out = Vec::new();
    for f in fits {
        if f.excluded > 0 {
            out.push(format!(
                "{}: {} one-cent amounts left out of the fit",
                f.key.label(),
                f.excluded
            ));
        }
        match &f.fit {
            Err(e) => out.push(format!("{}: no model fit ({e})", f.key.label())),
            Ok(fit) if !fit.converged => out.push(format!(
                "{}: fit stopped with gradient norm {:e}",
                f.key.label(),
                fit.gradient_norm
            )),
            Ok(_) => {}
        }
    }
    out
}

/// Rand sets for every converged fit and a Model set per group from the
/// per-category fits.
pub fn synthesize(sets: &[DonationSet], fits: &[FitOutcome], seed: u64) -> Vec<SyntheticOutput> {
    let converged: BTreeMap<&SetKey, DonationModelFit> = fits
        .iter()
        .filter_map(|f| match &f.fit {
            Ok(fit) if fit.converged => Some((&f.key, *fit)),
            _ => None,
        })
        .collect();
    let mut groups: BTreeMap<&str, Vec<&DonationSet>> = BTreeMap::new();
    for s in sets {
        groups.entry(s.key.group.as_str()).or_default().push(s);
    }
    let groups: Vec<(&str, Vec<&DonationSet>)> = groups.into_iter().collect();
    groups
        .par_iter()
        .flat_map_iter(|(group, members)| {
            let mut out = Vec::new();
            let mut inputs = Vec::new();
            let mut input_keys = Vec::new();
            for s in members {
                let Some(fit) = converged.get(&s.key) else {
                    continue;
                };
                if s.key.category == SetCategory::All {
                    let set = donation_model::sample(
                        fit,
                        s.amounts.len(),
                        seed,
                        &format!("{}/Rand", s.key.label()),
                    );
                    out.push(SyntheticOutput {
                        key: SetKey {
                            source: SetSource::Rand,
                            ..s.key.clone()
                        },
                        set,
                    });
                } else {
                    inputs.push(ControlInput {
                        label: s.key.label(),
                        fit: *fit,
                        n: s.amounts.len(),
                    });
                    input_keys.push(s.key.clone());
                }
            }
            if !inputs.is_empty() {
                let controls = donation_model::make_controls(&inputs, seed)
                    .expect("inputs are converged fits");
                for (key, set) in input_keys.into_iter().zip(controls.rand) {
                    out.push(SyntheticOutput {
                        key: SetKey {
                            source: SetSource::Rand,
                            ..key
                        },
                        set,
                    });
                }
                out.push(SyntheticOutput {
                    key: SetKey::new(*group, SetCategory::All, SetSource::Model),
                    set: controls.model,
                });
            }
            out
        })
        .collect()
}

/// Descriptive stats, curves, fits, Rand/Model controls and Benford tests
/// on real and synthetic sets.
pub fn analyze_sets(sets: &[DonationSet], options: &AnalysisOptions) -> SetAnalysis {
    let descriptive = describe_sets(sets);
    let fits = fit_sets(sets, &options.fit);
    let fit_of: BTreeMap<&SetKey, DonationModelFit> = fits
        .iter()
        .filter_map(|f| f.fit.as_ref().ok().map(|fit| (&f.key, *fit)))
        .collect();

    let curves: Vec<CurveRow> = sets
        .par_iter()
        .filter_map(|s| {
            let points = cumulative_curve(&s.amounts).ok()?;
            let fitted = fit_of.get(&s.key).map(|fit| {
                points
                    .iter()
                    .map(|(x, _)| donation_model::cdf(x.exp(), fit).unwrap_or(f64::NAN))
                    .collect()
            });
            Some(CurveRow {
                key: s.key.clone(),
                points,
                fitted,
            })
        })
        .collect();

    let synthetic = synthesize(sets, &fits, options.seed);
    let mut benford: Vec<BenfordRow> = sets
        .par_iter()
        .filter_map(|s| {
            benford_row(
                &s.key,
                &s.amounts,
                options.min_n,
                fit_of.get(&s.key).copied(),
            )
        })
        .collect();
    benford.extend(
        synthetic
            .par_iter()
            .filter_map(|s| {
                let source = match s.key.source {
                    SetSource::Rand => s.set.components.first().map(|c| c.fit),
                    _ => None,
                };
                benford_row(&s.key, &s.set.amounts, options.min_n, source)
            })
            .collect::<Vec<_>>(),
    );

    let warnings = fit_warnings(&fits);
    SetAnalysis {
        descriptive,
        benford,
        fits,
        curves,
        synthetic,
        warnings,
    }
}

/// Join candidate donations to outcomes, build races (optionally filtered
/// by office) and fit each race.
pub fn analyze_races(
    donations: &[DonationRecord],
    outcomes: &[CandidateOutcome],
    office: Option<&str>,
) -> (Vec<LogitSummary>, Vec<(RaceDataset, LogitFit)>) {
    let joined = join_donations_to_candidates(donations, outcomes);
    let races: Vec<RaceDataset> = build_races(&joined.outcomes, &joined.residual)
        .into_iter()
        .filter(|r| office_matches(&r.office, office))
        .collect();
    let results: Vec<_> = races
        .into_par_iter()
        .map(|r| {
            let fit = fit_race(&r);
            (r, fit)
        })
        .collect();
    let summaries = summarize_races(&results);
    let fitted = results
        .into_iter()
        .filter_map(|(r, f)| f.ok().map(|f| (r, f)))
        .collect();
    (summaries, fitted)
}
