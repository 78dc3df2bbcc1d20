//! Logistic regression of election outcome on a candidate's share of the
//! race's donated money.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{normalize_key, CandidateOutcome, DonationRecord, RecipientKind};
use crate::money::Cents;
use crate::numerics::{
    chi2_sf, newton_raphson_mle, symmetric_condition, ChiSquareParams, NumericsError,
    OptimizerConfig, SecondOrder, MAX_HESSIAN_CONDITION,
};

/// Coefficient norm beyond which a fit is treated as diverging.
pub const SEPARATION_NORM: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LogitError {
    #[error("insufficient data: {n} rows, {elected} elected")]
    InsufficientData { n: usize, elected: usize },
    #[error("outcomes are separable by the predictor (beta = {beta:?})")]
    Separation { beta: [f64; 2] },
    #[error("fraction {value} for candidate {candidate_id:?} is outside [0, 1]")]
    InvalidFraction { candidate_id: String, value: f64 },
    #[error("no convergence after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error(transparent)]
    Numerics(NumericsError),
}

impl LogitError {
    /// Short marker used in result tables.
    pub fn marker(&self) -> &'static str {
        match self {
            LogitError::InsufficientData { .. } => "insufficient-data",
            LogitError::Separation { .. } => "separation-failure",
            LogitError::InvalidFraction { .. } => "invalid-fraction",
            LogitError::NonConvergence { .. } => "non-convergence",
            LogitError::Numerics(_) => "numerical-failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceRow {
    pub candidate_id: String,
    pub fraction: f64,
    pub elected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceDataset {
    pub federal_unit: String,
    pub office: String,
    pub total_money: Cents,
    pub rows: Vec<RaceRow>,
}

impl RaceDataset {
    pub fn n_elected(&self) -> usize {
        self.rows.iter().filter(|r| r.elected).count()
    }
}

/// Group joined outcomes into races keyed by (federal unit, office).
///
/// The race total is every candidate's donations plus candidate donations
/// addressed to that race that matched no candidate row, so fractions sum
/// to at most one. Races come back sorted by key.
pub fn build_races(outcomes: &[CandidateOutcome], residual: &[DonationRecord]) -> Vec<RaceDataset> {
    let mut groups: BTreeMap<(String, String), Vec<&CandidateOutcome>> = BTreeMap::new();
    for o in outcomes {
        groups
            .entry((normalize_key(&o.federal_unit), normalize_key(&o.office)))
            .or_default()
            .push(o);
    }
    let mut unmatched: BTreeMap<(String, String), Cents> = BTreeMap::new();
    for d in residual
        .iter()
        .filter(|d| d.recipient_kind == RecipientKind::Candidate)
    {
        *unmatched
            .entry((normalize_key(&d.federal_unit), normalize_key(&d.office)))
            .or_default() += d.amount;
    }
    groups
        .into_iter()
        .map(|(key, members)| {
            let matched: Cents = members.iter().map(|o| o.total_donations).sum();
            let total = matched + unmatched.get(&key).copied().unwrap_or_default();
            let rows = members
                .iter()
                .map(|o| RaceRow {
                    candidate_id: o.candidate_id.clone(),
                    fraction: if total.value() == 0 {
                        0.0
                    } else {
                        o.total_donations.value() as f64 / total.value() as f64
                    },
                    elected: o.elected,
                })
                .collect();
            RaceDataset {
                federal_unit: members[0].federal_unit.clone(),
                office: members[0].office.clone(),
                total_money: total,
                rows,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitFit {
    pub beta0: f64,
    pub beta1: f64,
    pub covariance: [[f64; 2]; 2],
    pub wald_p: [f64; 2],
    pub deviance: f64,
    pub deviance_p: f64,
    pub n: usize,
    pub n_elected: usize,
    pub log_likelihood: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

impl LogitFit {
    pub fn std_errors(&self) -> [f64; 2] {
        [self.covariance[0][0].sqrt(), self.covariance[1][1].sqrt()]
    }

    pub fn predict(&self, fraction: f64) -> f64 {
        predict(self.beta0, self.beta1, fraction)
    }

    pub fn odds_ratio(&self, extra: Cents, total: Cents) -> f64 {
        odds_ratio(self.beta1, extra, total)
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^eta)` without overflow.
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Probability of election `1 / (1 + e^-(β0 + β1 x))`.
pub fn predict(beta0: f64, beta1: f64, fraction: f64) -> f64 {
    logistic(beta0 + beta1 * fraction)
}

/// Multiplicative change in the odds `p/(1-p)` when a candidate receives
/// `extra` more money in a race with `total` donated.
pub fn odds_ratio(beta1: f64, extra: Cents, total: Cents) -> f64 {
    (beta1 * extra.value() as f64 / total.value() as f64).exp()
}

/// Bernoulli log-likelihood, gradient and Hessian at `beta`.
fn evaluate(rows: &[RaceRow], beta: &[f64]) -> SecondOrder {
    let (mut value, mut g0, mut g1, mut h00, mut h01, mut h11) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rows {
        let x = r.fraction;
        let eta = beta[0] + beta[1] * x;
        let p = logistic(eta);
        let y = if r.elected { 1.0 } else { 0.0 };
        value += y * eta - softplus(eta);
        let resid = y - p;
        g0 += resid;
        g1 += resid * x;
        let w = p * (1.0 - p);
        h00 -= w;
        h01 -= w * x;
        h11 -= w * x * x;
    }
    SecondOrder {
        value,
        gradient: vec![g0, g1],
        hessian: DMatrix::from_row_slice(2, 2, &[h00, h01, h01, h11]),
    }
}

/// Log-likelihood gradient at `(beta0, beta1)` for a dataset.
pub fn score(dataset: &RaceDataset, beta0: f64, beta1: f64) -> [f64; 2] {
    let g = evaluate(&dataset.rows, &[beta0, beta1]).gradient;
    [g[0], g[1]]
}

/// Bernoulli log-likelihood at `(beta0, beta1)`.
pub fn log_likelihood(dataset: &RaceDataset, beta0: f64, beta1: f64) -> f64 {
    evaluate(&dataset.rows, &[beta0, beta1]).value
}

fn check(dataset: &RaceDataset) -> Result<(usize, usize), LogitError> {
    for r in &dataset.rows {
        if !(0.0..=1.0).contains(&r.fraction) {
            return Err(LogitError::InvalidFraction {
                candidate_id: r.candidate_id.clone(),
                value: r.fraction,
            });
        }
    }
    let n = dataset.rows.len();
    let elected = dataset.n_elected();
    if n < 3 || elected == 0 || elected == n {
        return Err(LogitError::InsufficientData { n, elected });
    }
    Ok((n, elected))
}

/// With one predictor, outcomes are (quasi-)separable exactly when a
/// threshold on the fraction splits elected from non-elected rows.
fn separable(rows: &[RaceRow]) -> bool {
    let range = |elected: bool| {
        rows.iter()
            .filter(|r| r.elected == elected)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.fraction), hi.max(r.fraction))
            })
    };
    let ((lo_e, hi_e), (lo_n, hi_n)) = (range(true), range(false));
    hi_n <= lo_e || hi_e <= lo_n
}

fn intercept_start(n: usize, elected: usize) -> f64 {
    (elected as f64 / (n - elected) as f64).ln()
}

/// Maximum-likelihood fit of `logit p = β0 + β1 · fraction` by Newton-Raphson.
pub fn fit_race(dataset: &RaceDataset) -> Result<LogitFit, LogitError> {
    let (n, n_elected) = check(dataset)?;
    let config = OptimizerConfig {
        max_iterations: 200,
        ..OptimizerConfig::default()
    };
    if separable(&dataset.rows) {
        return Err(LogitError::Separation {
            beta: [f64::NAN, f64::NAN],
        });
    }
    let start = [intercept_start(n, n_elected), 0.0];
    let result = match newton_raphson_mle(|b: &[f64]| evaluate(&dataset.rows, b), &start, &config) {
        Ok(r) => r,
        Err(NumericsError::SingularHessian { .. }) | Err(NumericsError::NonFinite { .. }) => {
            return Err(LogitError::Separation {
                beta: [f64::NAN, f64::NAN],
            })
        }
        Err(e) => return Err(LogitError::Numerics(e)),
    };
    let beta = [result.point[0], result.point[1]];
    if beta[0].hypot(beta[1]) > SEPARATION_NORM
        || symmetric_condition(&result.hessian) > MAX_HESSIAN_CONDITION
    {
        return Err(LogitError::Separation { beta });
    }
    if !result.converged {
        return Err(LogitError::NonConvergence {
            iterations: result.iterations,
            gradient_norm: result.gradient_norm(),
        });
    }
    let h = &result.hessian;
    let info = Matrix2::new(-h[(0, 0)], -h[(0, 1)], -h[(1, 0)], -h[(1, 1)]);
    let cov = info.try_inverse().ok_or(LogitError::Separation { beta })?;
    let covariance = [
        [cov[(0, 0)], 0.5 * (cov[(0, 1)] + cov[(1, 0)])],
        [0.5 * (cov[(0, 1)] + cov[(1, 0)]), cov[(1, 1)]],
    ];
    let wald = |b: f64, var: f64| {
        chi2_sf(ChiSquareParams::new(b * b / var, 1).map_err(LogitError::Numerics)?)
            .map_err(LogitError::Numerics)
    };
    let wald_p = [
        wald(beta[0], covariance[0][0])?,
        wald(beta[1], covariance[1][1])?,
    ];
    let deviance = (-2.0 * result.value).max(0.0);
    let deviance_p =
        chi2_sf(ChiSquareParams::new(deviance, (n - 2) as u32).map_err(LogitError::Numerics)?)
            .map_err(LogitError::Numerics)?;
    Ok(LogitFit {
        beta0: beta[0],
        beta1: beta[1],
        covariance,
        wald_p,
        deviance,
        deviance_p,
        n,
        n_elected,
        log_likelihood: result.value,
        gradient_norm: result.gradient_norm(),
        iterations: result.iterations,
    })
}

/// Intercept-only fit (β1 = 0), returning β0.
pub fn fit_intercept_only(dataset: &RaceDataset) -> Result<f64, LogitError> {
    let (n, elected) = check(dataset)?;
    let objective = |b: &[f64]| {
        let full = evaluate(&dataset.rows, &[b[0], 0.0]);
        SecondOrder {
            value: full.value,
            gradient: vec![full.gradient[0]],
            hessian: DMatrix::from_element(1, 1, full.hessian[(0, 0)]),
        }
    };
    let result = newton_raphson_mle(objective, &[0.0], &OptimizerConfig::default())
        .map_err(LogitError::Numerics)?;
    if !result.converged {
        return Err(LogitError::NonConvergence {
            iterations: result.iterations,
            gradient_norm: result.gradient_norm(),
        });
    }
    debug_assert!((result.point[0] - intercept_start(n, elected)).abs() < 1e-6);
    Ok(result.point[0])
}

/// One result-table row per race; failures keep their marker.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitSummary {
    pub federal_unit: String,
    pub office: String,
    pub n: usize,
    pub n_elected: usize,
    pub total_money: Cents,
    pub outcome: Result<LogitFit, String>,
}

/// Table rows sorted by (federal unit, office).
pub fn summarize_races(
    results: &[(RaceDataset, Result<LogitFit, LogitError>)],
) -> Vec<LogitSummary> {
    let mut rows: Vec<LogitSummary> = results
        .iter()
        .map(|(race, fit)| LogitSummary {
            federal_unit: race.federal_unit.clone(),
            office: race.office.clone(),
            n: race.rows.len(),
            n_elected: race.n_elected(),
            total_money: race.total_money,
            outcome: fit.clone().map_err(|e| e.marker().to_string()),
        })
        .collect();
    rows.sort_by(|a, b| (&a.federal_unit, &a.office).cmp(&(&b.federal_unit, &b.office)));
    rows
}

/// Per-candidate fitted probabilities as CSV.
pub fn write_diagnostics<W: Write>(
    out: W,
    dataset: &RaceDataset,
    fit: &LogitFit,
) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "federal_unit",
        "office",
        "candidate_id",
        "fraction",
        "elected",
        "fitted_probability",
    ])?;
    for r in &dataset.rows {
        w.write_record([
            dataset.federal_unit.as_str(),
            dataset.office.as_str(),
            r.candidate_id.as_str(),
            &format!("{:.9}", r.fraction),
            if r.elected { "1" } else { "0" },
            &format!("{:.6}", fit.predict(r.fraction)),
        ])?;
    }
    w.flush()?;
    Ok(())
}
