//! Truncated log-logistic model of donation amounts.
//!
//! With `ξ = ln x`, the cumulative distribution is a sigmoid in `ξ - Δ`,
//!
//! ```text
//! F(x) = A / (1 + (ξ0 / (ln x - Δ))^γ),   A = 1 + (ξ0 / (ξmax - Δ))^γ
//! ```
//!
//! on `e^Δ < x < e^ξmax`, 0 below and 1 above. `Δ` is fixed at `ln 0.01`
//! (one cent). Shape `γ` and location `ξ0` are fitted by maximum
//! likelihood with steepest ascent over `(ln γ, ln ξ0)`.
//!
//! All arithmetic goes through `s = γ ln(ξ0 / (ln x - Δ))` and
//! `softplus(s) = ln(1 + e^s)`, since `(ξ0 / (ln x - Δ))^γ` overflows near
//! the lower bound.

use std::io::Write;
use std::path::Path;

use md5::{Digest, Md5};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Cents;
use crate::numerics::{steepest_ascent, FirstOrder, NumericsError, OptimizerConfig};

/// Lower log-bound: the smallest possible donation is one cent.
pub const DELTA: f64 = -4.605_170_185_988_091; // ln(0.01)

/// Quantile draws are kept at least this far from zero.
pub const MIN_UNIFORM: f64 = 1e-15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("amount {amount} at position {index} is outside the model support")]
    OutOfSupport { index: usize, amount: f64 },
    #[error("need at least two distinct amounts, got {0}")]
    Degenerate(String),
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("fit for {label:?} did not converge")]
    NotConverged { label: String },
    #[error(transparent)]
    Optimizer(#[from] NumericsError),
}

/// How the upper log-bound is derived from the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XiMaxRule {
    /// `ξmax = max ln x_i + 1`.
    #[default]
    LogMaxPlusOne,
    /// `ξmax = max x_i + 1`, the amount itself used as a log-bound.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DonationModelFit {
    pub gamma: f64,
    pub xi0: f64,
    pub delta: f64,
    pub xi_max: f64,
    pub n: usize,
    pub log_likelihood: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl DonationModelFit {
    /// A model with given parameters and no fitted data behind it.
    pub fn from_params(gamma: f64, xi0: f64, delta: f64, xi_max: f64) -> Result<Self, ModelError> {
        if !(gamma > 0.0) || !(xi0 > 0.0) || !(delta < xi_max) || !delta.is_finite() {
            return Err(ModelError::InvalidParameters(format!(
                "gamma={gamma} xi0={xi0} delta={delta} xi_max={xi_max}"
            )));
        }
        Ok(Self {
            gamma,
            xi0,
            delta,
            xi_max,
            n: 0,
            log_likelihood: f64::NAN,
            converged: true,
            iterations: 0,
            gradient_norm: 0.0,
        })
    }

    /// `e^ξ0`, the location expressed as an amount.
    pub fn location_amount(&self) -> f64 {
        self.xi0.exp()
    }

    /// `s` at the upper bound; `ln A = softplus(s_max)`.
    fn s_max(&self) -> f64 {
        self.gamma * (self.xi0.ln() - (self.xi_max - self.delta).ln())
    }
}

fn softplus(s: f64) -> f64 {
    if s > 0.0 {
        s + (-s).exp().ln_1p()
    } else {
        s.exp().ln_1p()
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Model CDF at amount `x` (currency units).
pub fn cdf(x: f64, fit: &DonationModelFit) -> Result<f64, ModelError> {
    if !(x > 0.0) {
        return Err(ModelError::InvalidParameters(format!(
            "cdf needs x > 0, got {x}"
        )));
    }
    let xi = x.ln();
    if xi <= fit.delta {
        return Ok(0.0);
    }
    if xi >= fit.xi_max {
        return Ok(1.0);
    }
    let s = fit.gamma * (fit.xi0.ln() - (xi - fit.delta).ln());
    Ok((softplus(fit.s_max()) - softplus(s)).exp().min(1.0))
}

/// Inverse CDF: `ln x = Δ + ξ0 (A/u - 1)^(-1/γ)`, for `u` in (0, 1].
pub fn quantile(u: f64, fit: &DonationModelFit) -> f64 {
    let u = u.clamp(MIN_UNIFORM, 1.0);
    // A/u - 1 = (1 - u + e^s_max) / u
    let w = (1.0 - u + fit.s_max().exp()).ln() - u.ln();
    let xi = fit.delta + fit.xi0 * (-w / fit.gamma).exp();
    xi.min(fit.xi_max).exp()
}

/// Log density at `x`, or `None` outside the open support.
pub fn log_density(x: f64, fit: &DonationModelFit) -> Option<f64> {
    if !(x > 0.0) {
        return None;
    }
    let xi = x.ln();
    if xi <= fit.delta || xi > fit.xi_max {
        return None;
    }
    let ln_z = (xi - fit.delta).ln();
    let s = fit.gamma * (fit.xi0.ln() - ln_z);
    Some(fit.gamma.ln() + softplus(fit.s_max()) - xi - ln_z + s - 2.0 * softplus(s))
}

/// Per-amount quantities reused across likelihood evaluations.
struct Prepared {
    ln_z: Vec<f64>,
    sum_ln_x: f64,
    sum_ln_z: f64,
    delta: f64,
    xi_max: f64,
}

impl Prepared {
    fn new(amounts: &[f64], delta: f64, xi_max: f64) -> Result<Self, ModelError> {
        let mut ln_z = Vec::with_capacity(amounts.len());
        let mut sum_ln_x = 0.0;
        for (index, &x) in amounts.iter().enumerate() {
            let xi = if x > 0.0 { x.ln() } else { f64::NEG_INFINITY };
            if !(xi > delta && xi <= xi_max) {
                return Err(ModelError::OutOfSupport { index, amount: x });
            }
            sum_ln_x += xi;
            ln_z.push((xi - delta).ln());
        }
        let sum_ln_z = ln_z.iter().sum();
        Ok(Self {
            ln_z,
            sum_ln_x,
            sum_ln_z,
            delta,
            xi_max,
        })
    }

    /// Log-likelihood and its gradient in (γ, ξ0).
    fn evaluate(&self, gamma: f64, xi0: f64) -> (f64, [f64; 2]) {
        let n = self.ln_z.len() as f64;
        let ln_xi0 = xi0.ln();
        let l_max = ln_xi0 - (self.xi_max - self.delta).ln();
        let s_max = gamma * l_max;
        let (sp_max, sig_max) = (softplus(s_max), logistic(s_max));

        let (mut sum_s, mut sum_sp, mut d_gamma, mut sum_sig) = (0.0, 0.0, 0.0, 0.0);
        for &lz in &self.ln_z {
            let l = ln_xi0 - lz;
            let s = gamma * l;
            let sig = logistic(s);
            sum_s += s;
            sum_sp += softplus(s);
            d_gamma += l * (1.0 - 2.0 * sig);
            sum_sig += sig;
        }
        let value =
            n * (gamma.ln() + sp_max) - self.sum_ln_x - self.sum_ln_z + sum_s - 2.0 * sum_sp;
        let grad_gamma = n / gamma + n * sig_max * l_max + d_gamma;
        let grad_xi0 = gamma / xi0 * (n * sig_max + n - 2.0 * sum_sig);
        (value, [grad_gamma, grad_xi0])
    }
}

fn to_units(amounts: &[Cents]) -> Vec<f64> {
    amounts.iter().map(|c| c.as_units()).collect()
}

/// `Σ ln f(x_i)` for amounts in currency units.
pub fn log_likelihood(
    amounts: &[f64],
    gamma: f64,
    xi0: f64,
    delta: f64,
    xi_max: f64,
) -> Result<f64, ModelError> {
    if !(gamma > 0.0) || !(xi0 > 0.0) {
        return Err(ModelError::InvalidParameters(format!(
            "gamma={gamma} xi0={xi0}"
        )));
    }
    Ok(Prepared::new(amounts, delta, xi_max)?
        .evaluate(gamma, xi0)
        .0)
}

/// Analytic gradient of [`log_likelihood`] with respect to (γ, ξ0).
pub fn log_likelihood_gradient(
    amounts: &[f64],
    gamma: f64,
    xi0: f64,
    delta: f64,
    xi_max: f64,
) -> Result<[f64; 2], ModelError> {
    if !(gamma > 0.0) || !(xi0 > 0.0) {
        return Err(ModelError::InvalidParameters(format!(
            "gamma={gamma} xi0={xi0}"
        )));
    }
    Ok(Prepared::new(amounts, delta, xi_max)?
        .evaluate(gamma, xi0)
        .1)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FitOptions {
    pub xi_max_rule: XiMaxRule,
    pub optimizer: OptimizerConfig,
}

/// The (ln γ, ln ξ0) objective handed to the optimizer.
fn log_space_objective(prepared: &Prepared) -> impl FnMut(&[f64]) -> FirstOrder + '_ {
    move |p: &[f64]| {
        let (gamma, xi0) = (p[0].exp(), p[1].exp());
        let (value, [dg, dx]) = prepared.evaluate(gamma, xi0);
        FirstOrder {
            value,
            gradient: vec![gamma * dg, xi0 * dx],
        }
    }
}

/// Upper log-bound for a data set under `rule`.
pub fn xi_max_for(amounts: &[Cents], rule: XiMaxRule) -> Option<f64> {
    let max = amounts.iter().max()?.as_units();
    Some(match rule {
        XiMaxRule::LogMaxPlusOne => max.ln() + 1.0,
        XiMaxRule::Literal => max + 1.0,
    })
}

/// Maximum-likelihood fit of (γ, ξ0) with Δ = ln 0.01 and ξmax per `options`.
///
/// Starts from γ = 2 and ξ0 at the median of `ln x - Δ`. A fit that stops
/// short of the gradient tolerance is returned with `converged = false`.
pub fn fit(amounts: &[Cents], options: &FitOptions) -> Result<DonationModelFit, ModelError> {
    let distinct = amounts.iter().any(|a| *a != amounts[0]);
    if amounts.len() < 2 || !distinct {
        return Err(ModelError::Degenerate(format!(
            "{} amounts, all equal",
            amounts.len()
        )));
    }
    let xi_max = xi_max_for(amounts, options.xi_max_rule).expect("non-empty");
    let prepared = Prepared::new(&to_units(amounts), DELTA, xi_max)?;

    let mut ln_z = prepared.ln_z.clone();
    ln_z.sort_by(f64::total_cmp);
    let mid = ln_z.len() / 2;
    let median_ln_z = if ln_z.len() % 2 == 0 {
        0.5 * (ln_z[mid - 1] + ln_z[mid])
    } else {
        ln_z[mid]
    };
    // ξ0 is a length on the ln z scale: start at median(ln x - Δ)
    let start = [2f64.ln(), median_ln_z.exp().ln()];

    let result = steepest_ascent(log_space_objective(&prepared), &start, &options.optimizer)?;
    Ok(DonationModelFit {
        gamma: result.point[0].exp(),
        xi0: result.point[1].exp(),
        delta: DELTA,
        xi_max,
        n: amounts.len(),
        log_likelihood: result.value,
        converged: result.converged,
        iterations: result.iterations,
        gradient_norm: result.gradient_norm,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SyntheticTag {
    Rand,
    Model,
}

impl SyntheticTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SyntheticTag::Rand => "Rand",
            SyntheticTag::Model => "Model",
        }
    }
}

/// One fitted component that contributed draws to a synthetic set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticComponent {
    pub label: String,
    pub fit: DonationModelFit,
    pub count: usize,
    pub stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSet {
    pub tag: SyntheticTag,
    pub seed: u64,
    pub components: Vec<SyntheticComponent>,
    #[serde(skip)]
    pub amounts: Vec<Cents>,
}

/// Stable 64-bit stream identifier for a label.
pub fn stream_id(label: &str) -> u64 {
    let digest = Md5::digest(label.as_bytes());
    u64::from_le_bytes(digest[..8].try_into().expect("16-byte digest"))
}

/// Cent bounds strictly inside `(e^Δ, e^ξmax]`.
fn cent_bounds(fit: &DonationModelFit) -> (u64, u64) {
    let lower = (fit.delta.exp() * 100.0 + 1e-9).floor() as u64 + 1;
    let upper_f = (fit.xi_max.exp() * 100.0).floor();
    let upper = if upper_f.is_finite() && upper_f < 1e17 {
        upper_f as u64
    } else {
        100_000_000_000_000_000
    };
    (lower, upper.max(lower))
}

fn draw(fit: &DonationModelFit, count: usize, seed: u64, stream: u64) -> Vec<Cents> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let (lower, upper) = cent_bounds(fit);
    (0..count)
        .map(|_| {
            let u: f64 = rng.random();
            let x = quantile(u, fit);
            let cents = (x * 100.0).round();
            let cents = if cents.is_finite() && cents < upper as f64 {
                cents as u64
            } else {
                upper
            };
            Cents(cents.clamp(lower, upper))
        })
        .collect()
}

/// Inverse-CDF sample of `count` amounts, rounded to cents. The draw is a
/// pure function of `(fit, count, seed, label)`.
pub fn sample(fit: &DonationModelFit, count: usize, seed: u64, label: &str) -> SyntheticSet {
    let stream = stream_id(label);
    SyntheticSet {
        tag: SyntheticTag::Rand,
        seed,
        components: vec![SyntheticComponent {
            label: label.to_string(),
            fit: *fit,
            count,
            stream,
        }],
        amounts: draw(fit, count, seed, stream),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub label: String,
    pub fit: DonationModelFit,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Controls {
    /// One set per input, same order.
    pub rand: Vec<SyntheticSet>,
    pub model: SyntheticSet,
}

/// Per-category Rand sets plus a combined Model set built from fresh
/// per-category draws. With a single category the Model set is the Rand set.
pub fn make_controls(inputs: &[ControlInput], seed: u64) -> Result<Controls, ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::Degenerate("no categories to combine".into()));
    }
    if let Some(bad) = inputs.iter().find(|c| !c.fit.converged) {
        return Err(ModelError::NotConverged {
            label: bad.label.clone(),
        });
    }
    let rand: Vec<SyntheticSet> = inputs
        .iter()
        .map(|c| sample(&c.fit, c.n, seed, &format!("{}/Rand", c.label)))
        .collect();
    let model = if inputs.len() == 1 {
        SyntheticSet {
            tag: SyntheticTag::Model,
            ..rand[0].clone()
        }
    } else {
        let mut components = Vec::new();
        let mut amounts = Vec::new();
        for c in inputs {
            let part = sample(&c.fit, c.n, seed, &format!("{}/Model", c.label));
            amounts.extend(part.amounts);
            components.extend(part.components);
        }
        SyntheticSet {
            tag: SyntheticTag::Model,
            seed,
            components,
            amounts,
        }
    };
    Ok(Controls { rand, model })
}

/// Write the sidecar metadata (tag, seed, components and their fits).
pub fn write_metadata(set: &SyntheticSet, path: &Path) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(&mut f, set)?;
    f.write_all(b"\n")
}
