use super::NumericsError;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

const MAX_TERMS: usize = 100_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Upper regularized incomplete gamma function `Q(a, x) = Γ(a, x) / Γ(a)`.
///
/// Uses the power series for `P` when `x < a + 1` and a Lentz continued
/// fraction for `Q` otherwise.
pub fn regularized_gamma_upper(a: f64, x: f64) -> Result<f64, NumericsError> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(NumericsError::Domain(format!(
            "shape a must be positive, got {a}"
        )));
    }
    if !(x >= 0.0) {
        return Err(NumericsError::Domain(format!(
            "x must be non-negative, got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let p = lower_series(a, x) * log_prefactor.exp();
        Ok((1.0 - p).clamp(0.0, 1.0))
    } else {
        let q = upper_continued_fraction(a, x) * log_prefactor.exp();
        Ok(q.clamp(0.0, 1.0))
    }
}

/// Σ x^n / (a (a+1) ... (a+n)), without the `x^a e^-x / Γ(a)` prefactor.
fn lower_series(a: f64, x: f64) -> f64 {
    let mut denom = a;
    let mut term = 1.0 / a;
    let mut sum = term;
    for _ in 0..MAX_TERMS {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Modified Lentz evaluation of the continued fraction for Γ(a, x).
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_TERMS {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// A χ² statistic together with its degrees of freedom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareParams {
    statistic: f64,
    dof: u32,
}

impl ChiSquareParams {
    pub fn new(statistic: f64, dof: u32) -> Result<Self, NumericsError> {
        if !(statistic >= 0.0) {
            return Err(NumericsError::Domain(format!(
                "chi-squared statistic must be non-negative, got {statistic}"
            )));
        }
        if dof == 0 {
            return Err(NumericsError::Domain(
                "degrees of freedom must be >= 1".into(),
            ));
        }
        Ok(Self { statistic, dof })
    }

    pub fn statistic(&self) -> f64 {
        self.statistic
    }

    pub fn dof(&self) -> u32 {
        self.dof
    }
}

/// Survival function of the χ² distribution: `Q(dof/2, statistic/2)`.
pub fn chi2_sf(params: ChiSquareParams) -> Result<f64, NumericsError> {
    regularized_gamma_upper(f64::from(params.dof) / 2.0, params.statistic / 2.0)
}
