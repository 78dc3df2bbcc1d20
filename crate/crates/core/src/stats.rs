//! Descriptive statistics of donation sets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::Cents;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("empty donation set")]
    Empty,
    #[error("non-positive amount at position {0}")]
    NonPositive(usize),
}

/// Min, max, total are exact; mean and standard deviation are in currency
/// units. The standard deviation uses the sample (n - 1) denominator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveStats {
    pub n: usize,
    pub total: Cents,
    pub min: Option<Cents>,
    pub max: Option<Cents>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

pub fn describe(amounts: &[Cents]) -> DescriptiveStats {
    let n = amounts.len();
    let total: Cents = amounts.iter().copied().sum();
    if n == 0 {
        return DescriptiveStats {
            n,
            total,
            min: None,
            max: None,
            mean: None,
            std: None,
        };
    }
    let min = amounts.iter().min().copied();
    let max = amounts.iter().max().copied();
    let sum = i128::from(total.value());
    let sum_sq: i128 = amounts.iter().map(|a| i128::from(a.value()).pow(2)).sum();
    let mean = total.value() as f64 / n as f64 / 100.0;
    // n Σx² - (Σx)² is exact in i128 for any realistic set of cent amounts
    let std = (n > 1).then(|| {
        let n = n as i128;
        let numerator = n * sum_sq - sum * sum;
        ((numerator as f64) / ((n * (n - 1)) as f64)).sqrt() / 100.0
    });
    DescriptiveStats {
        n,
        total,
        min,
        max,
        mean: Some(mean),
        std,
    }
}

/// Empirical cumulative distribution against `ln(amount)` in currency
/// units. Tied amounts collapse into one step.
pub fn cumulative_curve(amounts: &[Cents]) -> Result<Vec<(f64, f64)>, StatsError> {
    if amounts.is_empty() {
        return Err(StatsError::Empty);
    }
    if let Some(i) = amounts.iter().position(|a| a.value() == 0) {
        return Err(StatsError::NonPositive(i));
    }
    let mut sorted = amounts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let mut curve: Vec<(f64, f64)> = Vec::new();
    for (i, a) in sorted.iter().enumerate() {
        if i + 1 < n && sorted[i + 1] == *a {
            continue;
        }
        let fraction = if i + 1 == n {
            1.0
        } else {
            (i + 1) as f64 / n as f64
        };
        curve.push((a.as_units().ln(), fraction));
    }
    Ok(curve)
}
