use nalgebra::{DMatrix, DVector};

use super::{norm, NumericsError};

/// Largest Hessian condition number accepted before a Newton step is refused.
pub const MAX_HESSIAN_CONDITION: f64 = 1e12;

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub gradient_tolerance: f64,
    pub max_iterations: usize,
    pub initial_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            gradient_tolerance: 1e-8,
            max_iterations: 10_000,
            initial_step: 1.0,
        }
    }
}

impl OptimizerConfig {
    pub fn new(
        gradient_tolerance: f64,
        max_iterations: usize,
        initial_step: f64,
    ) -> Result<Self, NumericsError> {
        if !(gradient_tolerance > 0.0) {
            return Err(NumericsError::Domain(
                "gradient tolerance must be positive".into(),
            ));
        }
        if max_iterations == 0 {
            return Err(NumericsError::Domain("max iterations must be >= 1".into()));
        }
        if !(initial_step > 0.0) {
            return Err(NumericsError::Domain(
                "initial step must be positive".into(),
            ));
        }
        Ok(Self {
            gradient_tolerance,
            max_iterations,
            initial_step,
        })
    }
}

/// Objective value and gradient at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrder {
    pub value: f64,
    pub gradient: Vec<f64>,
}

/// Objective value, gradient and Hessian at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondOrder {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: DMatrix<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl NewtonResult {
    pub fn gradient_norm(&self) -> f64 {
        norm(&self.gradient)
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Acceptance rule for a trial point. Beyond the Armijo condition, a trial is
/// also accepted when the objective change is below rounding resolution and
/// the gradient shrinks; near the optimum of a large sum the objective alone
/// cannot resolve progress.
fn accept(f_old: f64, g_old_norm: f64, f_new: f64, g_new_norm: f64, predicted_gain: f64) -> bool {
    if f_new >= f_old + ARMIJO * predicted_gain {
        return true;
    }
    let resolution = 16.0 * f64::EPSILON * f_old.abs().max(1.0);
    f_new >= f_old - resolution && g_new_norm < g_old_norm
}

/// Gradient ascent with backtracking (step halving) line search.
///
/// Trial steps start from the Barzilai-Borwein length computed from the last
/// two iterates and are halved until the objective increases. Trial points
/// with a non-finite objective are treated as failed trials; a non-finite
/// value at the starting point is an error.
pub fn steepest_ascent<F>(
    mut objective: F,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<AscentResult, NumericsError>
where
    F: FnMut(&[f64]) -> FirstOrder,
{
    let start = objective(initial);
    check_dimension(initial.len(), start.gradient.len())?;
    if !start.value.is_finite() || !all_finite(&start.gradient) {
        return Err(NumericsError::NonFinite { iteration: 0 });
    }

    let mut x = initial.to_vec();
    let mut f = start.value;
    let mut g = start.gradient.clone();
    let mut step = config.initial_step;
    let mut previous: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < config.max_iterations {
        let g_norm = norm(&g);
        if g_norm < config.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let mut h = match &previous {
            Some((xp, gp)) => {
                let (mut ss, mut sy) = (0.0, 0.0);
                for i in 0..x.len() {
                    let s = x[i] - xp[i];
                    let y = g[i] - gp[i];
                    ss += s * s;
                    sy += s * y;
                }
                if sy < 0.0 && ss > 0.0 {
                    ss / -sy
                } else {
                    step * 2.0
                }
            }
            None => step,
        };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + h * gi).collect();
            let eval = objective(&trial);
            if eval.value.is_finite() && all_finite(&eval.gradient) {
                let gain = h * g_norm * g_norm;
                if accept(f, g_norm, eval.value, norm(&eval.gradient), gain) {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            h *= 0.5;
        }

        match accepted {
            Some((trial, eval)) => {
                previous = Some((
                    std::mem::replace(&mut x, trial),
                    std::mem::replace(&mut g, eval.gradient),
                ));
                f = eval.value;
                step = h;
            }
            // line search exhausted: no representable ascent along the gradient
            None => break,
        }
    }

    if f < start.value {
        return Ok(AscentResult {
            point: initial.to_vec(),
            value: start.value,
            gradient_norm: norm(&start.gradient),
            iterations,
            converged: false,
        });
    }
    let gradient_norm = norm(&g);
    Ok(AscentResult {
        point: x,
        value: f,
        gradient_norm,
        iterations,
        converged: converged || gradient_norm < config.gradient_tolerance,
    })
}

/// Condition number of a symmetric matrix from its eigenvalues.
pub fn symmetric_condition(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigen();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for &l in eig.eigenvalues.iter() {
        lo = lo.min(l.abs());
        hi = hi.max(l.abs());
    }
    if lo == 0.0 || !lo.is_finite() {
        f64::INFINITY
    } else {
        hi / lo
    }
}

/// Newton-Raphson maximization with a step-halving safeguard.
///
/// Returns the Hessian at the final point so callers can form the inverse
/// observed information.
pub fn newton_raphson_mle<F>(
    mut objective: F,
    initial: &[f64],
    config: &OptimizerConfig,
) -> Result<NewtonResult, NumericsError>
where
    F: FnMut(&[f64]) -> SecondOrder,
{
    let dim = initial.len();
    let mut x = initial.to_vec();
    let mut cur = objective(&x);
    check_dimension(dim, cur.gradient.len())?;
    if cur.hessian.nrows() != dim || cur.hessian.ncols() != dim {
        return Err(NumericsError::Dimension {
            expected: dim,
            got: cur.hessian.nrows(),
        });
    }
    if !cur.value.is_finite() || !all_finite(&cur.gradient) || !all_finite(cur.hessian.as_slice()) {
        return Err(NumericsError::NonFinite { iteration: 0 });
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iterations {
        let g_norm = norm(&cur.gradient);
        if g_norm < config.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;

        let condition = symmetric_condition(&cur.hessian);
        if !(condition <= MAX_HESSIAN_CONDITION) {
            return Err(NumericsError::SingularHessian {
                iteration: iterations,
                condition,
            });
        }
        let g = DVector::from_column_slice(&cur.gradient);
        let mut direction = match cur.hessian.clone().lu().solve(&(-&g)) {
            Some(d) => d,
            None => {
                return Err(NumericsError::SingularHessian {
                    iteration: iterations,
                    condition,
                })
            }
        };
        // not an ascent direction (indefinite Hessian): fall back to the gradient
        if direction.dot(&g) <= 0.0 {
            direction = g.clone() * config.initial_step;
        }

        let mut h = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x
                .iter()
                .zip(direction.iter())
                .map(|(xi, di)| xi + h * di)
                .collect();
            let eval = objective(&trial);
            if eval.value.is_finite()
                && all_finite(&eval.gradient)
                && all_finite(eval.hessian.as_slice())
            {
                let gain = h * direction.dot(&g);
                if accept(cur.value, g_norm, eval.value, norm(&eval.gradient), gain) {
                    accepted = Some((trial, eval));
                    break;
                }
            }
            h *= 0.5;
        }
        match accepted {
            Some((trial, eval)) => {
                x = trial;
                cur = eval;
            }
            None => break,
        }
    }

    let converged = converged || norm(&cur.gradient) < config.gradient_tolerance;
    Ok(NewtonResult {
        point: x,
        value: cur.value,
        gradient: cur.gradient,
        hessian: cur.hessian,
        iterations,
        converged,
    })
}

fn check_dimension(expected: usize, got: usize) -> Result<(), NumericsError> {
    if expected != got {
        return Err(NumericsError::Dimension { expected, got });
    }
    Ok(())
}
