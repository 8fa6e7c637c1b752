//! Levenberg-Marquardt minimization of a sum of squared residuals with a
//! finite-difference Jacobian.
//!
//! The residual function returns already-weighted residuals `(model - data)/σ`
//! and `None` for parameters outside its domain; such trial steps are
//! rejected and the damping raised.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmConfig {
    /// Stop when an accepted step lowers χ² by less than this fraction.
    pub rel_chi2_tol: f64,
    /// Stop when `max |Jᵀr|` drops below this.
    pub gradient_tol: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_limit: f64,
    /// Central-difference step relative to `max(|p|, 1)`.
    pub fd_step: f64,
}

impl Default for LmConfig {
    fn default() -> Self {
        Self {
            rel_chi2_tol: 1e-10,
            gradient_tol: 1e-8,
            max_iterations: 500,
            initial_damping: 1e-4,
            damping_limit: 1e12,
            fd_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Chi2Decrease,
    Gradient,
    StepSize,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LmReport {
    pub iterations: usize,
    pub final_gradient_norm: f64,
    pub damping: f64,
    pub criterion: Convergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmSolution {
    pub params: Vec<f64>,
    pub chi2: f64,
    /// `(JᵀJ)⁻¹` at the solution, row-major `n × n`.
    pub covariance: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub report: LmReport,
}

fn evaluate<F>(f: &F, p: &DVector<f64>) -> Option<DVector<f64>>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let r = f(p.as_slice())?;
    if r.iter().all(|v| v.is_finite()) {
        Some(DVector::from_vec(r))
    } else {
        None
    }
}

fn jacobian<F>(f: &F, p: &DVector<f64>, r0: &DVector<f64>, step: f64) -> DMatrix<f64>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    for j in 0..p.len() {
        let h = step * p[j].abs().max(1.0);
        let mut fwd = p.clone();
        fwd[j] += h;
        let mut bwd = p.clone();
        bwd[j] -= h;
        let column = match (evaluate(f, &fwd), evaluate(f, &bwd)) {
            (Some(rf), Some(rb)) => (rf - rb) / (2.0 * h),
            (Some(rf), None) => (rf - r0) / h,
            (None, Some(rb)) => (r0 - rb) / h,
            (None, None) => DVector::zeros(r0.len()),
        };
        jac.set_column(j, &column);
    }
    jac
}

fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Minimizes `Σ r_i(p)²` from `initial`.
pub fn levenberg_marquardt<F>(
    residuals: F,
    initial: &[f64],
    config: &LmConfig,
) -> Result<LmSolution>
where
    F: Fn(&[f64]) -> Option<Vec<f64>>,
{
    let mut p = DVector::from_column_slice(initial);
    let mut r = evaluate(&residuals, &p)
        .ok_or_else(|| Error::invalid("initial parameters", "outside the model domain"))?;
    if r.len() < p.len() {
        return Err(Error::invalid(
            "residuals",
            "fewer residuals than parameters",
        ));
    }
    let mut chi2 = r.norm_squared();
    let mut damping = config.initial_damping;

    let mut outcome = None;
    let mut gradient_norm = f64::INFINITY;
    for iteration in 0..config.max_iterations {
        let jac = jacobian(&residuals, &p, &r, config.fd_step);
        let gradient = jac.tr_mul(&r);
        let normal = jac.tr_mul(&jac);
        gradient_norm = gradient.amax();
        if gradient_norm < config.gradient_tol {
            outcome = Some((iteration, Convergence::Gradient));
            break;
        }

        loop {
            let mut damped = normal.clone();
            for i in 0..p.len() {
                damped[(i, i)] += damping * normal[(i, i)].max(f64::MIN_POSITIVE);
            }
            let step = match damped.clone().cholesky() {
                Some(chol) => chol.solve(&(-&gradient)),
                None => {
                    damping *= 10.0;
                    if damping > config.damping_limit {
                        return Err(Error::SingularNormalEquations {
                            condition: condition_estimate(&damped),
                        });
                    }
                    continue;
                }
            };

            if step.amax() <= 1e-15 * p.amax().max(1.0) {
                outcome = Some((iteration + 1, Convergence::StepSize));
                break;
            }

            let trial = &p + &step;
            match evaluate(&residuals, &trial) {
                Some(r_trial) if r_trial.norm_squared() <= chi2 => {
                    let chi2_trial = r_trial.norm_squared();
                    let decrease = chi2 - chi2_trial;
                    p = trial;
                    r = r_trial;
                    let previous = chi2;
                    chi2 = chi2_trial;
                    damping = (damping / 10.0).max(1e-15);
                    if chi2 == 0.0 || decrease <= config.rel_chi2_tol * previous {
                        outcome = Some((iteration + 1, Convergence::Chi2Decrease));
                    }
                    break;
                }
                _ => {
                    damping *= 10.0;
                    if damping > config.damping_limit {
                        return Err(Error::DampingOverflow {
                            limit: config.damping_limit,
                        });
                    }
                }
            }
        }
        if outcome.is_some() {
            break;
        }
    }

    let (iterations, criterion) = outcome.ok_or(Error::MaxIterations {
        iterations: config.max_iterations,
    })?;

    let jac = jacobian(&residuals, &p, &r, config.fd_step);
    let normal = jac.tr_mul(&jac);
    let covariance = normal
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::SingularNormalEquations {
            condition: condition_estimate(&normal),
        })?;

    Ok(LmSolution {
        params: p.as_slice().to_vec(),
        chi2,
        covariance,
        residuals: r.as_slice().to_vec(),
        report: LmReport {
            iterations,
            final_gradient_norm: gradient_norm,
            damping,
            criterion,
        },
    })
}
