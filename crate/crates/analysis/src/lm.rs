//! Levenberg-Marquardt nonlinear least squares.
//!
//! The solver works on an arbitrary residual vector `r(p)` and minimises
//! `|r|^2`. Jacobians are forward differences with step
//! `sqrt(eps) * max(1, |p_j|)`. Damping is Marquardt-style
//! (`J^T J + lambda * diag(J^T J)`), solved in the column-scaled basis so that
//! parameters of wildly different magnitude (GHz frequencies next to radians)
//! share one well-conditioned system.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::FitError;

const MAX_LAMBDA: f64 = 1e16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_lambda: f64,
    /// Stop when every component satisfies `|dp_j| < tol * |p_j|`.
    pub step_tolerance: f64,
    /// Stop when the relative decrease of the SSR falls below this.
    pub ssr_tolerance: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_lambda: 1e-3,
            step_tolerance: 1e-10,
            ssr_tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct NllsFit {
    pub params: Vec<f64>,
    /// `s^2 (J^T J)^-1` with `s^2 = SSR / (n - p)`.
    pub covariance: DMatrix<f64>,
    pub residual_rms: f64,
    pub ssr: f64,
    pub iterations: usize,
}

impl NllsFit {
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.params.len())
            .map(|i| self.covariance[(i, i)].max(0.0).sqrt())
            .collect()
    }
}

fn ssr_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn all_finite(r: &[f64]) -> bool {
    r.iter().all(|v| v.is_finite())
}

/// Forward-difference Jacobian of `residuals` at `p`, given `r0 = residuals(p)`.
pub fn forward_jacobian<F>(residuals: &F, p: &[f64], r0: &[f64]) -> Result<DMatrix<f64>, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let h_base = f64::EPSILON.sqrt();
    let mut jac = DMatrix::zeros(r0.len(), p.len());
    let mut probe = p.to_vec();
    for j in 0..p.len() {
        let h = h_base * p[j].abs().max(1.0);
        probe[j] = p[j] + h;
        // use the representable step, not the nominal one
        let step = probe[j] - p[j];
        let r = residuals(&probe);
        if r.len() != r0.len() {
            return Err(FitError::InvalidInput(format!(
                "residual length changed from {} to {}",
                r0.len(),
                r.len()
            )));
        }
        if !all_finite(&r) {
            return Err(FitError::Domain(format!("jacobian probe of parameter {j}")));
        }
        for (i, (a, b)) in r.iter().zip(r0).enumerate() {
            jac[(i, j)] = (a - b) / step;
        }
        probe[j] = p[j];
    }
    Ok(jac)
}

struct Normal {
    scale: DVector<f64>,
    scaled: DMatrix<f64>,
    gradient: DVector<f64>,
}

fn normal_equations(jac: &DMatrix<f64>, r: &[f64]) -> Result<Normal, FitError> {
    let jtj = jac.transpose() * jac;
    let jtr = jac.transpose() * DVector::from_column_slice(r);
    let n = jtj.nrows();
    let mut scale = DVector::zeros(n);
    for i in 0..n {
        let d = jtj[(i, i)];
        if d <= 0.0 || !d.is_finite() {
            // parameter i has no influence on the residuals
            return Err(FitError::Singular);
        }
        scale[i] = d.sqrt();
    }
    let mut scaled = jtj;
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] /= scale[i] * scale[j];
        }
    }
    let gradient = jtr.component_div(&scale);
    Ok(Normal {
        scale,
        scaled,
        gradient,
    })
}

fn covariance(jac: &DMatrix<f64>, ssr: f64, n_obs: usize) -> Result<DMatrix<f64>, FitError> {
    let n_par = jac.ncols();
    let normal = normal_equations(jac, &vec![0.0; jac.nrows()])?;
    let chol = Cholesky::<f64, Dyn>::new(normal.scaled).ok_or(FitError::Singular)?;
    let mut inv = chol.inverse();
    for i in 0..n_par {
        for j in 0..n_par {
            inv[(i, j)] /= normal.scale[i] * normal.scale[j];
        }
    }
    if inv.iter().any(|v| !v.is_finite()) {
        return Err(FitError::Singular);
    }
    let dof = n_obs.saturating_sub(n_par).max(1) as f64;
    Ok(inv * (ssr / dof))
}

/// Minimise `|residuals(p)|^2` starting from `p0`.
pub fn nlls<F>(residuals: F, p0: &[f64], opts: &LmOptions) -> Result<NllsFit, FitError>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if p0.is_empty() {
        return Err(FitError::InvalidInput("no parameters".into()));
    }
    let mut p = p0.to_vec();
    let mut r = residuals(&p);
    if r.len() <= p.len() {
        return Err(FitError::InsufficientData {
            needed: p.len() + 1,
            got: r.len(),
        });
    }
    if !all_finite(&r) || !all_finite(&p) {
        return Err(FitError::Domain("initial point".into()));
    }
    let mut ssr = ssr_of(&r);
    let mut lambda = opts.initial_lambda;
    let mut iterations = 0;
    let mut jac = forward_jacobian(&residuals, &p, &r)?;

    'outer: while iterations < opts.max_iterations && ssr > 0.0 {
        iterations += 1;
        let normal = normal_equations(&jac, &r)?;
        let n = p.len();
        loop {
            let mut damped = normal.scaled.clone();
            for i in 0..n {
                damped[(i, i)] += lambda;
            }
            let Some(chol) = Cholesky::<f64, Dyn>::new(damped) else {
                lambda *= 10.0;
                if lambda > MAX_LAMBDA {
                    return Err(FitError::Singular);
                }
                continue;
            };
            let y = chol.solve(&(-&normal.gradient));
            let delta = y.component_div(&normal.scale);
            let trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, d)| a + d).collect();
            let r_trial = residuals(&trial);
            let ssr_trial = if all_finite(&r_trial) && r_trial.len() == r.len() {
                ssr_of(&r_trial)
            } else {
                f64::INFINITY
            };
            if ssr_trial < ssr {
                let small_step = p
                    .iter()
                    .zip(delta.iter())
                    .all(|(pi, di)| di.abs() < opts.step_tolerance * pi.abs());
                let small_gain = (ssr - ssr_trial) / ssr < opts.ssr_tolerance;
                p = trial;
                r = r_trial;
                ssr = ssr_trial;
                lambda = (lambda / 10.0).max(1e-300);
                jac = forward_jacobian(&residuals, &p, &r)?;
                if small_step || small_gain {
                    break 'outer;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > MAX_LAMBDA {
                // no descent direction left: we are at the minimum to machine precision
                break 'outer;
            }
        }
    }

    let covariance = covariance(&jac, ssr, r.len())?;
    Ok(NllsFit {
        residual_rms: (ssr / r.len() as f64).sqrt(),
        params: p,
        covariance,
        ssr,
        iterations,
    })
}

/// Curve-fitting convenience: residuals are `model(p, x_i) - y_i`.
pub fn nlls_curve<M>(model: M, p0: &[f64], x: &[f64], y: &[f64], opts: &LmOptions) -> Result<NllsFit, FitError>
where
    M: Fn(&[f64], f64) -> f64,
{
    if x.len() != y.len() {
        return Err(FitError::InvalidInput(format!(
            "x has {} points but y has {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() <= p0.len() {
        return Err(FitError::InsufficientData {
            needed: p0.len() + 1,
            got: x.len(),
        });
    }
    nlls(
        |p: &[f64]| x.iter().zip(y).map(|(&xi, &yi)| model(p, xi) - yi).collect(),
        p0,
        opts,
    )
}
