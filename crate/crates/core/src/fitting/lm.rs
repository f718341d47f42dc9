//! Levenberg–Marquardt solver with box constraints enforced by projection.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// A nonlinear least-squares problem `min sum r_i(p)^2`.
pub trait LeastSquaresProblem {
    fn residual_count(&self) -> usize;

    fn residuals(&self, params: &[f64], out: &mut [f64]);

    /// Jacobian `d r_i / d p_j`, row-major in `(i, j)`. The default uses
    /// central differences.
    fn jacobian(&self, params: &[f64], jac: &mut DMatrix<f64>) {
        let m = self.residual_count();
        let mut p = params.to_vec();
        let mut plus = vec![0.0; m];
        let mut minus = vec![0.0; m];
        for j in 0..params.len() {
            let h = f64::EPSILON.cbrt() * params[j].abs().max(1.0);
            p[j] = params[j] + h;
            self.residuals(&p, &mut plus);
            p[j] = params[j] - h;
            self.residuals(&p, &mut minus);
            p[j] = params[j];
            for i in 0..m {
                jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
            }
        }
    }
}

/// Residuals given by a closure writing into a buffer of fixed length.
pub struct FnProblem<F> {
    len: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnProblem<F> {
    pub fn new(len: usize, f: F) -> Self {
        Self { len, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> LeastSquaresProblem for FnProblem<F> {
    fn residual_count(&self) -> usize {
        self.len
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        (self.f)(params, out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub initial_damping: f64,
    pub damping_factor: f64,
    /// Converged once `|dp| / |p|` drops below this.
    pub step_tolerance: f64,
    /// Converged once the relative decrease of the squared residual drops below this.
    pub residual_tolerance: f64,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            initial_damping: 1e-3,
            damping_factor: 10.0,
            step_tolerance: 1e-10,
            residual_tolerance: 1e-12,
            lower: None,
            upper: None,
        }
    }
}

const MAX_DAMPING: f64 = 1e16;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub parameters: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residual_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
    /// Residual norm after the initial point and every accepted step.
    #[serde(skip)]
    pub residual_history: Vec<f64>,
}

fn project(p: &mut [f64], opts: &LmOptions) {
    if let Some(lo) = &opts.lower {
        for (x, &l) in p.iter_mut().zip(lo) {
            *x = x.max(l);
        }
    }
    if let Some(hi) = &opts.upper {
        for (x, &h) in p.iter_mut().zip(hi) {
            *x = x.min(h);
        }
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}

/// Minimises `problem` starting from `initial`.
///
/// Hitting the iteration limit or a singular system is not an error: the
/// best parameters found are returned with `converged = false` and a
/// diagnostic. Errors are reserved for unusable input.
pub fn nlls_solve<P: LeastSquaresProblem + ?Sized>(problem: &P, initial: &[f64], opts: &LmOptions) -> Result<FitResult> {
    let m = problem.residual_count();
    let n = initial.len();
    if m == 0 {
        return Err(Error::InsufficientData("no residuals to fit".into()));
    }
    if n == 0 {
        return Err(Error::InvalidInput("no parameters to fit".into()));
    }
    for b in [&opts.lower, &opts.upper].into_iter().flatten() {
        if b.len() != n {
            return Err(Error::InvalidInput("bounds length differs from parameter count".into()));
        }
    }

    let mut p = initial.to_vec();
    if p.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("initial parameters"));
    }
    project(&mut p, opts);
    let mut r = vec![0.0; m];
    problem.residuals(&p, &mut r);
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("residuals at the initial point"));
    }
    let mut cost = sum_sq(&r);
    let mut history = vec![cost.sqrt()];
    let mut jac = DMatrix::zeros(m, n);
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut damping = opts.initial_damping;
    let mut converged = cost == 0.0;
    let mut diagnostic = None;
    let mut iterations = 0;

    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        problem.jacobian(&p, &mut jac);
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let grad = &jt * DVector::from_column_slice(&r);

        let mut accepted = false;
        loop {
            let mut system = jtj.clone();
            for j in 0..n {
                system[(j, j)] += damping * jtj[(j, j)];
            }
            let step = match system.cholesky() {
                Some(ch) => ch.solve(&(-&grad)),
                None => {
                    damping *= opts.damping_factor;
                    if damping > MAX_DAMPING {
                        diagnostic = Some("singular normal equations".to_string());
                        break;
                    }
                    continue;
                }
            };
            for j in 0..n {
                trial[j] = p[j] + step[j];
            }
            project(&mut trial, opts);
            let step_norm = p.iter().zip(&trial).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let rel_step = step_norm / (norm(&p) + f64::EPSILON);

            problem.residuals(&trial, &mut r_trial);
            let trial_cost = sum_sq(&r_trial);
            if trial_cost.is_finite() && trial_cost < cost {
                let rel_decrease = (cost - trial_cost) / cost;
                std::mem::swap(&mut p, &mut trial);
                std::mem::swap(&mut r, &mut r_trial);
                cost = trial_cost;
                history.push(cost.sqrt());
                damping = (damping / opts.damping_factor).max(f64::MIN_POSITIVE);
                accepted = true;
                if rel_step < opts.step_tolerance || rel_decrease < opts.residual_tolerance || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            // No descent even for a negligible step: already at the minimum.
            if rel_step < opts.step_tolerance {
                converged = true;
                break;
            }
            damping *= opts.damping_factor;
            if damping > MAX_DAMPING {
                diagnostic = Some("damping exceeded its limit without reducing the residual".to_string());
                break;
            }
        }
        if !accepted && !converged {
            break;
        }
    }
    if !converged && diagnostic.is_none() {
        diagnostic = Some(format!("no convergence after {} iterations", opts.max_iterations));
    }

    problem.jacobian(&p, &mut jac);
    let dof = m.saturating_sub(n).max(1) as f64;
    let variance = cost / dof;
    let jtj = jac.transpose() * &jac;
    let standard_errors = match jtj.cholesky() {
        Some(ch) => {
            let cov = ch.inverse();
            (0..n).map(|j| (cov[(j, j)].max(0.0) * variance).sqrt()).collect()
        }
        None => {
            if diagnostic.is_none() {
                diagnostic = Some("covariance is singular; standard errors unavailable".to_string());
            }
            vec![f64::INFINITY; n]
        }
    };

    Ok(FitResult {
        parameters: p,
        standard_errors,
        residual_norm: cost.sqrt(),
        iterations,
        converged,
        diagnostic,
        residual_history: history,
    })
}
