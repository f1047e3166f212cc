//! Damped Gauss-Newton (Levenberg-Marquardt) with a central-difference
//! Jacobian, box bounds by projection, and Gauss-Newton covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A vector residual function `r(p)`; the engine minimizes `|r|^2 / 2`.
pub trait LeastSquaresProblem {
    fn n_params(&self) -> usize;
    fn n_residuals(&self) -> usize;
    fn residuals(&self, params: &[f64], out: &mut [f64]);

    fn param_names(&self) -> Vec<String> {
        (0..self.n_params()).map(|i| format!("p{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn unbounded(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    fn clamp(&self, p: &mut [f64]) {
        for (i, v) in p.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn contains(&self, p: &[f64]) -> bool {
        p.iter()
            .enumerate()
            .all(|(i, &v)| v >= self.lower[i] && v <= self.upper[i])
    }
}

#[derive(Debug, Clone)]
pub struct NllsOptions {
    pub max_iterations: usize,
    /// Stop once an accepted step lowers the cost by less than this fraction.
    pub ftol: f64,
    /// Stop once every Jacobian column is this close to orthogonal to the residual.
    pub gtol: f64,
    /// Typical magnitude of each parameter; sets the finite-difference step
    /// when a parameter is near zero. Defaults to 1.
    pub scale: Option<Vec<f64>>,
    pub bounds: Option<Bounds>,
}

impl Default for NllsOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            ftol: 1e-10,
            gtol: 1e-12,
            scale: None,
            bounds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub names: Vec<String>,
    pub params: Vec<f64>,
    pub stderr: Vec<f64>,
    pub residual_norm: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Largest `|J_j . r| / (|J_j| |r|)` at the solution.
    pub gradient_cosine: f64,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.params[i])
    }

    pub fn stderr_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.stderr[i])
    }

    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Flat `key=value` lines: each parameter, its `_stderr`, then the
    /// diagnostics.
    pub fn to_record(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (i, name) in self.names.iter().enumerate() {
            out.push((name.clone(), self.params[i].to_string()));
            out.push((format!("{name}_stderr"), self.stderr[i].to_string()));
        }
        out.push(("residual_norm".into(), self.residual_norm.to_string()));
        out.push(("converged".into(), self.converged.to_string()));
        out.push(("iterations".into(), self.iterations.to_string()));
        out
    }

    /// Rescale parameter `i` (and its standard error) by `factor`.
    pub(crate) fn rescale(&mut self, i: usize, factor: f64, offset: f64) {
        self.params[i] = self.params[i] * factor + offset;
        self.stderr[i] *= factor.abs();
    }
}

fn eval<P: LeastSquaresProblem>(problem: &P, p: &[f64]) -> DVector<f64> {
    let mut r = DVector::zeros(problem.n_residuals());
    problem.residuals(p, r.as_mut_slice());
    r
}

/// Central-difference Jacobian; one-sided next to a bound.
pub fn numerical_jacobian<P: LeastSquaresProblem>(
    problem: &P,
    params: &[f64],
    scale: Option<&[f64]>,
    bounds: Option<&Bounds>,
) -> DMatrix<f64> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    let step_rel = f64::EPSILON.cbrt();
    let mut jac = DMatrix::zeros(m, n);
    let mut p = params.to_vec();
    for j in 0..n {
        let typical = scale.map_or(1.0, |s| s[j]);
        let h = step_rel * params[j].abs().max(typical);
        let (lo, hi) = bounds.map_or((f64::NEG_INFINITY, f64::INFINITY), |b| {
            (b.lower[j], b.upper[j])
        });
        let (a, b) = if params[j] + h > hi {
            (params[j] - h, params[j])
        } else if params[j] - h < lo {
            (params[j], params[j] + h)
        } else {
            (params[j] - h, params[j] + h)
        };
        p[j] = b;
        let rb = eval(problem, &p);
        p[j] = a;
        let ra = eval(problem, &p);
        p[j] = params[j];
        let width = b - a;
        for i in 0..m {
            jac[(i, j)] = (rb[i] - ra[i]) / width;
        }
    }
    jac
}

fn gradient_cosine(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    jac.column_iter()
        .map(|col| {
            let cn = col.norm();
            if cn == 0.0 {
                0.0
            } else {
                col.dot(r).abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimize `|r(p)|^2` from `init`.
///
/// Non-convergence within `max_iterations` is reported through
/// [`FitResult::converged`]; a parameter with no influence on the residuals
/// is an error.
pub fn nlls<P: LeastSquaresProblem>(
    problem: &P,
    init: &[f64],
    options: &NllsOptions,
) -> Result<FitResult> {
    let n = problem.n_params();
    let m = problem.n_residuals();
    if init.len() != n {
        return Err(Error::InvalidInput(format!(
            "expected {n} initial parameters, got {}",
            init.len()
        )));
    }
    if m == 0 {
        return Err(Error::InvalidInput("no residuals".into()));
    }
    let bounds = options.bounds.clone().unwrap_or_else(|| Bounds::unbounded(n));
    if !bounds.contains(init) {
        return Err(Error::InvalidInput("initial parameters outside bounds".into()));
    }
    let scale = options.scale.as_deref();

    let mut p = init.to_vec();
    let mut r = eval(problem, &p);
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite residuals at the initial point".into()));
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda: Option<f64> = None;
    let mut nu = 2.0;
    let mut iterations = 0;
    let mut converged = false;

    'outer: for sweep in 0..options.max_iterations {
        let jac = numerical_jacobian(problem, &p, scale, Some(&bounds));
        if sweep == 0 && jac.column_iter().any(|c| c.iter().all(|&v| v == 0.0)) {
            return Err(Error::SingularJacobian);
        }
        if cost == 0.0 || gradient_cosine(&jac, &r) <= options.gtol {
            converged = true;
            break;
        }
        let a = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let max_diag = a.diagonal().max();
        let mut diag = a.diagonal();
        for d in diag.iter_mut() {
            *d = d.max(1e-20 * max_diag);
        }
        let lam = lambda.get_or_insert(1e-9);

        loop {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += *lam * diag[j];
            }
            let Some(chol) = damped.cholesky() else {
                *lam *= nu;
                nu *= 2.0;
                if *lam > 1e30 {
                    break 'outer;
                }
                continue;
            };
            let delta = chol.solve(&(-&g));
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            bounds.clamp(&mut trial);
            let step = DVector::from_iterator(n, trial.iter().zip(&p).map(|(a, b)| a - b));
            let negligible = step.iter().enumerate().all(|(j, &s)| {
                let typical = scale.map_or(1.0, |sc| sc[j]);
                s.abs() <= 1e-15 * p[j].abs().max(typical)
            });
            if negligible {
                // No representable step can lower the cost: a stationary point.
                converged = true;
                break 'outer;
            }
            let r_trial = eval(problem, &trial);
            let cost_trial = 0.5 * r_trial.norm_squared();
            if cost_trial.is_finite() && cost_trial < cost {
                let predicted = -(g.dot(&step) + 0.5 * step.dot(&(&a * &step)));
                let rho = if predicted > 0.0 {
                    (cost - cost_trial) / predicted
                } else {
                    1.0
                };
                *lam *= (1.0 / 3.0f64).max(1.0 - (2.0 * rho - 1.0).powi(3));
                nu = 2.0;
                let relative = (cost - cost_trial) / cost;
                p = trial;
                r = r_trial;
                cost = cost_trial;
                iterations += 1;
                if relative < options.ftol {
                    converged = true;
                    break 'outer;
                }
                break;
            }
            *lam *= nu;
            nu *= 2.0;
            if *lam > 1e30 {
                converged = true;
                break 'outer;
            }
        }
    }

    let mut jac = numerical_jacobian(problem, &p, scale, Some(&bounds));
    if converged {
        // Near the optimum the achievable cost decrease falls below the rounding
        // of the cost itself. Finish with Gauss-Newton steps judged by the
        // gradient instead, tolerating cost changes at the rounding level.
        let mut cosine = gradient_cosine(&jac, &r);
        for _ in 0..5 {
            if cosine <= options.gtol {
                break;
            }
            let a = jac.transpose() * &jac;
            let Some(chol) = a.cholesky() else { break };
            let delta = chol.solve(&(-(jac.transpose() * &r)));
            let mut trial: Vec<f64> = p.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
            bounds.clamp(&mut trial);
            let r_trial = eval(problem, &trial);
            let cost_trial = 0.5 * r_trial.norm_squared();
            if !(cost_trial <= cost * (1.0 + 1e-12)) {
                break;
            }
            let jac_trial = numerical_jacobian(problem, &trial, scale, Some(&bounds));
            let cos_trial = gradient_cosine(&jac_trial, &r_trial);
            if !(cos_trial < cosine) {
                break;
            }
            p = trial;
            r = r_trial;
            cost = cost_trial;
            jac = jac_trial;
            cosine = cos_trial;
        }
    }
    let a = jac.transpose() * &jac;
    let cov = a.try_inverse().ok_or(Error::SingularJacobian)?;
    let dof = m.saturating_sub(n).max(1) as f64;
    let variance = r.norm_squared() / dof;
    let stderr = (0..n)
        .map(|j| (cov[(j, j)] * variance).max(0.0).sqrt())
        .collect::<Vec<_>>();
    if stderr.iter().any(|s| !s.is_finite()) {
        return Err(Error::SingularJacobian);
    }
    Ok(FitResult {
        names: problem.param_names(),
        params: p,
        stderr,
        residual_norm: r.norm(),
        converged,
        iterations,
        gradient_cosine: gradient_cosine(&jac, &r),
    })
}

/// Scalar curve data with optional per-point weights multiplying each
/// residual (pass `1/σ_i` for inverse-variance weighting).
#[derive(Debug, Clone)]
pub struct CurveData<'a> {
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub weights: Option<&'a [f64]>,
}

impl<'a> CurveData<'a> {
    pub fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "x has {} samples but y has {}",
                x.len(),
                y.len()
            )));
        }
        if x.iter().chain(y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite data".into()));
        }
        Ok(Self { x, y, weights: None })
    }

    pub fn with_weights(mut self, weights: &'a [f64]) -> Result<Self> {
        if weights.len() != self.x.len() {
            return Err(Error::InvalidInput("weights length mismatch".into()));
        }
        self.weights = Some(weights);
        Ok(self)
    }
}

/// Adapts a scalar model `f(x, p)` to [`LeastSquaresProblem`].
pub struct CurveProblem<'a, F> {
    pub data: CurveData<'a>,
    pub model: F,
    pub names: Vec<String>,
}

impl<F: Fn(f64, &[f64]) -> f64> LeastSquaresProblem for CurveProblem<'_, F> {
    fn n_params(&self) -> usize {
        self.names.len()
    }

    fn n_residuals(&self) -> usize {
        self.data.x.len()
    }

    fn residuals(&self, params: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let w = self.data.weights.map_or(1.0, |w| w[i]);
            *o = w * ((self.model)(self.data.x[i], params) - self.data.y[i]);
        }
    }

    fn param_names(&self) -> Vec<String> {
        self.names.clone()
    }
}

/// Fit `model(x, p)` to `data`.
pub fn curve_fit<F: Fn(f64, &[f64]) -> f64>(
    model: F,
    names: &[&str],
    data: CurveData<'_>,
    init: &[f64],
    options: &NllsOptions,
) -> Result<FitResult> {
    let problem = CurveProblem {
        data,
        model,
        names: names.iter().map(|s| s.to_string()).collect(),
    };
    nlls(&problem, init, options)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_model_exact_in_two_iterations() {
        let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|&x| 3.0 * x - 2.0).collect();
        let fit = curve_fit(
            |x, p| p[0] * x + p[1],
            &["a", "b"],
            CurveData::new(&x, &y).unwrap(),
            &[0.0, 0.0],
            &NllsOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert!(fit.iterations <= 2, "{} iterations", fit.iterations);
        assert!((fit.params[0] - 3.0).abs() < 1e-12);
        assert!((fit.params[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn start_at_optimum_is_a_fixed_point() {
        let x: Vec<f64> = (0..30).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|&x| 1.5 * (-x / 0.7).exp()).collect();
        let fit = curve_fit(
            |x, p| p[0] * (-x / p[1]).exp(),
            &["amp", "tau"],
            CurveData::new(&x, &y).unwrap(),
            &[1.5, 0.7],
            &NllsOptions::default(),
        )
        .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 0);
        assert_eq!(fit.params, vec![1.5, 0.7]);
        assert!(fit.residual_norm < 1e-15);
    }

    #[test]
    fn unused_parameter_is_singular() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 2.0, 3.0, 4.0];
        let err = curve_fit(
            |x, p| p[0] * x + 1.0,
            &["a", "unused"],
            CurveData::new(&x, &y).unwrap(),
            &[0.5, 0.0],
            &NllsOptions::default(),
        )
        .unwrap_err();
        assert_eq!(err, Error::SingularJacobian);
    }

    #[test]
    fn bounds_are_respected() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|&x| 2.0 * x).collect();
        let fit = curve_fit(
            |x, p| p[0] * x,
            &["a"],
            CurveData::new(&x, &y).unwrap(),
            &[0.5],
            &NllsOptions {
                bounds: Some(Bounds {
                    lower: vec![0.0],
                    upper: vec![1.0],
                }),
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fit.params[0] <= 1.0);
        assert!((fit.params[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CurveData::new(&[1.0, 2.0], &[1.0]).is_err());
        assert!(CurveData::new(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
        let x = [0.0, 1.0];
        let y = [0.0, 1.0];
        assert!(curve_fit(
            |x, p| p[0] * x,
            &["a"],
            CurveData::new(&x, &y).unwrap(),
            &[5.0],
            &NllsOptions {
                bounds: Some(Bounds {
                    lower: vec![0.0],
                    upper: vec![1.0]
                }),
                ..Default::default()
            },
        )
        .is_err());
    }

    #[test]
    fn record_has_stderr_keys() {
        let fit = FitResult {
            names: vec!["alpha".into()],
            params: vec![0.17],
            stderr: vec![0.01],
            residual_norm: 0.0,
            converged: true,
            iterations: 3,
            gradient_cosine: 0.0,
        };
        let rec = fit.to_record();
        assert_eq!(rec[0], ("alpha".into(), "0.17".into()));
        assert_eq!(rec[1], ("alpha_stderr".into(), "0.01".into()));
        assert_eq!(fit.get("alpha"), Some(0.17));
        assert_eq!(fit.stderr_of("beta"), None);
    }
}
