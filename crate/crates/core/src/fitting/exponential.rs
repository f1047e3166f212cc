use serde::{Deserialize, Serialize};

use super::nlls::{curve_fit, Bounds, CurveData, FitResult, NllsOptions};
use crate::error::{Error, Result};

/// `y(t) = B + (A - B) exp(-(t - t0)/τ)`: relaxation from `A` at `t0` toward `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpDecayParams {
    pub a: f64,
    pub b: f64,
    pub t0: f64,
    pub tau: f64,
}

impl ExpDecayParams {
    pub fn eval(&self, t: f64) -> f64 {
        self.b + (self.a - self.b) * (-(t - self.t0) / self.tau).exp()
    }
}

/// Two-parameter fit of `B` and `τ` with `A` and `t0` held fixed.
pub fn exp_fit(t: &[f64], y: &[f64], t0: f64, a: f64) -> Result<(ExpDecayParams, FitResult)> {
    CurveData::new(t, y)?;
    if t.len() < 3 {
        return Err(Error::InvalidInput("exponential fit needs at least 3 samples".into()));
    }
    if !(t0.is_finite() && a.is_finite()) {
        return Err(Error::InvalidInput("t0 and A must be finite".into()));
    }
    if t.iter().any(|&t| t < t0) {
        return Err(Error::InvalidInput("samples before t0 are not allowed".into()));
    }
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    if hi - lo <= 1e-12 * scale {
        return Err(Error::Degenerate("constant trace"));
    }

    let t_end = t.iter().fold(t0, |m, &v| m.max(v));
    let width = t_end - t0;
    if width <= 0.0 {
        return Err(Error::Degenerate("zero-length time window"));
    }

    let mut order: Vec<usize> = (0..t.len()).collect();
    order.sort_by(|&i, &j| t[i].total_cmp(&t[j]));
    let tail = (t.len() / 10).max(1);
    let b0 = order[t.len() - tail..].iter().map(|&i| y[i]).sum::<f64>() / tail as f64;
    let target = (a - b0).abs() / std::f64::consts::E;
    let tau0 = order
        .iter()
        .find(|&&i| (y[i] - b0).abs() <= target)
        .map(|&i| t[i] - t0)
        .filter(|&v| v > 0.0)
        .unwrap_or(width / 3.0);

    let u: Vec<f64> = t.iter().map(|&t| (t - t0) / width).collect();
    let amp = (hi - lo).max(a.abs());
    let options = NllsOptions {
        scale: Some(vec![amp, 0.1]),
        bounds: Some(Bounds {
            lower: vec![f64::NEG_INFINITY, 1e-9],
            upper: vec![f64::INFINITY, 1e3],
        }),
        ..Default::default()
    };
    let mut fit = curve_fit(
        move |u, p| p[0] + (a - p[0]) * (-u / p[1]).exp(),
        &["B", "tau"],
        CurveData::new(&u, y)?,
        &[b0, (tau0 / width).clamp(1e-6, 1e2)],
        &options,
    )?;
    fit.rescale(1, width, 0.0);
    Ok((
        ExpDecayParams {
            a,
            b: fit.params[0],
            t0,
            tau: fit.params[1],
        },
        fit,
    ))
}
