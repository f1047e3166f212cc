//! Fit of participation ratio `α` and critical temperature `T_c` to
//! temperature sweeps of `δf/f` and `δ(1/Q_i)`.

use log::warn;
use serde::{Deserialize, Serialize};

use super::nlls::{nlls, Bounds, FitResult, LeastSquaresProblem, NllsOptions};
use crate::error::{Error, Result};
use crate::mattis_bardeen::BCS_GAP_RATIO;
use crate::resonator::shifts_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MbFitMode {
    /// Both channels in one least-squares problem.
    Joint,
    /// `δf/f` only.
    Frequency,
    /// `δ(1/Q_i)` only.
    Loss,
    /// Each channel separately, then the mean of the two estimates.
    Averaged,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MbWeighting {
    Uniform,
    /// Residuals divided by `|y|` (floored at 1e-3 of the channel maximum),
    /// the natural choice for multiplicative noise.
    Relative,
    /// Per-point standard deviations for each channel.
    InverseVariance { sigma_dff: Vec<f64>, sigma_dinvq: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbFitOptions {
    /// Frequency at which the conductivity is evaluated.
    pub f_res: f64,
    /// Reference temperature of the shifts; `None` uses the coldest point.
    pub t_ref: Option<f64>,
    pub mode: MbFitMode,
    pub weighting: MbWeighting,
}

impl MbFitOptions {
    pub fn new(f_res: f64) -> Self {
        Self {
            f_res,
            t_ref: None,
            mode: MbFitMode::Averaged,
            weighting: MbWeighting::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MbWarning {
    /// The sweep stops below `0.4 T_c`, where `α` and `T_c` are strongly correlated.
    InsufficientTemperatureRange { t_max: f64, tc: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MbFitResult {
    pub alpha: f64,
    pub tc: f64,
    pub alpha_stderr: f64,
    pub tc_stderr: f64,
    /// Summary record with parameters `alpha` and `T_c`.
    pub fit: FitResult,
    /// Underlying fits: one, or two in averaged mode (frequency, then loss).
    pub channel_fits: Vec<FitResult>,
    pub warnings: Vec<MbWarning>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Channel {
    Freq,
    Loss,
}

struct MbProblem<'a> {
    t: &'a [f64],
    t_ref: f64,
    f_res: f64,
    channels: Vec<(Channel, &'a [f64], Vec<f64>)>,
}

impl LeastSquaresProblem for MbProblem<'_> {
    fn n_params(&self) -> usize {
        2
    }

    fn n_residuals(&self) -> usize {
        self.channels.len() * self.t.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let n = self.t.len();
        for (i, &t) in self.t.iter().enumerate() {
            let (dff, dinvq) = shifts_unchecked(t, self.t_ref, p[0], p[1], self.f_res);
            for (c, (channel, y, w)) in self.channels.iter().enumerate() {
                let model = match channel {
                    Channel::Freq => dff,
                    Channel::Loss => dinvq,
                };
                out[c * n + i] = w[i] * (model - y[i]);
            }
        }
    }

    fn param_names(&self) -> Vec<String> {
        vec!["alpha".into(), "T_c".into()]
    }
}

fn weights(y: &[f64], sigma: Option<&[f64]>, weighting: &MbWeighting, joint: bool) -> Result<Vec<f64>> {
    let max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if max == 0.0 {
        return Err(Error::Degenerate("shift channel is identically zero"));
    }
    Ok(match weighting {
        // Joint fits put both channels on a common scale.
        MbWeighting::Uniform => vec![if joint { 1.0 / max } else { 1.0 }; y.len()],
        MbWeighting::Relative => y.iter().map(|v| 1.0 / v.abs().max(1e-3 * max)).collect(),
        MbWeighting::InverseVariance { .. } => {
            let sigma = sigma.unwrap();
            if sigma.len() != y.len() || sigma.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::InvalidInput("sigma must be positive, one per point".into()));
            }
            sigma.iter().map(|s| 1.0 / s).collect()
        }
    })
}

/// Starting `T_c` from the activated slope of `ln|y|` against `1/T`.
fn initial_tc(t: &[f64], y: &[f64]) -> f64 {
    let max = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(_, v)| v.abs() > 1e-3 * max)
        .map(|(&t, v)| (1.0 / t, v.abs().ln()))
        .collect();
    let t_max = t[t.len() - 1];
    if pts.len() < 2 {
        return 2.0 * t_max;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for (x, v) in &pts {
        num += (x - mx) * (v - my);
        den += (x - mx).powi(2);
    }
    let tc = -(num / den) / BCS_GAP_RATIO;
    if tc.is_finite() && tc > t_max {
        tc
    } else {
        2.0 * t_max
    }
}

/// Least-squares `α` for fixed `T_c`, the ratio of the data to the unit-`α` model.
fn initial_alpha(problem: &MbProblem, tc: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &t) in problem.t.iter().enumerate() {
        let (dff, dinvq) = shifts_unchecked(t, problem.t_ref, 1.0, tc, problem.f_res);
        for (channel, y, w) in &problem.channels {
            let m = match channel {
                Channel::Freq => dff,
                Channel::Loss => dinvq,
            } * w[i];
            num += m * y[i] * w[i];
            den += m * m;
        }
    }
    (num / den).clamp(1e-4, 1.0)
}

fn fit_channels(
    t: &[f64],
    t_ref: f64,
    options: &MbFitOptions,
    channels: Vec<(Channel, &[f64], Vec<f64>)>,
) -> Result<FitResult> {
    let loss = channels.iter().find(|c| c.0 == Channel::Loss).unwrap_or(&channels[0]);
    let tc0 = initial_tc(t, loss.1);
    let problem = MbProblem {
        t,
        t_ref,
        f_res: options.f_res,
        channels,
    };
    let alpha0 = initial_alpha(&problem, tc0);
    let t_max = t[t.len() - 1];
    let nlls_options = NllsOptions {
        scale: Some(vec![0.1, 1.0]),
        bounds: Some(Bounds {
            lower: vec![1e-6, t_max * (1.0 + 1e-6)],
            upper: vec![1.0, f64::INFINITY],
        }),
        ..Default::default()
    };
    nlls(&problem, &[alpha0, tc0], &nlls_options)
}

/// Fit `(α, T_c)` to shifts measured at temperatures `t`.
pub fn mb_fit(t: &[f64], dff: &[f64], dinvq: &[f64], options: &MbFitOptions) -> Result<MbFitResult> {
    if t.len() != dff.len() || t.len() != dinvq.len() {
        return Err(Error::InvalidInput("T, dff and dinvQ must have equal lengths".into()));
    }
    if t.len() < 3 {
        return Err(Error::InvalidInput("need at least 3 temperatures".into()));
    }
    if t.iter().chain(dff).chain(dinvq).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite data".into()));
    }
    if t[0] <= 0.0 || t.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("temperatures must be positive and strictly increasing".into()));
    }
    if !(options.f_res > 0.0) {
        return Err(Error::Domain {
            name: "f_res",
            value: options.f_res,
            reason: "must be positive",
        });
    }
    let t_ref = options.t_ref.unwrap_or(t[0]);
    if !(t_ref > 0.0) {
        return Err(Error::Domain {
            name: "T_ref",
            value: t_ref,
            reason: "must be positive",
        });
    }
    let (sig_f, sig_l) = match &options.weighting {
        MbWeighting::InverseVariance { sigma_dff, sigma_dinvq } => {
            (Some(sigma_dff.as_slice()), Some(sigma_dinvq.as_slice()))
        }
        _ => (None, None),
    };
    let joint = options.mode == MbFitMode::Joint;
    let freq = || -> Result<(Channel, &[f64], Vec<f64>)> {
        Ok((Channel::Freq, dff, weights(dff, sig_f, &options.weighting, joint)?))
    };
    let loss = || -> Result<(Channel, &[f64], Vec<f64>)> {
        Ok((Channel::Loss, dinvq, weights(dinvq, sig_l, &options.weighting, joint)?))
    };

    let channel_fits = match options.mode {
        MbFitMode::Joint => vec![fit_channels(t, t_ref, options, vec![freq()?, loss()?])?],
        MbFitMode::Frequency => vec![fit_channels(t, t_ref, options, vec![freq()?])?],
        MbFitMode::Loss => vec![fit_channels(t, t_ref, options, vec![loss()?])?],
        MbFitMode::Averaged => vec![
            fit_channels(t, t_ref, options, vec![freq()?])?,
            fit_channels(t, t_ref, options, vec![loss()?])?,
        ],
    };

    let fit = if channel_fits.len() == 1 {
        channel_fits[0].clone()
    } else {
        let (a, b) = (&channel_fits[0], &channel_fits[1]);
        let mean = |i: usize| 0.5 * (a.params[i] + b.params[i]);
        let se = |i: usize| 0.5 * (a.stderr[i].powi(2) + b.stderr[i].powi(2)).sqrt();
        FitResult {
            names: a.names.clone(),
            params: vec![mean(0), mean(1)],
            stderr: vec![se(0), se(1)],
            residual_norm: a.residual_norm.hypot(b.residual_norm),
            converged: a.converged && b.converged,
            iterations: a.iterations + b.iterations,
            gradient_cosine: a.gradient_cosine.max(b.gradient_cosine),
        }
    };

    let (alpha, tc) = (fit.params[0], fit.params[1]);
    let mut warnings = Vec::new();
    let t_max = t[t.len() - 1];
    if t_max < 0.4 * tc {
        warn!("temperature sweep ends at {t_max} K, below 0.4 T_c = {} K", 0.4 * tc);
        warnings.push(MbWarning::InsufficientTemperatureRange { t_max, tc });
    }
    if !fit.converged {
        warn!("Mattis-Bardeen fit did not converge");
    }
    Ok(MbFitResult {
        alpha,
        tc,
        alpha_stderr: fit.stderr[0],
        tc_stderr: fit.stderr[1],
        fit,
        channel_fits,
        warnings,
    })
}
