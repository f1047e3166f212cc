//! Notch-port ("hanger") resonator extraction from complex S21.
//!
//! Model:
//! `S21(f) = a e^{iα} e^{-2πifτ} [1 - (Q_L/|Q_c|) e^{iφ} / (1 + 2iQ_L(f/f_r - 1))]`.
//!
//! The staged pipeline (delay, algebraic circle, phase fit, normalization)
//! produces a starting point that is then polished by a full complex
//! least-squares fit of all seven model parameters.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lorentzian::lorentzian_initial_guess;
use super::nlls::{curve_fit, nlls, CurveData, FitResult, LeastSquaresProblem, NllsOptions};
use crate::error::{Error, Result};

/// Generator and model for the notch-port response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotchResonator {
    pub amplitude: f64,
    /// Global phase `α`, radians.
    pub phase: f64,
    /// Cable delay `τ`, seconds.
    pub delay: f64,
    pub f_res: f64,
    pub q_l: f64,
    pub q_c_abs: f64,
    /// Impedance-mismatch angle `φ`, radians.
    pub phi: f64,
}

impl NotchResonator {
    /// Ideal environment (`a = 1`, no phase, no delay) from `Q_i` and the
    /// real part `Q_c = |Q_c| / cos φ`.
    pub fn from_quality_factors(f_res: f64, q_i: f64, q_c: f64, phi: f64) -> Self {
        let q_l = 1.0 / (1.0 / q_i + 1.0 / q_c);
        Self {
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
            f_res,
            q_l,
            q_c_abs: q_c * phi.cos(),
            phi,
        }
    }

    pub fn s21(&self, f: f64) -> Complex64 {
        let env = Complex64::from_polar(self.amplitude, self.phase - 2.0 * PI * f * self.delay);
        env * self.ideal(f)
    }

    fn ideal(&self, f: f64) -> Complex64 {
        let coupling = Complex64::from_polar(self.q_l / self.q_c_abs, self.phi);
        let detuning = Complex64::new(1.0, 2.0 * self.q_l * (f / self.f_res - 1.0));
        Complex64::new(1.0, 0.0) - coupling / detuning
    }

    /// Real part of the coupling quality factor, `|Q_c| / cos φ`.
    pub fn q_c(&self) -> f64 {
        self.q_c_abs / self.phi.cos()
    }

    /// `1/Q_i = 1/Q_L - cos φ / |Q_c|`.
    pub fn q_i(&self) -> f64 {
        1.0 / (1.0 / self.q_l - 1.0 / self.q_c())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircleFitResult {
    pub f_res: f64,
    pub q_l: f64,
    pub q_c: f64,
    pub q_i: f64,
    pub model: NotchResonator,
    /// Output of the staged pipeline before the final polish.
    pub staged: NotchResonator,
    pub fit: FitResult,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub center: Complex64,
    pub radius: f64,
}

/// Algebraic (Kåsa) least-squares circle through `z`.
pub fn algebraic_circle(z: &[Complex64]) -> Result<Circle> {
    if z.len() < 3 {
        return Err(Error::CircleDegenerate);
    }
    let mean = z.iter().sum::<Complex64>() / z.len() as f64;
    let extent = z.iter().map(|p| (p - mean).norm()).fold(0.0, f64::max);
    if extent == 0.0 || !extent.is_finite() {
        return Err(Error::CircleDegenerate);
    }
    // Work relative to the centroid and in units of the extent.
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for p in z {
        let q = (p - mean) / extent;
        let row = Vector3::new(q.re, q.im, 1.0);
        let rhs = -(q.re * q.re + q.im * q.im);
        m += row * row.transpose();
        v += row * rhs;
    }
    let sol = m.lu().solve(&v).ok_or(Error::CircleDegenerate)?;
    let center = Complex64::new(-0.5 * sol[0], -0.5 * sol[1]);
    let r2 = center.norm_sqr() - sol[2];
    if !(r2 > 0.0) || r2.sqrt() > 1e6 {
        return Err(Error::CircleDegenerate);
    }
    // A line fits as well as any circle: collinear points.
    let radius = r2.sqrt();
    let spread = z
        .iter()
        .map(|p| (((p - mean) / extent - center).norm() - radius).powi(2))
        .sum::<f64>()
        / z.len() as f64;
    let line = line_residual(z, mean, extent);
    if line <= 1e-24 && spread > 0.0 || radius > 1e4 {
        return Err(Error::CircleDegenerate);
    }
    Ok(Circle {
        center: mean + center * extent,
        radius: radius * extent,
    })
}

/// Mean squared distance to the best line, in extent units.
fn line_residual(z: &[Complex64], mean: Complex64, extent: f64) -> f64 {
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for p in z {
        let q = (p - mean) / extent;
        sxx += q.re * q.re;
        syy += q.im * q.im;
        sxy += q.re * q.im;
    }
    let tr = sxx + syy;
    let det = sxx * syy - sxy * sxy;
    let smallest = 0.5 * (tr - (tr * tr - 4.0 * det).max(0.0).sqrt());
    smallest / z.len() as f64
}

fn circle_misfit(z: &[Complex64]) -> f64 {
    match algebraic_circle(z) {
        Ok(c) => {
            z.iter()
                .map(|p| ((p - c.center).norm() - c.radius).powi(2))
                .sum::<f64>()
                / (c.radius * c.radius)
        }
        Err(_) => f64::INFINITY,
    }
}

fn unwrap(phase: &mut [f64]) {
    for i in 1..phase.len() {
        let mut d = phase[i] - phase[i - 1];
        while d > PI {
            phase[i] -= 2.0 * PI;
            d -= 2.0 * PI;
        }
        while d < -PI {
            phase[i] += 2.0 * PI;
            d += 2.0 * PI;
        }
    }
}

fn remove_delay(freq: &[f64], s21: &[Complex64], delay: f64) -> Vec<Complex64> {
    freq.iter()
        .zip(s21)
        .map(|(&f, &s)| s * Complex64::from_polar(1.0, 2.0 * PI * f * delay))
        .collect()
}

/// Cable delay from the slope of the off-resonant phase (outer 10% at each end).
fn delay_from_phase_slope(freq: &[f64], s21: &[Complex64]) -> f64 {
    let n = freq.len();
    let mut phase: Vec<f64> = s21.iter().map(|s| s.arg()).collect();
    unwrap(&mut phase);
    let k = (n / 10).max(3);
    let idx: Vec<usize> = (0..k).chain(n - k..n).collect();
    let mf = idx.iter().map(|&i| freq[i]).sum::<f64>() / idx.len() as f64;
    let mp = idx.iter().map(|&i| phase[i]).sum::<f64>() / idx.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &i in &idx {
        num += (freq[i] - mf) * (phase[i] - mp);
        den += (freq[i] - mf).powi(2);
    }
    -(num / den) / (2.0 * PI)
}

/// Refine the delay by minimizing the circle misfit around `start`.
fn refine_delay(freq: &[f64], s21: &[Complex64], start: f64, half_window: f64) -> f64 {
    let misfit = |d: f64| circle_misfit(&remove_delay(freq, s21, d));
    let steps = 40;
    let mut best = (start, misfit(start));
    for i in 0..=steps {
        let d = start - half_window + 2.0 * half_window * i as f64 / steps as f64;
        let m = misfit(d);
        if m < best.1 {
            best = (d, m);
        }
    }
    let step = 2.0 * half_window / steps as f64;
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (misfit(x1), misfit(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = misfit(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = misfit(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Staged circle-fit pipeline; returns the estimate without the final polish.
pub fn circle_fit_staged(freq: &[f64], s21: &[Complex64]) -> Result<NotchResonator> {
    let n = freq.len();
    let span = freq[n - 1] - freq[0];

    // (i) cable delay
    let coarse = delay_from_phase_slope(freq, s21);
    let delay = refine_delay(freq, s21, coarse, 0.5 / span);
    let z = remove_delay(freq, s21, delay);

    // (ii) algebraic circle
    let circle = algebraic_circle(&z)?;

    // (iii) phase of the centred circle versus frequency
    let mut theta: Vec<f64> = z.iter().map(|p| (p - circle.center).arg()).collect();
    unwrap(&mut theta);
    let power: Vec<f64> = z.iter().map(|p| p.norm_sqr()).collect();
    let guess = lorentzian_initial_guess(freq, &power)?;
    let fr0 = guess.f_star;
    let ql0 = (fr0 / (2.0 * guess.gamma)).max(1.0);
    let i0 = freq
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - fr0).abs().total_cmp(&(b.1 - fr0).abs()))
        .map(|(i, _)| i)
        .unwrap();
    let center_f = 0.5 * (freq[0] + freq[n - 1]);
    let u: Vec<f64> = freq.iter().map(|f| (f - center_f) / span).collect();
    let phase_model = move |u: f64, p: &[f64]| {
        let f = center_f + u * span;
        let fr = center_f + p[1] * span;
        p[0] + 2.0 * (2.0 * p[2] * (1.0 - f / fr)).atan()
    };
    let phase_fit = curve_fit(
        phase_model,
        &["theta0", "f_res", "Q_L"],
        CurveData::new(&u, &theta)?,
        &[theta[i0], (fr0 - center_f) / span, ql0],
        &NllsOptions {
            scale: Some(vec![1.0, 1e-3, ql0]),
            ..Default::default()
        },
    )?;
    let theta0 = phase_fit.params[0];
    let f_res = center_f + phase_fit.params[1] * span;
    let q_l = phase_fit.params[2].abs();
    if f_res < freq[0] || f_res > freq[n - 1] {
        return Err(Error::InsufficientSpan(format!(
            "fitted resonance {f_res} Hz lies outside the trace"
        )));
    }
    let linewidths = span * q_l / f_res;
    if linewidths < 3.0 {
        return Err(Error::InsufficientSpan(format!(
            "trace covers {linewidths:.2} linewidths, need at least 3"
        )));
    }

    // (iv) off-resonant point fixes amplitude and phase; diameter gives |Q_c|
    let off = circle.center - Complex64::from_polar(circle.radius, theta0);
    let c_norm = circle.center / off;
    let r_norm = circle.radius / off.norm();
    let phi = (Complex64::new(1.0, 0.0) - c_norm).arg();
    Ok(NotchResonator {
        amplitude: off.norm(),
        phase: off.arg(),
        delay,
        f_res,
        q_l,
        q_c_abs: q_l / (2.0 * r_norm),
        phi,
    })
}

struct NotchProblem<'a> {
    freq: &'a [f64],
    s21: &'a [Complex64],
    center_f: f64,
    span: f64,
}

impl NotchProblem<'_> {
    /// Internal parameters: `[a, α', τ·span, (f_r - f_mid)/span, Q_L, |Q_c|, φ]`
    /// with the delay referenced to `f_mid`.
    fn model(&self, p: &[f64], f: f64) -> Complex64 {
        let m = NotchResonator {
            amplitude: p[0],
            phase: p[1],
            delay: 0.0,
            f_res: self.center_f + p[3] * self.span,
            q_l: p[4],
            q_c_abs: p[5],
            phi: p[6],
        };
        let delay_phase = -2.0 * PI * (f - self.center_f) / self.span * p[2];
        m.s21(f) * Complex64::from_polar(1.0, delay_phase)
    }

    fn to_internal(&self, m: &NotchResonator) -> Vec<f64> {
        let phase = m.phase - 2.0 * PI * self.center_f * m.delay;
        vec![
            m.amplitude,
            phase.sin().atan2(phase.cos()),
            m.delay * self.span,
            (m.f_res - self.center_f) / self.span,
            m.q_l,
            m.q_c_abs,
            m.phi,
        ]
    }

    fn to_model(&self, p: &[f64]) -> NotchResonator {
        let delay = p[2] / self.span;
        let phase = p[1] + 2.0 * PI * self.center_f * delay;
        NotchResonator {
            amplitude: p[0],
            phase: phase.sin().atan2(phase.cos()),
            delay,
            f_res: self.center_f + p[3] * self.span,
            q_l: p[4],
            q_c_abs: p[5],
            phi: p[6],
        }
    }
}

impl LeastSquaresProblem for NotchProblem<'_> {
    fn n_params(&self) -> usize {
        7
    }

    fn n_residuals(&self) -> usize {
        2 * self.freq.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        for (i, (&f, &s)) in self.freq.iter().zip(self.s21).enumerate() {
            let d = self.model(p, f) - s;
            out[2 * i] = d.re;
            out[2 * i + 1] = d.im;
        }
    }

    fn param_names(&self) -> Vec<String> {
        ["amplitude", "phase", "delay", "f_res", "Q_L", "Qc_abs", "phi"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    }
}

/// Extract `f_res`, `Q_L`, `Q_c` and `Q_i` from a notch trace.
///
/// `freq` must be strictly increasing with at least 30 points covering three
/// or more linewidths.
pub fn circle_fit(freq: &[f64], s21: &[Complex64]) -> Result<CircleFitResult> {
    if freq.len() != s21.len() {
        return Err(Error::InvalidInput("frequency and S21 lengths differ".into()));
    }
    if freq.len() < 30 {
        return Err(Error::InsufficientSpan(format!(
            "circle fit needs at least 30 points, got {}",
            freq.len()
        )));
    }
    if freq.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("frequencies must be strictly increasing".into()));
    }
    if freq.iter().any(|f| !f.is_finite()) || s21.iter().any(|s| !(s.re.is_finite() && s.im.is_finite())) {
        return Err(Error::InvalidInput("non-finite data".into()));
    }
    let staged = circle_fit_staged(freq, s21)?;

    let n = freq.len();
    let problem = NotchProblem {
        freq,
        s21,
        center_f: 0.5 * (freq[0] + freq[n - 1]),
        span: freq[n - 1] - freq[0],
    };
    let init = problem.to_internal(&staged);
    let options = NllsOptions {
        scale: Some(vec![
            staged.amplitude,
            1.0,
            1.0,
            1e-3,
            staged.q_l,
            staged.q_c_abs,
            1.0,
        ]),
        // Converge to the floating-point floor so the extracted parameters do not
        // depend on the (rotation- and scale-dependent) path taken.
        ftol: 1e-15,
        ..Default::default()
    };
    let mut fit = nlls(&problem, &init, &options)?;
    let model = problem.to_model(&fit.params);

    // Report physical parameters; append the derived quality factors.
    fit.params[1] = model.phase;
    fit.rescale(2, 1.0 / problem.span, 0.0);
    fit.params[2] = model.delay;
    fit.rescale(3, problem.span, problem.center_f);
    let (q_c, q_i) = (model.q_c(), model.q_i());
    let (se_ql, se_qc_abs, se_phi) = (fit.stderr[4], fit.stderr[5], fit.stderr[6]);
    let se_qc = ((se_qc_abs / model.phi.cos()).powi(2)
        + (model.q_c_abs * model.phi.sin() / model.phi.cos().powi(2) * se_phi).powi(2))
    .sqrt();
    let se_qi = q_i * q_i * ((se_ql / (model.q_l * model.q_l)).powi(2) + (se_qc / (q_c * q_c)).powi(2)).sqrt();
    fit.names.extend(["Q_c".to_string(), "Q_i".to_string()]);
    fit.params.extend([q_c, q_i]);
    fit.stderr.extend([se_qc, se_qi]);

    Ok(CircleFitResult {
        f_res: model.f_res,
        q_l: model.q_l,
        q_c,
        q_i,
        model,
        staged,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sweep(m: &NotchResonator, n: usize, half_span_linewidths: f64) -> (Vec<f64>, Vec<Complex64>) {
        let lw = m.f_res / m.q_l;
        let lo = m.f_res - half_span_linewidths * lw;
        let hi = m.f_res + half_span_linewidths * lw;
        let f: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let s = f.iter().map(|&f| m.s21(f)).collect();
        (f, s)
    }

    #[test]
    fn generator_identities() {
        let m = NotchResonator::from_quality_factors(6.837e9, 980.0, 828.0, 0.2);
        assert!((m.q_c() - 828.0).abs() < 1e-9);
        assert!((m.q_i() - 980.0).abs() < 1e-9);
        assert!(((m.s21(6.837e9) - Complex64::new(1.0, 0.0) + Complex64::from_polar(m.q_l / m.q_c_abs, 0.2)).norm()) < 1e-12);
    }

    #[test]
    fn algebraic_circle_exact() {
        let c = Complex64::new(0.3, -0.2);
        let z: Vec<Complex64> = (0..10).map(|k| c + Complex64::from_polar(0.25, k as f64 * 0.3)).collect();
        let fit = algebraic_circle(&z).unwrap();
        assert!((fit.center - c).norm() < 1e-12);
        assert!((fit.radius - 0.25).abs() < 1e-12);
    }

    #[test]
    fn collinear_points_rejected() {
        let z: Vec<Complex64> = (0..10).map(|k| Complex64::new(k as f64, 2.0 * k as f64)).collect();
        assert_eq!(algebraic_circle(&z).unwrap_err(), Error::CircleDegenerate);
        let same = vec![Complex64::new(1.0, 1.0); 10];
        assert_eq!(algebraic_circle(&same).unwrap_err(), Error::CircleDegenerate);
    }

    #[test]
    fn noiseless_recovery_with_environment() {
        let mut m = NotchResonator::from_quality_factors(6.837e9, 980.0, 828.0, 0.15);
        m.amplitude = 0.03;
        m.phase = 1.1;
        m.delay = 50e-9;
        let (f, s) = sweep(&m, 301, 5.0);
        let r = circle_fit(&f, &s).unwrap();
        assert!(((r.f_res - 6.837e9) / 6.837e9).abs() < 1e-9);
        assert!(((r.q_i - 980.0) / 980.0).abs() < 1e-6, "{}", r.q_i);
        assert!(((r.q_c - 828.0) / 828.0).abs() < 1e-6, "{}", r.q_c);
        assert!(((r.model.delay - 50e-9) / 50e-9).abs() < 1e-6);
        assert!(r.fit.converged);
    }

    #[test]
    fn short_and_narrow_traces_rejected() {
        let m = NotchResonator::from_quality_factors(6.837e9, 980.0, 828.0, 0.0);
        let (f, s) = sweep(&m, 20, 5.0);
        assert!(matches!(circle_fit(&f, &s), Err(Error::InsufficientSpan(_))));
        let (f, s) = sweep(&m, 100, 1.0);
        assert!(matches!(circle_fit(&f, &s), Err(Error::InsufficientSpan(_))));
    }
}
