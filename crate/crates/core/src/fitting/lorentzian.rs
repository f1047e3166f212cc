use serde::{Deserialize, Serialize};

use super::nlls::{curve_fit, Bounds, CurveData, FitResult, NllsOptions};
use crate::error::{Error, Result};

/// `s(f) = β γ² / ((f - f*)² + γ²) + θ`; `γ` is the half width at half maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub f_star: f64,
    pub gamma: f64,
    pub beta: f64,
    pub theta: f64,
}

/// Which width enters `Q_L = f* / width`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WidthConvention {
    /// `Q_L = f* / 2γ`: `γ` read as the half width, consistent with the notch model.
    HalfWidth,
    /// `Q_L = f* / γ`: `γ` read as the full width.
    FullWidth,
}

impl LorentzianParams {
    pub fn eval(&self, f: f64) -> f64 {
        let d = f - self.f_star;
        self.beta * self.gamma * self.gamma / (d * d + self.gamma * self.gamma) + self.theta
    }

    pub fn q_loaded(&self, convention: WidthConvention) -> f64 {
        match convention {
            WidthConvention::HalfWidth => self.f_star / (2.0 * self.gamma),
            WidthConvention::FullWidth => self.f_star / self.gamma,
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Starting point from the shape of the trace. `freq` must be sorted.
pub fn lorentzian_initial_guess(freq: &[f64], y: &[f64]) -> Result<LorentzianParams> {
    let n = freq.len();
    let quarter = (n / 4).max(1);
    let outer: Vec<f64> = y[..quarter].iter().chain(&y[n - quarter..]).copied().collect();
    let theta = median(outer);
    let (ext, dev) = y
        .iter()
        .enumerate()
        .map(|(i, &v)| (i, (v - theta).abs()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if dev <= 1e-12 * scale {
        return Err(Error::Degenerate("flat trace, no resonance feature"));
    }
    let beta = y[ext] - theta;
    let half = 0.5 * dev;
    let crossing = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = ext;
        for i in range {
            let d = (y[i] - theta).abs();
            if d < half {
                let dp = (y[prev] - theta).abs();
                let w = (dp - half) / (dp - d);
                return Some(freq[prev] + w * (freq[i] - freq[prev]));
            }
            prev = i;
        }
        None
    };
    let left = crossing(&mut (0..ext).rev());
    let right = crossing(&mut (ext + 1..n));
    let f_star = freq[ext];
    let gamma = match (left, right) {
        (Some(l), Some(r)) => 0.5 * (r - l),
        (Some(l), None) => f_star - l,
        (None, Some(r)) => r - f_star,
        (None, None) => 0.25 * (freq[n - 1] - freq[0]),
    };
    Ok(LorentzianParams {
        f_star,
        gamma: gamma.max(1e-6 * (freq[n - 1] - freq[0])),
        beta,
        theta,
    })
}

/// Least-squares Lorentzian. Frequencies are centred and scaled internally.
pub fn lorentzian_fit(freq: &[f64], y: &[f64]) -> Result<(LorentzianParams, FitResult)> {
    if freq.len() < 8 {
        return Err(Error::InvalidInput(format!(
            "Lorentzian fit needs at least 8 points, got {}",
            freq.len()
        )));
    }
    CurveData::new(freq, y)?;
    let mut order: Vec<usize> = (0..freq.len()).collect();
    order.sort_by(|&a, &b| freq[a].total_cmp(&freq[b]));
    let fs: Vec<f64> = order.iter().map(|&i| freq[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let span = fs[fs.len() - 1] - fs[0];
    if span <= 0.0 {
        return Err(Error::Degenerate("all frequencies identical"));
    }
    let guess = lorentzian_initial_guess(&fs, &ys)?;

    let center = 0.5 * (fs[0] + fs[fs.len() - 1]);
    let u: Vec<f64> = fs.iter().map(|f| (f - center) / span).collect();
    let amp = guess.beta.abs().max(guess.theta.abs());
    let init = [
        (guess.f_star - center) / span,
        guess.gamma / span,
        guess.beta,
        guess.theta,
    ];
    let options = NllsOptions {
        scale: Some(vec![1.0, 1e-2, amp, amp]),
        bounds: Some(Bounds {
            lower: vec![f64::NEG_INFINITY, 1e-12, f64::NEG_INFINITY, f64::NEG_INFINITY],
            upper: vec![f64::INFINITY; 4],
        }),
        ..Default::default()
    };
    let mut fit = curve_fit(
        |u, p| {
            let d = u - p[0];
            p[2] * p[1] * p[1] / (d * d + p[1] * p[1]) + p[3]
        },
        &["f_star", "gamma", "beta", "theta"],
        CurveData::new(&u, &ys)?,
        &init,
        &options,
    )?;
    fit.rescale(0, span, center);
    fit.rescale(1, span, 0.0);
    let params = LorentzianParams {
        f_star: fit.params[0],
        gamma: fit.params[1],
        beta: fit.params[2],
        theta: fit.params[3],
    };
    Ok((params, fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth(p: &LorentzianParams, n: usize, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let f: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
        let y = f.iter().map(|&f| p.eval(f)).collect();
        (f, y)
    }

    #[test]
    fn exact_dip_recovered() {
        let truth = LorentzianParams {
            f_star: 6.815e9,
            gamma: 7.6e6,
            beta: -0.3,
            theta: 1.0,
        };
        let (f, y) = synth(&truth, 121, 6.75e9, 6.88e9);
        let (p, fit) = lorentzian_fit(&f, &y).unwrap();
        assert!(fit.converged);
        assert!(((p.f_star - truth.f_star) / truth.f_star).abs() < 1e-8);
        assert!(((p.gamma - truth.gamma) / truth.gamma).abs() < 1e-8);
        assert!(((p.beta - truth.beta) / truth.beta).abs() < 1e-8);
        assert!(((p.theta - truth.theta) / truth.theta).abs() < 1e-8);
        assert!((p.q_loaded(WidthConvention::HalfWidth) - 6.815e9 / 15.2e6).abs() < 1e-3);
        assert!((p.q_loaded(WidthConvention::FullWidth) - 2.0 * p.q_loaded(WidthConvention::HalfWidth)).abs() < 1e-9);
    }

    #[test]
    fn peak_with_unsorted_input() {
        let truth = LorentzianParams {
            f_star: 3.0,
            gamma: 0.4,
            beta: 2.0,
            theta: 0.1,
        };
        let (mut f, mut y) = synth(&truth, 40, 0.0, 6.0);
        f.reverse();
        y.reverse();
        let (p, _) = lorentzian_fit(&f, &y).unwrap();
        assert!((p.f_star - 3.0).abs() < 1e-9);
    }

    #[test]
    fn degenerate_and_short_traces() {
        let f: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let flat = vec![0.5; 20];
        assert_eq!(
            lorentzian_fit(&f, &flat).unwrap_err(),
            Error::Degenerate("flat trace, no resonance feature")
        );
        assert!(matches!(
            lorentzian_fit(&f[..5], &flat[..5]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn initial_guess_heuristics() {
        let truth = LorentzianParams {
            f_star: 0.0,
            gamma: 1.0,
            beta: -1.0,
            theta: 2.0,
        };
        let (f, y) = synth(&truth, 201, -20.0, 20.0);
        let g = lorentzian_initial_guess(&f, &y).unwrap();
        assert!((g.f_star).abs() < 1e-12);
        assert!((g.gamma - 1.0).abs() < 0.05);
        assert!((g.theta - 2.0).abs() < 0.01);
        assert!((g.beta + 1.0).abs() < 0.01);
    }
}
