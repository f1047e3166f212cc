//! Sidebands from a gate tone that modulates the resonance frequency through
//! a first-order response of time constant `tau_eff`.

use std::f64::consts::PI;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::resonator::ResonatorBaseline;

/// Half-power drop, `10 log10 2` dB.
pub const HALF_POWER_DB: f64 = 3.010_299_956_639_812;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SidebandModel {
    /// Resonator follows the modulation adiabatically; roll-off comes from
    /// `tau_eff` alone.
    QuasiStatic,
    /// Linearized envelope equation, which adds the resonator's own pole.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SidebandOptions {
    /// Carrier frequency; `None` reads out at `f_res0`.
    pub f_ro: Option<f64>,
    pub model: SidebandModel,
}

impl Default for SidebandOptions {
    fn default() -> Self {
        Self {
            f_ro: None,
            model: SidebandModel::QuasiStatic,
        }
    }
}

/// Carrier and first sidebands. Levels are in dB relative to the carrier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandSpectrum {
    pub frequencies: Vec<f64>,
    pub power_db: Vec<f64>,
    pub carrier_index: usize,
    pub upper_index: usize,
    pub lower_index: usize,
    /// Frequency-modulation depth after the gate response filter, Hz.
    pub effective_depth: f64,
    /// False when the depth exceeds a tenth of the linewidth.
    pub small_signal: bool,
}

impl SidebandSpectrum {
    /// Mean of the upper and lower sideband amplitudes, dB re carrier.
    pub fn mean_sideband_db(&self) -> f64 {
        let amp = |i: usize| 10f64.powf(self.power_db[i] / 20.0);
        20.0 * (0.5 * (amp(self.upper_index) + amp(self.lower_index))).log10()
    }
}

/// `m / √(1 + (2π f_g τ)²)`.
pub fn filtered_depth(mod_depth_freq: f64, f_g: f64, tau_eff: f64) -> f64 {
    mod_depth_freq / (1.0 + (2.0 * PI * f_g * tau_eff).powi(2)).sqrt()
}

pub fn sideband_response(
    f_g: f64,
    mod_depth_freq: f64,
    tau_eff: f64,
    baseline: &ResonatorBaseline,
    options: &SidebandOptions,
) -> Result<SidebandSpectrum> {
    crate::error::require_positive("f_g", f_g)?;
    crate::error::require_positive("mod_depth_freq", mod_depth_freq)?;
    if !(tau_eff >= 0.0 && tau_eff.is_finite()) {
        return Err(Error::Domain {
            name: "tau_eff",
            value: tau_eff,
            reason: "must be finite and non-negative",
        });
    }
    let f_res = baseline.f_res0();
    let q_l = baseline.q_l0();
    let f_ro = options.f_ro.unwrap_or(f_res);
    crate::error::require_positive("f_ro", f_ro)?;
    let linewidth = f_res / q_l;
    let small_signal = mod_depth_freq <= 0.1 * linewidth;
    if !small_signal {
        warn!(
            "modulation depth {mod_depth_freq} Hz exceeds a tenth of the linewidth {linewidth} Hz; \
             the linearized sideband model is inaccurate"
        );
    }

    let m = filtered_depth(mod_depth_freq, f_g, tau_eff);
    let kappa_ext = 2.0 * PI * f_res / baseline.q_c();
    let lambda = Complex64::new(-PI * f_res / q_l, 2.0 * PI * (f_res - f_ro));
    let dlambda = Complex64::new(-PI / q_l, 2.0 * PI);
    let field = -0.5 * kappa_ext / lambda;
    let carrier = (Complex64::new(1.0, 0.0) - field).norm();
    // Field response to δf = (m/2) e^{±iω_g t}.
    let response = |sign: f64| -> f64 {
        let w = match options.model {
            SidebandModel::QuasiStatic => Complex64::new(0.0, 0.0),
            SidebandModel::Dynamic => Complex64::new(0.0, sign * 2.0 * PI * f_g),
        };
        (0.5 * m * dlambda * field / (w - lambda)).norm()
    };
    let db = |amp: f64| 20.0 * (amp / carrier).log10();
    Ok(SidebandSpectrum {
        frequencies: vec![f_ro - f_g, f_ro, f_ro + f_g],
        power_db: vec![db(response(-1.0)), 0.0, db(response(1.0))],
        carrier_index: 1,
        upper_index: 2,
        lower_index: 0,
        effective_depth: m,
        small_signal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidebandSweep {
    pub f_g: Vec<f64>,
    /// Mean sideband level, dB re carrier.
    pub amp_rel_db: Vec<f64>,
    pub f_3db: f64,
}

/// Frequency where `amp_db` first falls `HALF_POWER_DB` below its first
/// value, interpolating linearly in `log f`.
pub fn minus_3db_point(f: &[f64], amp_db: &[f64]) -> Result<f64> {
    if f.is_empty() || f.len() != amp_db.len() {
        return Err(Error::InvalidInput("curve must be non-empty with matching lengths".into()));
    }
    let level = amp_db[0] - HALF_POWER_DB;
    for k in 1..f.len() {
        if amp_db[k] <= level {
            let (a, b) = (amp_db[k - 1], amp_db[k]);
            let w = if a == b { 0.0 } else { (a - level) / (a - b) };
            let lf = f[k - 1].ln() + w * (f[k].ln() - f[k - 1].ln());
            return Ok(lf.exp());
        }
    }
    Err(Error::NoCrossing)
}

pub fn sideband_sweep(
    f_g_list: &[f64],
    mod_depth_freq: f64,
    tau_eff: f64,
    baseline: &ResonatorBaseline,
    options: &SidebandOptions,
) -> Result<SidebandSweep> {
    if f_g_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("f_g list must be strictly ascending".into()));
    }
    let amp_rel_db = f_g_list
        .iter()
        .map(|&fg| sideband_response(fg, mod_depth_freq, tau_eff, baseline, options).map(|s| s.mean_sideband_db()))
        .collect::<Result<Vec<_>>>()?;
    let f_3db = minus_3db_point(f_g_list, &amp_rel_db)?;
    Ok(SidebandSweep {
        f_g: f_g_list.to_vec(),
        amp_rel_db,
        f_3db,
    })
}

/// `n` points spaced logarithmically over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}
