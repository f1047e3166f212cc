//! Resonator observables driven by the nanowire conductivity.
//!
//! Shifts are taken relative to a reference state at `T_ref`; both the
//! `δσ2/σ2` and `δσ1/σ2` denominators use `σ2(T_ref)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::mattis_bardeen::{gap0, thermal_terms, MaterialParams, QuasiparticleDensity, K_B};

/// Cryostat base temperature, kelvin.
pub const DEFAULT_T_REF: f64 = 0.01;

/// Upper end of the effective-temperature search, as a fraction of `T_c`.
pub const TEFF_BRACKET_FRACTION: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorBaseline {
    f_res0: f64,
    q_i0: f64,
    q_c: f64,
    alpha: f64,
}

impl ResonatorBaseline {
    pub fn new(f_res0: f64, q_i0: f64, q_c: f64, alpha: f64) -> Result<Self> {
        require_positive("f_res0", f_res0)?;
        require_positive("Q_i0", q_i0)?;
        require_positive("Q_c", q_c)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain {
                name: "alpha",
                value: alpha,
                reason: "participation ratio must lie in (0, 1]",
            });
        }
        Ok(Self {
            f_res0,
            q_i0,
            q_c,
            alpha,
        })
    }

    pub fn f_res0(&self) -> f64 {
        self.f_res0
    }

    pub fn q_i0(&self) -> f64 {
        self.q_i0
    }

    pub fn q_c(&self) -> f64 {
        self.q_c
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn q_l0(&self) -> f64 {
        loaded_q(self.q_i0, self.q_c)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.f_res0, self.q_i0, self.q_c, alpha)
    }
}

/// `(1/Q_i + 1/Q_c)^-1`.
pub fn loaded_q(q_i: f64, q_c: f64) -> f64 {
    1.0 / (1.0 / q_i + 1.0 / q_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorState {
    pub f_res: f64,
    pub q_i: f64,
    pub q_l: f64,
    pub t_eff: Option<f64>,
}

fn check_temperatures(t: f64, t_ref: f64, material: &MaterialParams) -> Result<()> {
    require_positive("T_ref", t_ref)?;
    require_positive("T", t)?;
    if t < t_ref {
        return Err(Error::Domain {
            name: "T",
            value: t,
            reason: "must not be below T_ref",
        });
    }
    if t >= material.tc() {
        return Err(Error::Domain {
            name: "T",
            value: t,
            reason: "must be below T_c",
        });
    }
    Ok(())
}

/// `(δf/f, δ(1/Q_i))` for participation `alpha` and critical temperature `tc`.
/// No validation; used directly by the fitters.
pub(crate) fn shifts_unchecked(t: f64, t_ref: f64, alpha: f64, tc: f64, f: f64) -> (f64, f64) {
    let cur = thermal_terms(t, f, tc);
    let reference = thermal_terms(t_ref, f, tc);
    let one_minus_ref = 1.0 - reference.depletion;
    let dff = -0.5 * alpha * (cur.depletion - reference.depletion) / one_minus_ref;
    let dinvq = alpha * (cur.s1 - reference.s1) / (reference.s2_zero * one_minus_ref);
    (dff, dinvq)
}

/// Relative frequency shift `δf/f = (α/2) δσ2/σ2`, evaluated at `f_res0`.
pub fn freq_shift(
    t: f64,
    t_ref: f64,
    baseline: &ResonatorBaseline,
    material: &MaterialParams,
) -> Result<f64> {
    check_temperatures(t, t_ref, material)?;
    Ok(shifts_unchecked(t, t_ref, baseline.alpha, material.tc(), baseline.f_res0).0)
}

/// Internal-loss shift `δ(1/Q_i) = α δσ1/σ2`, evaluated at `f_res0`.
pub fn loss_shift(
    t: f64,
    t_ref: f64,
    baseline: &ResonatorBaseline,
    material: &MaterialParams,
) -> Result<f64> {
    check_temperatures(t, t_ref, material)?;
    Ok(shifts_unchecked(t, t_ref, baseline.alpha, material.tc(), baseline.f_res0).1)
}

/// Full resonator state at temperature `t`.
pub fn state_at(
    t: f64,
    t_ref: f64,
    baseline: &ResonatorBaseline,
    material: &MaterialParams,
) -> Result<ResonatorState> {
    check_temperatures(t, t_ref, material)?;
    let (dff, dinvq) = shifts_unchecked(t, t_ref, baseline.alpha, material.tc(), baseline.f_res0);
    let q_i = 1.0 / (1.0 / baseline.q_i0 + dinvq);
    Ok(ResonatorState {
        f_res: baseline.f_res0 * (1.0 + dff),
        q_i,
        q_l: loaded_q(q_i, baseline.q_c),
        t_eff: Some(t),
    })
}

/// Temperature whose thermal loss shift equals `dinvq`.
///
/// Bisection on `[T_ref, 0.95 T_c]`, carried to the resolution of `f64` so
/// that the forward map reproduces `dinvq` to ~1e-12 relative.
pub fn effective_temperature(
    dinvq: f64,
    t_ref: f64,
    baseline: &ResonatorBaseline,
    material: &MaterialParams,
) -> Result<f64> {
    require_positive("T_ref", t_ref)?;
    if !(dinvq.is_finite() && dinvq >= 0.0) {
        return Err(Error::Domain {
            name: "dinvQ",
            value: dinvq,
            reason: "loss shift must be non-negative and finite",
        });
    }
    let hi_bound = TEFF_BRACKET_FRACTION * material.tc();
    if t_ref >= hi_bound {
        return Err(Error::Domain {
            name: "T_ref",
            value: t_ref,
            reason: "reference temperature above the inversion bracket",
        });
    }
    if dinvq == 0.0 {
        return Ok(t_ref);
    }
    let loss = |t: f64| shifts_unchecked(t, t_ref, baseline.alpha, material.tc(), baseline.f_res0).1;
    let max = loss(hi_bound);
    if dinvq > max {
        return Err(Error::OutOfRange { value: dinvq, max });
    }
    let (mut lo, mut hi) = (t_ref, hi_bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if loss(mid) < dinvq {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (l_lo, l_hi) = (loss(lo), loss(hi));
    Ok(if (dinvq - l_lo).abs() <= (l_hi - dinvq).abs() {
        lo
    } else {
        hi
    })
}

/// Frequency shift predicted from a measured loss shift via `T_eff`.
/// Out-of-range entries are reported individually.
pub fn predict_freq_from_loss(
    dinvq_series: &[f64],
    t_ref: f64,
    baseline: &ResonatorBaseline,
    material: &MaterialParams,
) -> Vec<Result<f64>> {
    dinvq_series
        .iter()
        .map(|&x| {
            let t = effective_temperature(x, t_ref, baseline, material)?;
            Ok(shifts_unchecked(t, t_ref, baseline.alpha, material.tc(), baseline.f_res0).0)
        })
        .collect()
}

/// Thermal quasiparticle recombination time with `Δ = Δ0`:
/// `τ0/√π (k_B T_c / 2Δ)^{5/2} sqrt(T_c/T) exp(Δ / k_B T)`.
///
/// Evaluated in log space; returns `+inf` (with a warning) once the result
/// exceeds `f64::MAX`.
pub fn qp_recombination_time_thermal(t: f64, material: &MaterialParams) -> Result<f64> {
    require_positive("T", t)?;
    let tc = material.tc();
    if t >= tc {
        log::warn!("T = {t} K is not below T_c = {tc} K; recombination time formula is invalid");
    }
    let gap = gap0(material);
    let ln_tau = material.tau0().ln() - 0.5 * PI.ln() + 2.5 * (K_B * tc / (2.0 * gap)).ln()
        + 0.5 * (tc / t).ln()
        + gap / (K_B * t);
    if ln_tau > f64::MAX.ln() {
        log::warn!("recombination time overflows at T = {t} K");
        return Ok(f64::INFINITY);
    }
    Ok(ln_tau.exp())
}

/// Recombination time for an arbitrary density: `τ0/n_qp · N0 (k_B T_c)^3 / 2Δ0²`.
pub fn qp_recombination_time_generic(
    n_qp: QuasiparticleDensity,
    material: &MaterialParams,
) -> Result<f64> {
    if !(n_qp.0 > 0.0 && n_qp.0.is_finite()) {
        return Err(Error::Domain {
            name: "n_qp",
            value: n_qp.0,
            reason: "density must be positive",
        });
    }
    let n0 = material.require_n0()?;
    let gap = gap0(material);
    let ktc = K_B * material.tc();
    Ok(material.tau0() / n_qp.0 * n0 * ktc.powi(3) / (2.0 * gap * gap))
}

/// Field-amplitude ring-up time `2/κ = Q_L / (π f_res)`.
pub fn ring_up_time(f_res: f64, q_l: f64) -> f64 {
    q_l / (PI * f_res)
}

/// `Q_L / (2π f_res)`, the convention quoted alongside measured ring-up times.
pub fn ring_up_time_energy_convention(f_res: f64, q_l: f64) -> f64 {
    q_l / (2.0 * PI * f_res)
}
