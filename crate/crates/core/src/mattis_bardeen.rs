//! Low-temperature, low-frequency Mattis-Bardeen conductivity.
//!
//! The gap is taken as its zero-temperature value `Δ0 = 1.764 k_B T_c`
//! everywhere, including the `πΔ/ħω` prefactor of `σ2`. Near `T_c/2` a
//! temperature-dependent gap would shift the results by up to ~10%.
//!
//! All quantities are SI: joules, seconds, hertz, kelvin. `N0` is carried in
//! whatever energy/volume units the caller uses for `n_qp`; thermal-mode
//! results never depend on it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};
use crate::specfun::{i0_scaled_unchecked, sinh_k0_unchecked};

/// BCS weak-coupling ratio `Δ0 / k_B T_c`.
pub const BCS_GAP_RATIO: f64 = 1.764;

/// Exact SI (2019) values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub k_b: f64,
    pub hbar: f64,
}

pub const CONSTANTS: PhysicalConstants = PhysicalConstants {
    k_b: 1.380_649e-23,
    hbar: 6.626_070_15e-34 / (2.0 * PI),
};

pub const K_B: f64 = CONSTANTS.k_b;
pub const HBAR: f64 = CONSTANTS.hbar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    tc: f64,
    tau0: f64,
    n0: Option<f64>,
}

impl MaterialParams {
    /// `tc` in kelvin, `tau0` (electron-phonon time) in seconds.
    pub fn new(tc: f64, tau0: f64) -> Result<Self> {
        require_positive("T_c", tc)?;
        require_positive("tau0", tau0)?;
        Ok(Self { tc, tau0, n0: None })
    }

    /// Attach a density of states at the Fermi level.
    pub fn with_n0(mut self, n0: f64) -> Result<Self> {
        require_positive("N0", n0)?;
        self.n0 = Some(n0);
        Ok(self)
    }

    pub fn tc(&self) -> f64 {
        self.tc
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    pub fn n0(&self) -> Option<f64> {
        self.n0
    }

    pub(crate) fn require_n0(&self) -> Result<f64> {
        self.n0.ok_or(Error::MissingDensityOfStates)
    }
}

/// `(σ1/σn, σ2/σn)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductivityRatio {
    pub s1: f64,
    pub s2: f64,
}

/// Quasiparticle density per unit volume, in the units of `N0 × energy`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct QuasiparticleDensity(pub f64);

/// Conditions under which the low-T, low-frequency expansion is strained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValidityWarning {
    /// `ħω / Δ0` is not small (threshold 0.5).
    PhotonEnergy { ratio: f64 },
    /// `k_B T / Δ0` is not small (threshold 0.5).
    ThermalEnergy { ratio: f64 },
    AboveCriticalTemperature { t: f64, tc: f64 },
}

/// `σ2/σn = s2_zero * (1 - depletion)`. Keeping the depletion separate lets
/// callers form `δσ2` without cancellation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct ConductivityTerms {
    pub s1: f64,
    pub s2_zero: f64,
    pub depletion: f64,
}

impl ConductivityTerms {
    pub fn ratio(&self) -> ConductivityRatio {
        ConductivityRatio {
            s1: self.s1,
            s2: self.s2_zero * (1.0 - self.depletion),
        }
    }
}

pub fn gap0(material: &MaterialParams) -> f64 {
    gap0_from_tc(material.tc)
}

pub(crate) fn gap0_from_tc(tc: f64) -> f64 {
    BCS_GAP_RATIO * K_B * tc
}

/// `ξ = ħω / 2 k_B T` with `ω = 2πf`.
pub fn xi(t: f64, f: f64) -> Result<f64> {
    require_positive("T", t)?;
    require_positive("f", f)?;
    Ok(xi_unchecked(t, f))
}

fn xi_unchecked(t: f64, f: f64) -> f64 {
    HBAR * 2.0 * PI * f / (2.0 * K_B * t)
}

/// Thermal equilibrium density `2 N0 sqrt(2π k_B T Δ0) exp(-Δ0 / k_B T)`.
pub fn nqp_thermal(t: f64, material: &MaterialParams) -> Result<QuasiparticleDensity> {
    require_positive("T", t)?;
    let n0 = material.require_n0()?;
    if t >= material.tc {
        log::warn!(
            "T = {t} K is not below T_c = {} K; thermal density formula is invalid",
            material.tc
        );
    }
    let kt = K_B * t;
    let gap = gap0(material);
    Ok(QuasiparticleDensity(
        2.0 * n0 * (2.0 * PI * kt * gap).sqrt() * (-gap / kt).exp(),
    ))
}

/// Conductivity ratios at temperature `t` and frequency `f`.
///
/// With `nqp_override = None` the thermal density is substituted and every
/// `N0` cancels; otherwise `N0` must be present on `material`.
pub fn sigma_ratio(
    t: f64,
    f: f64,
    material: &MaterialParams,
    nqp_override: Option<QuasiparticleDensity>,
) -> Result<ConductivityRatio> {
    require_positive("T", t)?;
    require_positive("f", f)?;
    if t >= material.tc {
        return Err(Error::Domain {
            name: "T",
            value: t,
            reason: "must be below T_c",
        });
    }
    for w in validity_warnings(t, f, material) {
        log::warn!("Mattis-Bardeen expansion strained: {w:?}");
    }
    let terms = match nqp_override {
        None => thermal_terms(t, f, material.tc),
        Some(n) => {
            if !(n.0 >= 0.0 && n.0.is_finite()) {
                return Err(Error::Domain {
                    name: "n_qp",
                    value: n.0,
                    reason: "must be non-negative and finite",
                });
            }
            let n0 = material.require_n0()?;
            density_terms(t, f, material.tc, n.0 / n0)
        }
    };
    Ok(terms.ratio())
}

pub fn validity_warnings(t: f64, f: f64, material: &MaterialParams) -> Vec<ValidityWarning> {
    let gap = gap0(material);
    let mut out = Vec::new();
    let photon = HBAR * 2.0 * PI * f / gap;
    if photon >= 0.5 {
        out.push(ValidityWarning::PhotonEnergy { ratio: photon });
    }
    let thermal = K_B * t / gap;
    if thermal >= 0.5 {
        out.push(ValidityWarning::ThermalEnergy { ratio: thermal });
    }
    if t >= material.tc {
        out.push(ValidityWarning::AboveCriticalTemperature { t, tc: material.tc });
    }
    out
}

/// Thermal-mode terms as a function of `(T, T_c, f)` only. No argument
/// checks; `exp(-Δ0/k_B T)` underflows gracefully to zero as `T -> 0`.
pub(crate) fn thermal_terms(t: f64, f: f64, tc: f64) -> ConductivityTerms {
    let gap = gap0_from_tc(tc);
    let kt = K_B * t;
    let photon = HBAR * 2.0 * PI * f;
    let x = xi_unchecked(t, f);
    let boltzmann = (-gap / kt).exp();
    // n_qp / (N0 sqrt(2π kT Δ0)) = 2 exp(-Δ0/kT)
    let s1 = 4.0 * gap / photon * boltzmann * sinh_k0_unchecked(x);
    // n_qp / (2 N0 Δ0) = sqrt(2π kT / Δ0) exp(-Δ0/kT)
    let depletion = (2.0 * PI * kt / gap).sqrt()
        * boltzmann
        * (1.0 + (2.0 * gap / (PI * kt)).sqrt() * i0_scaled_unchecked(x));
    ConductivityTerms {
        s1,
        s2_zero: PI * gap / photon,
        depletion,
    }
}

/// Terms for an arbitrary density, given as the ratio `n_qp / N0` (energy units).
pub(crate) fn density_terms(t: f64, f: f64, tc: f64, n_over_n0: f64) -> ConductivityTerms {
    let gap = gap0_from_tc(tc);
    let kt = K_B * t;
    let photon = HBAR * 2.0 * PI * f;
    let x = xi_unchecked(t, f);
    let s1 = 2.0 * gap / photon * n_over_n0 / (2.0 * PI * kt * gap).sqrt() * sinh_k0_unchecked(x);
    let depletion =
        n_over_n0 / (2.0 * gap) * (1.0 + (2.0 * gap / (PI * kt)).sqrt() * i0_scaled_unchecked(x));
    ConductivityTerms {
        s1,
        s2_zero: PI * gap / photon,
        depletion,
    }
}
