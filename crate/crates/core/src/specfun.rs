//! Exponentially scaled modified Bessel functions of order zero.
//!
//! The conductivity expressions only ever need the products `e^{-x} I0(x)`
//! and `sinh(x) K0(x)`. At millikelvin temperatures the argument runs into
//! the hundreds, where `I0`, `K0` and `sinh` individually overflow or
//! underflow, so only the scaled forms are public.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Above this argument `e^{-x} I0(x)` switches from the power series to the
/// asymptotic expansion. The smallest asymptotic term there is about `e^{-2x}`.
const I0_SERIES_MAX: f64 = 20.0;

/// Below this argument `K0` uses the logarithmic power series; above, the
/// Steed continued fraction.
const K0_SERIES_MAX: f64 = 2.0;

const MAX_TERMS: usize = 500;

fn check_arg(x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "x",
            value: x,
            reason: "Bessel argument must be positive and finite",
        })
    }
}

/// `e^{-x} I0(x)` for `x > 0`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(i0_scaled_unchecked(x))
}

/// `e^{x} K0(x)` for `x > 0`.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(k0_scaled_unchecked(x))
}

/// `sinh(x) K0(x)` for `x > 0`, evaluated as `(1 - e^{-2x})/2 * [e^x K0(x)]`.
pub fn sinh_k0(x: f64) -> Result<f64> {
    check_arg(x)?;
    Ok(sinh_k0_unchecked(x))
}

pub(crate) fn sinh_k0_unchecked(x: f64) -> f64 {
    -0.5 * (-2.0 * x).exp_m1() * k0_scaled_unchecked(x)
}

pub(crate) fn i0_scaled_unchecked(x: f64) -> f64 {
    if x <= I0_SERIES_MAX {
        i0_series(x) * (-x).exp()
    } else {
        i0_scaled_asymptotic(x)
    }
}

pub(crate) fn k0_scaled_unchecked(x: f64) -> f64 {
    if x <= K0_SERIES_MAX {
        k0_series(x) * x.exp()
    } else {
        k0_scaled_steed(x)
    }
}

/// `sum_k (x^2/4)^k / (k!)^2`; every term is positive so there is no
/// cancellation at any argument.
fn i0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let k = k as f64;
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

fn i0_scaled_asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next > term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum / (2.0 * PI * x).sqrt()
}

/// `K0(x) = -(ln(x/2) + gamma) I0(x) + sum_{k>=1} (x^2/4)^k / (k!)^2 H_k`.
fn k0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let lead = -((0.5 * x).ln() + EULER_GAMMA);
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = lead;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        let delta = term * (lead + harmonic);
        sum += delta;
        if delta.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// Steed's continued fraction (CF2) for the order-zero Macdonald function,
/// in Temme's normalization. Converges quickly for `x >= 2` and returns the
/// scaled value directly, so it is safe up to arbitrarily large `x`.
fn k0_scaled_steed(x: f64) -> f64 {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_TERMS {
        a -= (2 * (i - 1)) as f64;
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    (PI / (2.0 * x)).sqrt() / s
}
