use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Resonance frequency and loaded quality factor as functions of time.
pub trait Trajectory {
    /// `(f_res, Q_L)` at time `t`.
    fn at(&self, t: f64) -> (f64, f64);
}

impl<F: Fn(f64) -> (f64, f64)> Trajectory for F {
    fn at(&self, t: f64) -> (f64, f64) {
        self(t)
    }
}

/// Uniformly sampled trajectory, linearly interpolated and held constant
/// beyond its ends.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub t0: f64,
    pub dt: f64,
    pub f_res: Vec<f64>,
    pub q_l: Vec<f64>,
}

impl Trajectory for SampledTrajectory {
    fn at(&self, t: f64) -> (f64, f64) {
        let n = self.f_res.len();
        let x = (t - self.t0) / self.dt;
        if x <= 0.0 || n == 1 {
            return (self.f_res[0], self.q_l[0]);
        }
        let k = x.floor() as usize;
        if k >= n - 1 {
            return (self.f_res[n - 1], self.q_l[n - 1]);
        }
        let w = x - k as f64;
        (
            self.f_res[k] + w * (self.f_res[k + 1] - self.f_res[k]),
            self.q_l[k] + w * (self.q_l[k + 1] - self.q_l[k]),
        )
    }
}

/// Drive on for `start <= t < end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveWindow {
    pub start: f64,
    pub end: f64,
}

impl DriveWindow {
    pub fn always() -> Self {
        Self {
            start: f64::NEG_INFINITY,
            end: f64::INFINITY,
        }
    }

    pub fn off() -> Self {
        Self { start: 0.0, end: 0.0 }
    }

    pub fn level(&self, t: f64) -> f64 {
        if t >= self.start && t < self.end {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeSetup {
    pub f_ro: f64,
    pub drive: DriveWindow,
    /// External coupling rate `2π f_res0 / Q_c`, rad/s.
    pub kappa_ext: f64,
    pub t0: f64,
    pub dt: f64,
    pub n_samples: usize,
    pub initial: Complex64,
}

/// Uniformly sampled complex envelope. `field` is the resonator envelope and
/// `s` the transmitted signal `u(t) - field`, both normalized to the drive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeTrace {
    pub t0: f64,
    pub dt: f64,
    pub s: Vec<Complex64>,
    pub field: Vec<Complex64>,
}

impl TimeTrace {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.time(i)).collect()
    }

    /// Index of the sample closest to `t`, clamped to the trace.
    pub fn index_of(&self, t: f64) -> usize {
        let k = ((t - self.t0) / self.dt).round();
        (k.max(0.0) as usize).min(self.len().saturating_sub(1))
    }
}

/// Largest step allowed for detuning `|f_ro - f_res| <= detuning_max` and
/// field time constant `2 Q_L / (2π f_res) >= tau_ring_min`.
pub fn max_stable_step(detuning_max: f64, tau_ring_min: f64) -> f64 {
    let by_detuning = if detuning_max > 0.0 {
        1.0 / (20.0 * detuning_max)
    } else {
        f64::INFINITY
    };
    by_detuning.min(tau_ring_min / 20.0)
}

/// Integrate `ds/dt = [i2π(f_res - f_ro) - κ/2] s + (κ_ext/2) u(t)` with
/// fixed-step RK4, `κ = 2π f_res / Q_L`. With this drive normalization the
/// steady resonant field is `Q_L/Q_c`, so `u - field` reproduces the notch
/// transmission.
pub fn resonator_envelope<T: Trajectory + ?Sized>(trajectory: &T, setup: &EnvelopeSetup) -> Result<TimeTrace> {
    let EnvelopeSetup {
        f_ro,
        drive,
        kappa_ext,
        t0,
        dt,
        n_samples,
        initial,
    } = *setup;
    crate::error::require_positive("dt", dt)?;
    crate::error::require_positive("f_ro", f_ro)?;
    if !(kappa_ext >= 0.0) {
        return Err(Error::Domain {
            name: "kappa_ext",
            value: kappa_ext,
            reason: "must be non-negative",
        });
    }

    let mut detuning_max = 0.0f64;
    let mut tau_min = f64::INFINITY;
    for i in 0..n_samples {
        let (f, q) = trajectory.at(t0 + i as f64 * dt);
        if !(f > 0.0 && q > 0.0) {
            return Err(Error::Domain {
                name: "trajectory",
                value: if f > 0.0 { q } else { f },
                reason: "f_res and Q_L must be positive",
            });
        }
        detuning_max = detuning_max.max((f_ro - f).abs());
        tau_min = tau_min.min(q / (PI * f));
    }
    let max = max_stable_step(detuning_max, tau_min);
    if dt > max * (1.0 + 1e-9) {
        return Err(Error::StepTooLarge { dt, max });
    }

    let rate = |t: f64| -> Complex64 {
        let (f, q) = trajectory.at(t);
        Complex64::new(-PI * f / q, 2.0 * PI * (f - f_ro))
    };
    let mut field = Vec::with_capacity(n_samples);
    let mut s = Vec::with_capacity(n_samples);
    let mut a = initial;
    for i in 0..n_samples {
        let t = t0 + i as f64 * dt;
        field.push(a);
        s.push(Complex64::new(drive.level(t), 0.0) - a);
        if i + 1 == n_samples {
            break;
        }
        // Drive held at its mid-step value so window edges on the grid are exact.
        let b = 0.5 * kappa_ext * drive.level(t + 0.5 * dt);
        let (l0, lh, l1) = (rate(t), rate(t + 0.5 * dt), rate(t + dt));
        let k1 = l0 * a + b;
        let k2 = lh * (a + 0.5 * dt * k1) + b;
        let k3 = lh * (a + 0.5 * dt * k2) + b;
        let k4 = l1 * (a + dt * k3) + b;
        a += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    Ok(TimeTrace { t0, dt, s, field })
}

/// Steady field for constant parameters: `(κ_ext/2) / (κ/2 - i2π(f_res - f_ro))`.
pub fn steady_field(f_res: f64, q_l: f64, f_ro: f64, kappa_ext: f64) -> Complex64 {
    let lambda = Complex64::new(-PI * f_res / q_l, 2.0 * PI * (f_res - f_ro));
    -0.5 * kappa_ext / lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: f64 = 6.837e9;
    const QL: f64 = 980.0 * 828.0 / 1808.0;

    fn kappa_ext() -> f64 {
        2.0 * PI * F / 828.0
    }

    fn setup(f_ro: f64, drive: DriveWindow, n: usize, dt: f64, initial: Complex64) -> EnvelopeSetup {
        EnvelopeSetup {
            f_ro,
            drive,
            kappa_ext: kappa_ext(),
            t0: 0.0,
            dt,
            n_samples: n,
            initial,
        }
    }

    #[test]
    fn free_decay() {
        let traj = |_t: f64| (F, QL);
        let s0 = Complex64::new(0.3, 0.4);
        let tr = resonator_envelope(&traj, &setup(F, DriveWindow::off(), 200, 0.5e-9, s0)).unwrap();
        let kappa = 2.0 * PI * F / QL;
        for (i, a) in tr.field.iter().enumerate() {
            let expected = 0.5 * (-kappa * tr.time(i) / 2.0).exp();
            assert!((a.norm() - expected).abs() < 1e-7 * 0.5, "{i}");
        }
    }

    #[test]
    fn resonant_ring_up_to_notch_depth() {
        let traj = |_t: f64| (F, QL);
        let tr = resonator_envelope(&traj, &setup(F, DriveWindow::always(), 2000, 0.5e-9, Complex64::new(0.0, 0.0))).unwrap();
        let kappa = 2.0 * PI * F / QL;
        let depth = QL / 828.0;
        for i in [10, 40, 100, 1999] {
            let expected = depth * (1.0 - (-kappa * tr.time(i) / 2.0).exp());
            assert!((tr.field[i].re - expected).abs() < 1e-8, "{i}");
        }
        assert!((tr.s[1999].norm() - (1.0 - depth)).abs() < 1e-8);
    }

    #[test]
    fn detuned_steady_state_matches_lorentzian() {
        let traj = |_t: f64| (F, QL);
        let f_ro = F + 5e6;
        let tr = resonator_envelope(&traj, &setup(f_ro, DriveWindow::always(), 3000, 0.5e-9, Complex64::new(0.0, 0.0))).unwrap();
        let ss = steady_field(F, QL, f_ro, kappa_ext());
        assert!((tr.field[2999] - ss).norm() < 1e-6 * ss.norm());
        let gamma = F / (2.0 * QL);
        let lorentz = (QL / 828.0).powi(2) * gamma * gamma / (25e12 + gamma * gamma);
        assert!((ss.norm_sqr() / lorentz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn step_bound_enforced() {
        let traj = |_t: f64| (F, QL);
        let err = resonator_envelope(&traj, &setup(F + 1e8, DriveWindow::always(), 10, 1e-9, Complex64::new(0.0, 0.0))).unwrap_err();
        assert!(matches!(err, Error::StepTooLarge { .. }));
    }

    #[test]
    fn sampled_trajectory_interpolates() {
        let tr = SampledTrajectory {
            t0: 0.0,
            dt: 1.0,
            f_res: vec![1.0, 3.0],
            q_l: vec![10.0, 20.0],
        };
        assert_eq!(tr.at(0.5), (2.0, 15.0));
        assert_eq!(tr.at(-1.0), (1.0, 10.0));
        assert_eq!(tr.at(5.0), (3.0, 20.0));
    }
}
