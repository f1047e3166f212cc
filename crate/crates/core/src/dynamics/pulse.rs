use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One trigger period of the pulsed experiment. Times in seconds from the
/// trigger; the gate voltage is `gate_offset` plus the (AC-coupled) gate pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSequence {
    pub trigger_period: f64,
    pub readout_start: f64,
    pub readout_duration: f64,
    pub readout_freq: f64,
    pub gate_start: f64,
    pub gate_duration: f64,
    /// Signed pulse height, volts.
    pub gate_amplitude: f64,
    /// DC working point on the gate, volts.
    pub gate_offset: f64,
}

impl PulseSequence {
    /// 5 µs trigger, 4 µs readout from 0.6 µs, 500 ns gate pulse at 2 µs.
    pub fn standard(readout_freq: f64, gate_amplitude: f64, gate_offset: f64) -> Self {
        Self {
            trigger_period: 5e-6,
            readout_start: 0.6e-6,
            readout_duration: 4e-6,
            readout_freq,
            gate_start: 2e-6,
            gate_duration: 500e-9,
            gate_amplitude,
            gate_offset,
        }
    }

    pub fn has_gate(&self) -> bool {
        self.gate_amplitude != 0.0 && self.gate_duration > 0.0
    }

    pub fn readout_end(&self) -> f64 {
        self.readout_start + self.readout_duration
    }

    pub fn gate_end(&self) -> f64 {
        self.gate_start + self.gate_duration
    }

    pub fn validate(&self) -> Result<()> {
        let times = [
            ("trigger_period", self.trigger_period),
            ("readout_start", self.readout_start),
            ("readout_duration", self.readout_duration),
            ("gate_start", self.gate_start),
            ("gate_duration", self.gate_duration),
        ];
        for (name, v) in times {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Domain {
                    name,
                    value: v,
                    reason: "must be finite and non-negative",
                });
            }
        }
        if !(self.trigger_period > 0.0) {
            return Err(Error::Domain {
                name: "trigger_period",
                value: self.trigger_period,
                reason: "must be positive",
            });
        }
        if !(self.readout_freq > 0.0 && self.readout_freq.is_finite()) {
            return Err(Error::Domain {
                name: "readout_freq",
                value: self.readout_freq,
                reason: "must be positive",
            });
        }
        if !(self.gate_amplitude.is_finite() && self.gate_offset.is_finite()) {
            return Err(Error::InvalidInput("gate voltages must be finite".into()));
        }
        if self.readout_end() > self.trigger_period || self.gate_end() > self.trigger_period {
            return Err(Error::InvalidInput("pulses must end within the trigger period".into()));
        }
        if self.has_gate()
            && self.readout_duration > 0.0
            && (self.gate_start < self.readout_start || self.gate_end() > self.readout_end())
        {
            return Err(Error::InvalidInput("the readout window must contain the gate pulse".into()));
        }
        Ok(())
    }

    pub fn readout_on(&self, t: f64) -> bool {
        t >= self.readout_start && t < self.readout_end()
    }

    /// Gate pulse before the bias-tee, sampled at `t_i = i·dt`.
    pub fn gate_pulse(&self, dt: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let t = i as f64 * dt;
                if self.has_gate() && t >= self.gate_start && t < self.gate_end() {
                    self.gate_amplitude
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// First-order high-pass, single real pole at `2π f_c`, applied causally to a
/// uniformly sampled trace. The recursion samples the continuous response
/// exactly for input that steps on the sample grid; the signal is taken as
/// zero before the first sample.
pub fn biastee_highpass(x: &[f64], dt: f64, f_c: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::Domain {
            name: "dt",
            value: dt,
            reason: "must be positive",
        });
    }
    if !(f_c > 0.0) {
        return Err(Error::Domain {
            name: "f_c",
            value: f_c,
            reason: "must be positive",
        });
    }
    let product = dt * f_c;
    if product >= 0.1 {
        return Err(Error::SamplingTooCoarse { product });
    }
    let a = (-2.0 * std::f64::consts::PI * f_c * dt).exp();
    let mut y = Vec::with_capacity(x.len());
    let (mut prev_x, mut prev_y) = (0.0, 0.0);
    for &v in x {
        let out = a * prev_y + v - prev_x;
        y.push(out);
        prev_x = v;
        prev_y = out;
    }
    Ok(y)
}

/// Piecewise-linear lookup with strictly increasing abscissae and strictly
/// monotone values. Evaluation outside the table is an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneTable {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl MonotoneTable {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidInput("table needs at least two (x, y) pairs".into()));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("table entries must be finite".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("table abscissae must be strictly increasing".into()));
        }
        let increasing = y.windows(2).all(|w| w[1] > w[0]);
        let decreasing = y.windows(2).all(|w| w[1] < w[0]);
        if !(increasing || decreasing) {
            return Err(Error::InvalidInput("table values must be strictly monotone".into()));
        }
        Ok(Self { x, y })
    }

    /// Two-point table `y = y0 + slope (x - x0)` on `[lo, hi]`.
    pub fn linear(lo: f64, hi: f64, y_lo: f64, y_hi: f64) -> Result<Self> {
        Self::new(vec![lo, hi], vec![y_lo, y_hi])
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], self.x[self.x.len() - 1])
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::Extrapolation { x, lo, hi });
        }
        let k = self.x.partition_point(|&v| v <= x).clamp(1, self.x.len() - 1);
        let (x0, x1) = (self.x[k - 1], self.x[k]);
        let w = (x - x0) / (x1 - x0);
        Ok(self.y[k - 1] + w * (self.y[k] - self.y[k - 1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResponseModel {
    /// Lag time constant while the gate voltage rises.
    pub tau_r: f64,
    /// Lag time constant while the gate voltage falls.
    pub tau_f: f64,
    pub fres_of_vg: MonotoneTable,
    pub qi_of_vg: MonotoneTable,
}

impl GateResponseModel {
    pub fn new(tau_r: f64, tau_f: f64, fres_of_vg: MonotoneTable, qi_of_vg: MonotoneTable) -> Result<Self> {
        crate::error::require_positive("tau_R", tau_r)?;
        crate::error::require_positive("tau_F", tau_f)?;
        Ok(Self {
            tau_r,
            tau_f,
            fres_of_vg,
            qi_of_vg,
        })
    }
}

/// Relax the table targets `f_res(vg(t))`, `Q_i(vg(t))` through a
/// first-order lag. A lagged copy of the voltage picks the direction: `τ_R`
/// while `vg` is above it, `τ_F` while below. Each step is the exact
/// exponential update toward the target at the end of the step; the state
/// starts settled at the first sample.
pub fn gate_relaxation(vg: &[f64], dt: f64, model: &GateResponseModel) -> Result<(Vec<f64>, Vec<f64>)> {
    crate::error::require_positive("dt", dt)?;
    let n = vg.len();
    let mut f_res = Vec::with_capacity(n);
    let mut q_i = Vec::with_capacity(n);
    if n == 0 {
        return Ok((f_res, q_i));
    }
    let decay_r = (-dt / model.tau_r).exp();
    let decay_f = (-dt / model.tau_f).exp();
    let mut v_lag = vg[0];
    let mut f = model.fres_of_vg.eval(vg[0])?;
    let mut q = model.qi_of_vg.eval(vg[0])?;
    f_res.push(f);
    q_i.push(q);
    let mut rising = true;
    for &v in &vg[1..] {
        let f_target = model.fres_of_vg.eval(v)?;
        let q_target = model.qi_of_vg.eval(v)?;
        if v > v_lag {
            rising = true;
        } else if v < v_lag {
            rising = false;
        }
        let decay = if rising { decay_r } else { decay_f };
        v_lag = v + (v_lag - v) * decay;
        f = f_target + (f - f_target) * decay;
        q = q_target + (q - q_target) * decay;
        f_res.push(f);
        q_i.push(q);
    }
    Ok((f_res, q_i))
}
