use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::envelope::{resonator_envelope, DriveWindow, EnvelopeSetup, SampledTrajectory, TimeTrace};
use super::pulse::{biastee_highpass, gate_relaxation, GateResponseModel, PulseSequence};
use crate::error::Result;
use crate::resonator::{loaded_q, ResonatorBaseline};

/// Cutoff of the gate-line bias-tee, Hz.
pub const DEFAULT_BIASTEE_CUTOFF: f64 = 40e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub dt: f64,
    /// `None` bypasses the bias-tee.
    pub biastee_cutoff: Option<f64>,
    pub parallel: bool,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            dt: 1e-9,
            biastee_cutoff: Some(DEFAULT_BIASTEE_CUTOFF),
            parallel: false,
        }
    }
}

/// Traces for each readout frequency over one trigger period, plus the
/// programmed gate voltage and resonator trajectory they were driven by.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationMap {
    pub dt: f64,
    pub f_ro: Vec<f64>,
    pub traces: Vec<TimeTrace>,
    pub vg: Vec<f64>,
    pub f_res: Vec<f64>,
    pub q_i: Vec<f64>,
    pub q_l: Vec<f64>,
}

impl SimulationMap {
    pub fn n_samples(&self) -> usize {
        self.vg.len()
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.dt).round().max(0.0) as usize).min(self.n_samples() - 1)
    }

    /// Transmitted signal across `f_ro` at sample `i`.
    pub fn vertical_cut(&self, i: usize) -> Vec<Complex64> {
        self.traces.iter().map(|tr| tr.s[i]).collect()
    }
}

/// Gate pulse, bias-tee, gate relaxation, then one envelope integration per
/// readout frequency.
pub fn simulate_map(
    seq: &PulseSequence,
    f_ro_list: &[f64],
    model: &GateResponseModel,
    baseline: &ResonatorBaseline,
    options: &MapOptions,
) -> Result<SimulationMap> {
    seq.validate()?;
    crate::error::require_positive("dt", options.dt)?;
    let dt = options.dt;
    let n = (seq.trigger_period / dt).round() as usize;

    let pulse = seq.gate_pulse(dt, n);
    let coupled = match options.biastee_cutoff {
        Some(fc) => biastee_highpass(&pulse, dt, fc)?,
        None => pulse,
    };
    let vg: Vec<f64> = coupled.iter().map(|v| seq.gate_offset + v).collect();
    let (f_res, q_i) = gate_relaxation(&vg, dt, model)?;
    let q_l: Vec<f64> = q_i.iter().map(|&q| loaded_q(q, baseline.q_c())).collect();

    let trajectory = SampledTrajectory {
        t0: 0.0,
        dt,
        f_res: f_res.clone(),
        q_l: q_l.clone(),
    };
    let drive = DriveWindow {
        start: seq.readout_start,
        end: seq.readout_end(),
    };
    let kappa_ext = 2.0 * PI * baseline.f_res0() / baseline.q_c();
    let run = |&f_ro: &f64| {
        resonator_envelope(
            &trajectory,
            &EnvelopeSetup {
                f_ro,
                drive,
                kappa_ext,
                t0: 0.0,
                dt,
                n_samples: n,
                initial: Complex64::new(0.0, 0.0),
            },
        )
    };
    let traces: Result<Vec<TimeTrace>> = if options.parallel {
        f_ro_list.par_iter().map(run).collect()
    } else {
        f_ro_list.iter().map(run).collect()
    };
    Ok(SimulationMap {
        dt,
        f_ro: f_ro_list.to_vec(),
        traces: traces?,
        vg,
        f_res,
        q_i,
        q_l,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::pulse::MonotoneTable;

    fn model() -> GateResponseModel {
        GateResponseModel::new(
            100e-9,
            100e-9,
            MonotoneTable::linear(20.0, 27.0, 6.85e9, 6.82e9).unwrap(),
            MonotoneTable::linear(20.0, 27.0, 1100.0, 800.0).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn no_gate_cuts_are_time_invariant() {
        let baseline = ResonatorBaseline::new(6.837e9, 980.0, 828.0, 0.17).unwrap();
        let seq = PulseSequence::standard(6.83e9, 0.0, 23.5);
        let f_ro: Vec<f64> = (0..5).map(|k| 6.82e9 + k as f64 * 5e6).collect();
        let map = simulate_map(&seq, &f_ro, &model(), &baseline, &MapOptions::default()).unwrap();
        let a = map.vertical_cut(map.index_of(1.5e-6));
        let b = map.vertical_cut(map.index_of(4.0e-6));
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-9);
        }
    }

    #[test]
    fn parallel_matches_serial() {
        let baseline = ResonatorBaseline::new(6.837e9, 980.0, 828.0, 0.17).unwrap();
        let seq = PulseSequence::standard(6.83e9, 1.5, 23.5);
        let f_ro = [6.82e9, 6.83e9, 6.84e9];
        let serial = simulate_map(&seq, &f_ro, &model(), &baseline, &MapOptions::default()).unwrap();
        let parallel = simulate_map(
            &seq,
            &f_ro,
            &model(),
            &baseline,
            &MapOptions {
                parallel: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(serial, parallel);
    }
}
