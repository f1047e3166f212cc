//! One function per subcommand. Each takes parsed inputs and returns the
//! tables and records to emit; file handling lives in the binary.

use std::f64::consts::PI;

use log::warn;
use mbres_core::dynamics::{
    max_stable_step, resonator_envelope, sideband_sweep, simulate_map, DriveWindow, EnvelopeSetup, MapOptions,
    SidebandModel, SidebandOptions,
};
use mbres_core::fitting::{
    circle_fit, exp_fit, lorentzian_fit, mb_fit, MbFitMode, MbFitOptions, MbWarning, MbWeighting, NotchResonator,
};
use mbres_core::mattis_bardeen::{sigma_ratio, MaterialParams, QuasiparticleDensity};
use mbres_core::noise::{add_complex_noise, multiplicative_noise, noise_sigma, rng_from_seed, RNG_ALGORITHM};
use mbres_core::resonator::{
    effective_temperature, freq_shift, loss_shift, qp_recombination_time_generic, qp_recombination_time_thermal,
    ring_up_time, state_at, ResonatorBaseline,
};
use num_complex::Complex64;

use crate::config::{fmt, RunConfig};
use crate::table::*;
use crate::{CliError, Result};

fn rng_meta(seed: u64) -> [(String, String); 2] {
    [("seed".into(), seed.to_string()), ("rng".into(), RNG_ALGORITHM.into())]
}

fn require_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(CliError::Config(format!("{name} grid is empty")));
    }
    Ok(())
}

pub fn cmd_conductivity(cfg: &RunConfig, temps: &[f64]) -> Result<SweepTable> {
    require_grid("temperature", temps)?;
    let mut t = SweepTable::new("conductivity", SCHEMA_CONDUCTIVITY).with_meta(cfg.metadata());
    for &temp in temps {
        let s = sigma_ratio(temp, cfg.baseline.f_res0(), &cfg.material, None)?;
        t.push(vec![temp, s.s1, s.s2]);
    }
    t.validate()?;
    Ok(t)
}

pub fn cmd_response(cfg: &RunConfig, temps: &[f64]) -> Result<SweepTable> {
    require_grid("temperature", temps)?;
    let mut t = SweepTable::new("response", SCHEMA_RESPONSE).with_meta(cfg.metadata());
    for &temp in temps {
        let s = state_at(temp, cfg.t_ref, &cfg.baseline, &cfg.material)?;
        // Shifts taken directly; differencing f_res or 1/Q_i would cancel.
        let dff = freq_shift(temp, cfg.t_ref, &cfg.baseline, &cfg.material)?;
        let dinvq = loss_shift(temp, cfg.t_ref, &cfg.baseline, &cfg.material)?;
        t.push(vec![temp, dff, dinvq, s.f_res, s.q_i]);
    }
    t.validate()?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TeffOutput {
    pub table: SweepTable,
    /// Rows whose loss could not be inverted, with the reason.
    pub flagged: Vec<(usize, String)>,
}

/// Invert each `dinvQ` row to `T_eff` and predict the frequency shift. The
/// first input column is carried through as `x`.
pub fn cmd_teff(cfg: &RunConfig, input: &SweepTable) -> Result<TeffOutput> {
    let dinvq = input.require(&["dinvQ"])?;
    if input.columns.is_empty() || input.rows.is_empty() {
        return Err(CliError::Schema("teff input has no rows".into()));
    }
    let x = input.column(0);
    let mut table = SweepTable::new("teff", SCHEMA_TEFF)
        .with_meta(cfg.metadata())
        .with_meta([("x_column", input.columns[0].clone())]);
    let mut flagged = Vec::new();
    for (i, (&x, &l)) in x.iter().zip(&dinvq).enumerate() {
        match effective_temperature(l, cfg.t_ref, &cfg.baseline, &cfg.material) {
            Ok(teff) => {
                let dff = if l == 0.0 {
                    0.0
                } else {
                    freq_shift(teff, cfg.t_ref, &cfg.baseline, &cfg.material)?
                };
                table.push(vec![x, l, teff, dff]);
            }
            Err(e) => {
                warn!("row {}: x = {x}, dinvQ = {l}: {e}", i + 1);
                flagged.push((i, e.to_string()));
                table.push(vec![x, l, f64::NAN, f64::NAN]);
            }
        }
    }
    Ok(TeffOutput { table, flagged })
}

pub fn cmd_tauqp(cfg: &RunConfig, temps: &[f64]) -> Result<SweepTable> {
    require_grid("temperature", temps)?;
    let mut t = SweepTable::new("tauqp", SCHEMA_TAUQP).with_meta(cfg.metadata());
    for &temp in temps {
        t.push(vec![temp, qp_recombination_time_thermal(temp, &cfg.material)?]);
    }
    t.validate()?;
    Ok(t)
}

/// Recombination time for given densities; needs `material.N0`.
pub fn cmd_tauqp_density(cfg: &RunConfig, densities: &[f64]) -> Result<SweepTable> {
    require_grid("density", densities)?;
    let mut t = SweepTable::new("tauqp", SCHEMA_TAUQP_DENSITY).with_meta(cfg.metadata());
    for &n in densities {
        t.push(vec![n, qp_recombination_time_generic(QuasiparticleDensity(n), &cfg.material)?]);
    }
    t.validate()?;
    Ok(t)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutput {
    /// One `t_s,re,im` table per readout frequency, in input order.
    pub traces: Vec<SweepTable>,
    /// Long format `t_s,fro_Hz,re,im`, time-major within each frequency.
    pub map: SweepTable,
    /// Programmed gate voltage and resonator trajectory.
    pub trajectory: SweepTable,
}

pub fn cmd_simulate(cfg: &RunConfig, f_ro: &[f64], snr_db: f64, parallel: bool) -> Result<SimulateOutput> {
    require_grid("readout frequency", f_ro)?;
    let s = &cfg.simulate;
    let map = simulate_map(
        &s.sequence,
        f_ro,
        &cfg.gate_model()?,
        &cfg.baseline,
        &MapOptions {
            dt: s.dt,
            biastee_cutoff: s.biastee_cutoff,
            parallel,
        },
    )?;
    let seq = &s.sequence;
    let common: Vec<(String, String)> = cfg
        .metadata()
        .into_iter()
        .chain([
            ("dt_s".to_string(), fmt(s.dt)),
            ("tau_R_s".into(), fmt(s.tau_r)),
            ("tau_F_s".into(), fmt(s.tau_f)),
            ("trigger_period_s".into(), fmt(seq.trigger_period)),
            ("readout_start_s".into(), fmt(seq.readout_start)),
            ("readout_duration_s".into(), fmt(seq.readout_duration)),
            ("gate_start_s".into(), fmt(seq.gate_start)),
            ("gate_duration_s".into(), fmt(seq.gate_duration)),
            ("gate_amplitude_V".into(), fmt(seq.gate_amplitude)),
            ("gate_offset_V".into(), fmt(seq.gate_offset)),
            ("biastee_cutoff_Hz".into(), fmt(s.biastee_cutoff.unwrap_or(0.0))),
            ("snr_dB".into(), fmt(snr_db)),
        ])
        .chain(rng_meta(cfg.seed))
        .collect();

    // Noise is drawn serially in input order so parallel runs stay identical.
    let sigma = noise_sigma(snr_db, 1.0);
    let mut rng = rng_from_seed(cfg.seed);
    let mut traces = Vec::with_capacity(f_ro.len());
    let mut long = SweepTable::new("map", SCHEMA_MAP).with_meta(common.clone());
    for (k, tr) in map.traces.iter().enumerate() {
        let mut sig = tr.s.clone();
        add_complex_noise(&mut sig, sigma, &mut rng);
        let mut t = SweepTable::new("timetrace", SCHEMA_TIMETRACE)
            .with_meta(common.clone())
            .with_meta([("fro_Hz", fmt(f_ro[k]))]);
        for (i, z) in sig.iter().enumerate() {
            let time = tr.time(i);
            t.push(vec![time, z.re, z.im]);
            long.push(vec![time, f_ro[k], z.re, z.im]);
        }
        traces.push(t);
    }
    let mut trajectory = SweepTable::new("trajectory", SCHEMA_TRAJECTORY).with_meta(common);
    for i in 0..map.n_samples() {
        trajectory.push(vec![map.time(i), map.vg[i], map.f_res[i], map.q_i[i], map.q_l[i]]);
    }
    Ok(SimulateOutput {
        traces,
        map: long,
        trajectory,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidebandOutput {
    pub table: SweepTable,
    pub f_3db: f64,
}

pub fn cmd_sidebands(
    cfg: &RunConfig,
    tau_eff: f64,
    depth: f64,
    f_g: &[f64],
    model: SidebandModel,
    f_ro: Option<f64>,
) -> Result<SidebandOutput> {
    require_grid("gate frequency", f_g)?;
    let sweep = sideband_sweep(f_g, depth, tau_eff, &cfg.baseline, &SidebandOptions { f_ro, model })?;
    let mut table = SweepTable::new("sidebands", SCHEMA_SIDEBANDS).with_meta(cfg.metadata()).with_meta([
        ("tau_eff_s".to_string(), fmt(tau_eff)),
        ("depth_Hz".into(), fmt(depth)),
        ("model".into(), format!("{model:?}")),
        ("f_3dB_Hz".into(), fmt(sweep.f_3db)),
    ]);
    for (&f, &a) in sweep.f_g.iter().zip(&sweep.amp_rel_db) {
        table.push(vec![f, a]);
    }
    Ok(SidebandOutput {
        table,
        f_3db: sweep.f_3db,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOutput {
    pub record: Vec<(String, String)>,
    pub residuals: SweepTable,
}

fn complex_trace(input: &SweepTable, x_names: &[&str]) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let x = input.require(x_names)?;
    let re = input.require(&["re"])?;
    let im = input.require(&["im"])?;
    Ok((x, re.iter().zip(&im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
}

pub fn cmd_fit_circle(input: &SweepTable) -> Result<FitOutput> {
    let (f, s) = complex_trace(input, &["freq_Hz"])?;
    let r = circle_fit(&f, &s)?;
    let mut record = vec![
        ("fres_Hz".to_string(), fmt(r.f_res)),
        ("QL".into(), fmt(r.q_l)),
        ("Qc".into(), fmt(r.q_c)),
        ("Qi".into(), fmt(r.q_i)),
    ];
    record.extend(r.fit.to_record());
    let mut residuals = SweepTable::new("circle_residuals", SCHEMA_S21);
    for (&f, &z) in f.iter().zip(&s) {
        let d = z - r.model.s21(f);
        residuals.push(vec![f, d.re, d.im]);
    }
    Ok(FitOutput { record, residuals })
}

/// Lorentzian on `|S21|²` of a complex trace, or on column `y` of a real one.
pub fn cmd_fit_lorentzian(input: &SweepTable) -> Result<FitOutput> {
    let f = input.require(&["freq_Hz", "fro_Hz"])?;
    let y = if input.has_columns(&["re", "im"]) {
        complex_trace(input, &["freq_Hz", "fro_Hz"])?.1.iter().map(|z| z.norm_sqr()).collect()
    } else {
        input.require(&["y"])?
    };
    let (p, fit) = lorentzian_fit(&f, &y)?;
    let mut record = vec![
        ("fstar_Hz".to_string(), fmt(p.f_star)),
        ("gamma_Hz".into(), fmt(p.gamma)),
        ("beta".into(), fmt(p.beta)),
        ("theta".into(), fmt(p.theta)),
        (
            "QL".into(),
            fmt(p.q_loaded(mbres_core::fitting::WidthConvention::HalfWidth)),
        ),
    ];
    record.extend(fit.to_record());
    let mut residuals = SweepTable::new("lorentzian_residuals", &["freq_Hz", "residual"]);
    for (&f, &y) in f.iter().zip(&y) {
        residuals.push(vec![f, y - p.eval(f)]);
    }
    Ok(FitOutput { record, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ExpFitWindow {
    /// Start of the fit window and the anchor time `t0`; defaults to the
    /// trace's recorded drive start, else its first sample.
    pub t_start: Option<f64>,
    pub t_stop: Option<f64>,
    /// Anchor value; defaults to the data at `t_start`.
    pub a: Option<f64>,
}

/// Exponential relaxation fit of `|s|` over a window of a time trace.
pub fn cmd_fit_exp(input: &SweepTable, window: &ExpFitWindow) -> Result<FitOutput> {
    let (t, s) = complex_trace(input, &["t_s"])?;
    let y_all: Vec<f64> = s.iter().map(|z| z.norm()).collect();
    let t_start = window
        .t_start
        .or_else(|| input.meta_f64("drive_start_s"))
        .unwrap_or(t[0]);
    let t_stop = window.t_stop.unwrap_or(f64::INFINITY);
    // Tolerate sample times that sit a rounding error before the window start.
    let eps = 1e-9 * (t.get(1).copied().unwrap_or(t[0]) - t[0]).abs();
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= t_start - eps && t[i] <= t_stop).collect();
    if idx.len() < 3 {
        return Err(CliError::Config("exponential fit window holds fewer than 3 samples".into()));
    }
    let t0 = t[idx[0]];
    let tw: Vec<f64> = idx.iter().map(|&i| t[i]).collect();
    let yw: Vec<f64> = idx.iter().map(|&i| y_all[i]).collect();
    let a = window.a.unwrap_or(yw[0]);
    let (p, fit) = exp_fit(&tw, &yw, t0, a)?;
    let mut record = vec![
        ("tau_s".to_string(), fmt(p.tau)),
        ("A".into(), fmt(p.a)),
        ("B".into(), fmt(p.b)),
        ("t0_s".into(), fmt(p.t0)),
    ];
    record.extend(fit.to_record());
    let mut residuals = SweepTable::new("exp_residuals", &["t_s", "residual"]);
    for (&t, &y) in tw.iter().zip(&yw) {
        residuals.push(vec![t, y - p.eval(t)]);
    }
    Ok(FitOutput { record, residuals })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MbFitSettings {
    pub mode: MbFitMode,
    pub weighting: MbWeighting,
    /// Overrides the `T_ref_K` recorded in the input.
    pub t_ref: Option<f64>,
}

impl Default for MbFitSettings {
    fn default() -> Self {
        Self {
            mode: MbFitMode::Averaged,
            weighting: MbWeighting::Uniform,
            t_ref: None,
        }
    }
}

/// `α` and `T_c` from a response table.
pub fn cmd_fit_mb(cfg: &RunConfig, input: &SweepTable, settings: &MbFitSettings) -> Result<FitOutput> {
    let t = input.require(&["T_K"])?;
    let dff = input.require(&["dff"])?;
    let dinvq = input.require(&["dinvQ"])?;
    let f_res = input.meta_f64("fres0_Hz").unwrap_or(cfg.baseline.f_res0());
    let options = MbFitOptions {
        f_res,
        t_ref: settings.t_ref.or_else(|| input.meta_f64("T_ref_K")),
        mode: settings.mode,
        weighting: settings.weighting.clone(),
    };
    let r = mb_fit(&t, &dff, &dinvq, &options)?;
    let mut record = vec![
        ("alpha".to_string(), fmt(r.alpha)),
        ("alpha_stderr".into(), fmt(r.alpha_stderr)),
        ("Tc_K".into(), fmt(r.tc)),
        ("Tc_K_stderr".into(), fmt(r.tc_stderr)),
        ("mode".into(), format!("{:?}", settings.mode)),
    ];
    for (k, cf) in r.channel_fits.iter().enumerate() {
        record.push((format!("channel{k}_converged"), cf.converged.to_string()));
        record.push((format!("channel{k}_residual_norm"), fmt(cf.residual_norm)));
    }
    for w in &r.warnings {
        match w {
            MbWarning::InsufficientTemperatureRange { t_max, tc } => {
                warn!("sweep ends at {t_max} K, below 0.4 T_c = {} K; alpha and T_c are correlated", 0.4 * tc);
                record.push(("warning".into(), "insufficient_temperature_range".into()));
            }
        }
    }
    // Residuals against the fitted parameters at the configured frequency.
    let b = &cfg.baseline;
    let fitted = ResonatorBaseline::new(f_res, b.q_i0(), b.q_c(), r.alpha)?;
    let material = MaterialParams::new(r.tc, cfg.material.tau0())?;
    let t_ref = options.t_ref.unwrap_or_else(|| t.iter().copied().fold(f64::INFINITY, f64::min));
    let mut residuals = SweepTable::new("mb_residuals", &["T_K", "dff_residual", "dinvQ_residual"]);
    for i in 0..t.len() {
        let df = freq_shift(t[i], t_ref, &fitted, &material)?;
        let dl = loss_shift(t[i], t_ref, &fitted, &material)?;
        residuals.push(vec![t[i], dff[i] - df, dinvq[i] - dl]);
    }
    Ok(FitOutput { record, residuals })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenS21Options {
    pub points: usize,
    /// Total span in loaded linewidths `f_res/Q_L`.
    pub span_linewidths: f64,
    pub phi: f64,
    pub amplitude: f64,
    pub phase: f64,
    pub delay: f64,
    pub snr_db: f64,
}

impl Default for GenS21Options {
    fn default() -> Self {
        Self {
            points: 801,
            span_linewidths: 10.0,
            phi: 0.0,
            amplitude: 1.0,
            phase: 0.0,
            delay: 0.0,
            snr_db: f64::INFINITY,
        }
    }
}

/// Notch trace from the configured baseline with optional complex noise.
pub fn cmd_gen_s21(cfg: &RunConfig, o: &GenS21Options) -> Result<SweepTable> {
    if o.points < 2 || !(o.span_linewidths > 0.0) {
        return Err(CliError::Config("s21 generation needs at least 2 points and a positive span".into()));
    }
    let b = &cfg.baseline;
    let mut m = NotchResonator::from_quality_factors(b.f_res0(), b.q_i0(), b.q_c(), o.phi);
    m.amplitude = o.amplitude;
    m.phase = o.phase;
    m.delay = o.delay;
    let lw = m.f_res / m.q_l;
    let half = 0.5 * o.span_linewidths * lw;
    let f: Vec<f64> = (0..o.points)
        .map(|i| m.f_res - half + 2.0 * half * i as f64 / (o.points - 1) as f64)
        .collect();
    let mut s: Vec<Complex64> = f.iter().map(|&f| m.s21(f)).collect();
    add_complex_noise(&mut s, noise_sigma(o.snr_db, o.amplitude), &mut rng_from_seed(cfg.seed));
    let mut t = SweepTable::new("s21", SCHEMA_S21)
        .with_meta([
            ("truth.fres_Hz".to_string(), fmt(m.f_res)),
            ("truth.Qi".into(), fmt(b.q_i0())),
            ("truth.Qc".into(), fmt(b.q_c())),
            ("truth.QL".into(), fmt(m.q_l)),
            ("truth.phi".into(), fmt(o.phi)),
            ("truth.amplitude".into(), fmt(o.amplitude)),
            ("truth.phase".into(), fmt(o.phase)),
            ("truth.delay_s".into(), fmt(o.delay)),
            ("snr_dB".into(), fmt(o.snr_db)),
        ])
        .with_meta(rng_meta(cfg.seed));
    for (&f, z) in f.iter().zip(&s) {
        t.push(vec![f, z.re, z.im]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenTimetraceOptions {
    /// Readout frequency; `None` reads out on resonance.
    pub f_ro: Option<f64>,
    pub dt: f64,
    pub duration: f64,
    pub drive_start: f64,
    pub drive_stop: f64,
    pub snr_db: f64,
}

impl Default for GenTimetraceOptions {
    fn default() -> Self {
        Self {
            f_ro: None,
            dt: 1e-9,
            duration: 2e-6,
            drive_start: 0.2e-6,
            drive_stop: f64::INFINITY,
            snr_db: f64::INFINITY,
        }
    }
}

/// Ring-up (and ring-down) of the baseline resonator under a rectangular drive.
pub fn cmd_gen_timetrace(cfg: &RunConfig, o: &GenTimetraceOptions) -> Result<SweepTable> {
    let b = &cfg.baseline;
    let f_ro = o.f_ro.unwrap_or(b.f_res0());
    let q_l = b.q_l0();
    let n = (o.duration / o.dt).round() as usize + 1;
    let max = max_stable_step((f_ro - b.f_res0()).abs(), ring_up_time(b.f_res0(), q_l));
    if o.dt > max {
        return Err(CliError::Config(format!("dt = {} s exceeds the stable step {max} s", o.dt)));
    }
    let traj = move |_t: f64| (b.f_res0(), q_l);
    let tr = resonator_envelope(
        &traj,
        &EnvelopeSetup {
            f_ro,
            drive: DriveWindow {
                start: o.drive_start,
                end: o.drive_stop,
            },
            kappa_ext: 2.0 * PI * b.f_res0() / b.q_c(),
            t0: 0.0,
            dt: o.dt,
            n_samples: n,
            initial: Complex64::new(0.0, 0.0),
        },
    )?;
    let mut s = tr.s.clone();
    add_complex_noise(&mut s, noise_sigma(o.snr_db, 1.0), &mut rng_from_seed(cfg.seed));
    let mut t = SweepTable::new("timetrace", SCHEMA_TIMETRACE)
        .with_meta([
            ("truth.fres_Hz".to_string(), fmt(b.f_res0())),
            ("truth.QL".into(), fmt(q_l)),
            ("truth.tau_s".into(), fmt(ring_up_time(b.f_res0(), q_l))),
            ("fro_Hz".into(), fmt(f_ro)),
            ("drive_start_s".into(), fmt(o.drive_start)),
            ("drive_stop_s".into(), fmt(o.drive_stop)),
            ("snr_dB".into(), fmt(o.snr_db)),
        ])
        .with_meta(rng_meta(cfg.seed));
    for (i, z) in s.iter().enumerate() {
        t.push(vec![tr.time(i), z.re, z.im]);
    }
    Ok(t)
}

/// Forward response sweep with multiplicative noise of relative size
/// `rel_noise` on both shift channels.
pub fn cmd_gen_response(cfg: &RunConfig, temps: &[f64], rel_noise: f64) -> Result<SweepTable> {
    let clean = cmd_response(cfg, temps)?;
    let mut dff = clean.column(1);
    let mut dinvq = clean.column(2);
    let mut rng = rng_from_seed(cfg.seed);
    multiplicative_noise(&mut dff, rel_noise, &mut rng);
    multiplicative_noise(&mut dinvq, rel_noise, &mut rng);
    let b = &cfg.baseline;
    let mut t = SweepTable::new("response", SCHEMA_RESPONSE)
        .with_meta(cfg.metadata())
        .with_meta([
            ("truth.alpha".to_string(), fmt(b.alpha())),
            ("truth.Tc_K".into(), fmt(cfg.material.tc())),
            ("rel_noise".into(), fmt(rel_noise)),
        ])
        .with_meta(rng_meta(cfg.seed));
    for (i, &temp) in temps.iter().enumerate() {
        let q_i = 1.0 / (1.0 / b.q_i0() + dinvq[i]);
        t.push(vec![temp, dff[i], dinvq[i], b.f_res0() * (1.0 + dff[i]), q_i]);
    }
    Ok(t)
}
