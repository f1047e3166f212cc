//! Run configuration: TOML with dotted sections and unit-suffixed keys.
//!
//! ```toml
//! seed = 7
//! T_ref_mK = 10
//! units = "mK,GHz,ns"
//!
//! [material]
//! Tc_K = 1.34
//! tau0_ns = 30
//!
//! [baseline]
//! fres0_GHz = 6.837
//! Qi0 = 980
//! Qc = 828
//! alpha = 0.17
//! ```
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! and unknown unit suffixes are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mbres_core::dynamics::{GateResponseModel, MonotoneTable, PulseSequence, DEFAULT_BIASTEE_CUTOFF};
use mbres_core::mattis_bardeen::MaterialParams;
use mbres_core::resonator::{ResonatorBaseline, DEFAULT_T_REF};

use crate::table::SweepTable;
use crate::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Quantity {
    Temperature,
    Frequency,
    Time,
    Voltage,
    /// Frequency per volt.
    Slope,
    /// Dimensionless or in fixed SI units.
    Plain,
}

impl Quantity {
    fn suffixes(self) -> &'static [(&'static str, f64)] {
        match self {
            Quantity::Temperature => &[("K", 1.0), ("mK", 1e-3)],
            Quantity::Frequency => &[("Hz", 1.0), ("GHz", 1e9)],
            Quantity::Time => &[("s", 1.0), ("ns", 1e-9)],
            Quantity::Voltage => &[("V", 1.0)],
            Quantity::Slope => &[("Hz_per_V", 1.0), ("GHz_per_V", 1e9)],
            Quantity::Plain => &[],
        }
    }
}

const KEYS: &[(&str, Quantity)] = &[
    ("T_ref", Quantity::Temperature),
    ("material.Tc", Quantity::Temperature),
    ("material.tau0", Quantity::Time),
    ("material.N0", Quantity::Plain),
    ("baseline.fres0", Quantity::Frequency),
    ("baseline.Qi0", Quantity::Plain),
    ("baseline.Qc", Quantity::Plain),
    ("baseline.alpha", Quantity::Plain),
    ("simulate.tau_R", Quantity::Time),
    ("simulate.tau_F", Quantity::Time),
    ("simulate.gate_amplitude", Quantity::Voltage),
    ("simulate.gate_offset", Quantity::Voltage),
    ("simulate.vg_min", Quantity::Voltage),
    ("simulate.vg_max", Quantity::Voltage),
    ("simulate.dfres_dVg", Quantity::Slope),
    ("simulate.dQi_dVg_per_V", Quantity::Plain),
    ("simulate.dt", Quantity::Time),
    ("simulate.biastee_cutoff", Quantity::Frequency),
    ("simulate.trigger_period", Quantity::Time),
    ("simulate.readout_start", Quantity::Time),
    ("simulate.readout_duration", Quantity::Time),
    ("simulate.gate_start", Quantity::Time),
    ("simulate.gate_duration", Quantity::Time),
];

/// Units for numbers given on the command line. Files are always SI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub temperature: f64,
    pub frequency: f64,
    pub time: f64,
}

impl Default for Units {
    fn default() -> Self {
        Self {
            temperature: 1.0,
            frequency: 1.0,
            time: 1.0,
        }
    }
}

impl Units {
    /// Comma-separated unit names, e.g. `"mK,GHz,ns"`. Unmentioned
    /// quantities stay SI.
    pub fn parse(spec: &str) -> Result<Self> {
        let mut u = Self::default();
        for name in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match name {
                "K" => u.temperature = 1.0,
                "mK" => u.temperature = 1e-3,
                "Hz" => u.frequency = 1.0,
                "GHz" => u.frequency = 1e9,
                "s" => u.time = 1.0,
                "ns" => u.time = 1e-9,
                "V" => {}
                other => {
                    return Err(CliError::Config(format!(
                        "unknown unit '{other}' (allowed: K, mK, Hz, GHz, s, ns, V)"
                    )))
                }
            }
        }
        Ok(u)
    }
}

/// How the resonance and internal Q follow the gate voltage in simulations.
#[derive(Debug, Clone, PartialEq)]
pub enum GateLaw {
    /// Linear around the working point, over `[vg_min, vg_max]`.
    Linear {
        vg_min: f64,
        vg_max: f64,
        dfres_dvg: f64,
        dqi_dvg: f64,
    },
    /// Table file with columns `Vg_V,fres_Hz,Qi`.
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateConfig {
    pub tau_r: f64,
    pub tau_f: f64,
    pub sequence: PulseSequence,
    pub dt: f64,
    pub biastee_cutoff: Option<f64>,
    pub gate_law: GateLaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub material: MaterialParams,
    pub baseline: ResonatorBaseline,
    pub t_ref: f64,
    pub seed: u64,
    pub units: Units,
    pub simulate: SimulateConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::from_toml_str("", Path::new(".")).expect("defaults are valid")
    }
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut Vec<(String, toml::Value)>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            other => out.push((key, other.clone())),
        }
    }
}

fn as_f64(key: &str, v: &toml::Value) -> Result<f64> {
    match v {
        toml::Value::Float(x) => Ok(*x),
        toml::Value::Integer(i) => Ok(*i as f64),
        _ => Err(CliError::Config(format!("{key}: expected a number"))),
    }
}

/// Match `key` against the known names and return the SI scale factor.
fn resolve(key: &str) -> Option<(&'static str, f64)> {
    for &(base, q) in KEYS {
        if q == Quantity::Plain {
            if key == base {
                return Some((base, 1.0));
            }
            continue;
        }
        if let Some(suffix) = key.strip_prefix(base).and_then(|s| s.strip_prefix('_')) {
            if let Some(&(_, scale)) = q.suffixes().iter().find(|(s, _)| *s == suffix) {
                return Some((base, scale));
            }
        }
    }
    None
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, dir)
    }

    /// Parse a configuration; relative paths inside it resolve against `dir`.
    pub fn from_toml_str(text: &str, dir: &Path) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
        let mut flat = Vec::new();
        flatten("", &table, &mut flat);

        let mut values: BTreeMap<&'static str, f64> = BTreeMap::new();
        let mut seed = 0u64;
        let mut units = Units::default();
        let mut gate_table = None;
        for (key, v) in &flat {
            match key.as_str() {
                "seed" => {
                    seed = match v {
                        toml::Value::Integer(i) if *i >= 0 => *i as u64,
                        _ => return Err(CliError::Config("seed: expected a non-negative integer".into())),
                    };
                    continue;
                }
                "units" => {
                    let spec = match v {
                        toml::Value::String(s) => s.clone(),
                        toml::Value::Array(a) => a
                            .iter()
                            .map(|x| x.as_str().map(str::to_string))
                            .collect::<Option<Vec<_>>>()
                            .ok_or_else(|| CliError::Config("units: expected strings".into()))?
                            .join(","),
                        _ => return Err(CliError::Config("units: expected a string or array".into())),
                    };
                    units = Units::parse(&spec)?;
                    continue;
                }
                "simulate.gate_table" => {
                    let p = v
                        .as_str()
                        .ok_or_else(|| CliError::Config("simulate.gate_table: expected a path".into()))?;
                    gate_table = Some(dir.join(p));
                    continue;
                }
                _ => {}
            }
            let (base, scale) = resolve(key).ok_or_else(|| CliError::Config(format!("unknown key '{key}'")))?;
            if values.insert(base, as_f64(key, v)? * scale).is_some() {
                return Err(CliError::Config(format!("'{base}' given more than once")));
            }
        }
        let get = |k: &str, default: f64| values.get(k).copied().unwrap_or(default);

        let mut material = MaterialParams::new(get("material.Tc", 1.34), get("material.tau0", 30e-9))?;
        if let Some(&n0) = values.get("material.N0") {
            material = material.with_n0(n0)?;
        }
        let baseline = ResonatorBaseline::new(
            get("baseline.fres0", 6.837e9),
            get("baseline.Qi0", 980.0),
            get("baseline.Qc", 828.0),
            get("baseline.alpha", 0.17),
        )?;
        let t_ref = get("T_ref", DEFAULT_T_REF);
        if !(t_ref > 0.0 && t_ref < material.tc()) {
            return Err(CliError::Config(format!("T_ref = {t_ref} K must lie in (0, T_c)")));
        }

        let offset = get("simulate.gate_offset", 23.5);
        let mut sequence = PulseSequence::standard(baseline.f_res0(), get("simulate.gate_amplitude", 0.25), offset);
        sequence.trigger_period = get("simulate.trigger_period", sequence.trigger_period);
        sequence.readout_start = get("simulate.readout_start", sequence.readout_start);
        sequence.readout_duration = get("simulate.readout_duration", sequence.readout_duration);
        sequence.gate_start = get("simulate.gate_start", sequence.gate_start);
        sequence.gate_duration = get("simulate.gate_duration", sequence.gate_duration);
        sequence.validate()?;
        let cutoff = get("simulate.biastee_cutoff", DEFAULT_BIASTEE_CUTOFF);
        let gate_law = match gate_table {
            Some(p) => GateLaw::Table(p),
            None => GateLaw::Linear {
                vg_min: get("simulate.vg_min", offset - 10.0),
                vg_max: get("simulate.vg_max", offset + 10.0),
                dfres_dvg: get("simulate.dfres_dVg", -2e6),
                dqi_dvg: get("simulate.dQi_dVg_per_V", -30.0),
            },
        };
        let simulate = SimulateConfig {
            tau_r: get("simulate.tau_R", 100e-9),
            tau_f: get("simulate.tau_F", 100e-9),
            sequence,
            dt: get("simulate.dt", 1e-9),
            biastee_cutoff: if cutoff > 0.0 { Some(cutoff) } else { None },
            gate_law,
        };
        for (name, v) in [("simulate.tau_R", simulate.tau_r), ("simulate.tau_F", simulate.tau_f), ("simulate.dt", simulate.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("{name} must be positive")));
            }
        }
        Ok(Self {
            material,
            baseline,
            t_ref,
            seed,
            units,
            simulate,
        })
    }

    /// Gate response model built from the configured gate law.
    pub fn gate_model(&self) -> Result<GateResponseModel> {
        let s = &self.simulate;
        let (f, q) = match &s.gate_law {
            GateLaw::Linear {
                vg_min,
                vg_max,
                dfres_dvg,
                dqi_dvg,
            } => {
                let v0 = s.sequence.gate_offset;
                let f = |v: f64| self.baseline.f_res0() + dfres_dvg * (v - v0);
                let q = |v: f64| self.baseline.q_i0() + dqi_dvg * (v - v0);
                (
                    MonotoneTable::linear(*vg_min, *vg_max, f(*vg_min), f(*vg_max))?,
                    MonotoneTable::linear(*vg_min, *vg_max, q(*vg_min), q(*vg_max))?,
                )
            }
            GateLaw::Table(path) => {
                let t = SweepTable::read_path(path)?;
                let vg = t.require(&["Vg_V"])?;
                (
                    MonotoneTable::new(vg.clone(), t.require(&["fres_Hz"])?)?,
                    MonotoneTable::new(vg, t.require(&["Qi"])?)?,
                )
            }
        };
        Ok(GateResponseModel::new(s.tau_r, s.tau_f, f, q)?)
    }

    /// Flat metadata describing the physical configuration.
    pub fn metadata(&self) -> Vec<(String, String)> {
        let m = &self.material;
        let b = &self.baseline;
        let mut out = vec![
            ("Tc_K".to_string(), fmt(m.tc())),
            ("tau0_s".into(), fmt(m.tau0())),
        ];
        if let Some(n0) = m.n0() {
            out.push(("N0".into(), fmt(n0)));
        }
        out.extend([
            ("fres0_Hz".into(), fmt(b.f_res0())),
            ("Qi0".into(), fmt(b.q_i0())),
            ("Qc".into(), fmt(b.q_c())),
            ("alpha".into(), fmt(b.alpha())),
            ("T_ref_K".into(), fmt(self.t_ref)),
        ]);
        out
    }
}

/// Shortest round-trip representation; non-finite values as `nan`, `inf`, `-inf`.
pub fn fmt(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

/// A list of values: `a,b,c`, a linear range `lo:hi:n`, or a logarithmic
/// range `log:lo:hi:n`. Values are multiplied by `scale`.
pub fn parse_grid(spec: &str, scale: f64) -> Result<Vec<f64>> {
    let bad = || CliError::Config(format!("malformed grid '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let (log, body) = match spec.strip_prefix("log:") {
        Some(rest) => (true, rest),
        None => (false, spec),
    };
    let values = if body.contains(':') {
        let parts: Vec<&str> = body.split(':').collect();
        if parts.len() != 3 {
            return Err(bad());
        }
        let (lo, hi) = (num(parts[0])? * scale, num(parts[1])? * scale);
        let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if n == 0 {
            return Err(bad());
        }
        if log {
            if !(lo > 0.0 && hi > 0.0) {
                return Err(CliError::Config(format!("log grid '{spec}' needs positive bounds")));
            }
            mbres_core::dynamics::log_grid(lo, hi, n)
        } else if n == 1 {
            vec![lo]
        } else {
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
        }
    } else if log {
        return Err(bad());
    } else {
        body.split(',').map(|s| num(s).map(|v| v * scale)).collect::<Result<Vec<_>>>()?
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(values)
}
