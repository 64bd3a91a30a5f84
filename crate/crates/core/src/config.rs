//! Run configuration in a flat `key = value` text format.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Unknown
//! or repeated keys are errors. `master_seed` has no default. Every other
//! key falls back to a documented default, and the keys that did so are
//! listed in [`RunConfig::defaulted`] so run metadata can record them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hl::{HLConfig, Integrator, MemoryMethod, SpinState};
use crate::model::{LorentzianCoupling, SpectrumKind};
use crate::noise::TimeGrid;
use crate::ww::VolterraStepper;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    NoiseCheck,
    KernelCheck,
    HlRun,
    WwRun,
    HighT,
    Compare,
    PaperSuite,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Self::NoiseCheck,
        Self::KernelCheck,
        Self::HlRun,
        Self::WwRun,
        Self::HighT,
        Self::Compare,
        Self::PaperSuite,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::NoiseCheck => "noise-check",
            Self::KernelCheck => "kernel-check",
            Self::HlRun => "hl-run",
            Self::WwRun => "ww-run",
            Self::HighT => "high-t",
            Self::Compare => "compare",
            Self::PaperSuite => "paper-suite",
        }
    }
}

impl FromStr for Experiment {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
                format!("unknown experiment `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumName {
    Quantum,
    Classical,
    QuantumNoZeroPoint,
}

impl SpectrumName {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Quantum => "quantum",
            Self::Classical => "classical",
            Self::QuantumNoZeroPoint => "quantum-no-zero-point",
        }
    }

    pub fn at(&self, temperature: f64) -> SpectrumKind {
        match self {
            Self::Quantum => SpectrumKind::QuantumZeroPoint { temperature },
            Self::Classical => SpectrumKind::ClassicalLinear { temperature },
            Self::QuantumNoZeroPoint => SpectrumKind::QuantumNoZeroPoint { temperature },
        }
    }
}

impl FromStr for SpectrumName {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "quantum" => Ok(Self::Quantum),
            "classical" => Ok(Self::Classical),
            "quantum-no-zero-point" => Ok(Self::QuantumNoZeroPoint),
            _ => Err(format!(
                "unknown spectrum `{s}` (expected quantum, classical or quantum-no-zero-point)"
            )),
        }
    }
}

/// Size of the paper-suite runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteScale {
    /// 5,000 trajectories at T = 0 and 25,000 at high temperature.
    Full,
    /// 2,500 trajectories everywhere with widened high-temperature bands.
    Smoke,
}

impl FromStr for SuiteScale {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Self::Full),
            "smoke" => Ok(Self::Smoke),
            _ => Err(format!("unknown suite scale `{s}` (expected full or smoke)")),
        }
    }
}

impl SuiteScale {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::Smoke => "smoke",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub master_seed: u64,
    pub omega0: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub spectrum: SpectrumName,
    pub b_ext: [f64; 3],
    pub s0: [f64; 3],
    pub dt: f64,
    pub t_max: f64,
    pub output_dt: f64,
    pub n_traj: usize,
    /// Individual trajectories written next to an ensemble.
    pub n_show: usize,
    pub memory_method: MemoryMethod,
    pub integrator: Integrator,
    pub spin_length: f64,
    pub ww_stepper: VolterraStepper,
    /// Quadrature overrides for kernel-check; `None` means the automatic rule.
    pub omega_max: Option<f64>,
    pub quadrature_points: Option<usize>,
    pub kernel_samples: usize,
    pub psd_traces: usize,
    pub psd_samples: usize,
    pub tail_fraction: f64,
    pub suite: SuiteScale,
    pub out_dir: PathBuf,
    /// Keys filled from defaults rather than the file.
    pub defaulted: Vec<String>,
}

const KEYS: &[&str] = &[
    "experiment",
    "master_seed",
    "omega0",
    "gamma",
    "alpha",
    "temperature",
    "spectrum",
    "b_ext",
    "s0",
    "dt",
    "t_max",
    "output_dt",
    "n_traj",
    "n_show",
    "memory_method",
    "integrator",
    "spin_length",
    "ww_stepper",
    "omega_max",
    "quadrature_points",
    "kernel_samples",
    "psd_traces",
    "psd_samples",
    "tail_fraction",
    "suite",
    "out_dir",
];

fn config_err(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    defaulted: Vec<String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| config_err(Some(line), format!("expected `key = value`, got `{body}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(config_err(Some(line), format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(config_err(Some(line), format!("`{key}` has no value")));
            }
            if let Some((first, _)) = map.insert(key.to_string(), (line, value.to_string())) {
                return Err(config_err(Some(line), format!("`{key}` already set on line {first}")));
            }
        }
        Ok(Self {
            map,
            defaulted: Vec::new(),
        })
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T: FromStr>(&mut self, key: &'static str, default: impl FnOnce() -> T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some((line, v)) => v
                .parse()
                .map_err(|e| config_err(Some(line), format!("`{key}`: cannot parse `{v}`: {e}"))),
            None => {
                self.defaulted.push(key.to_string());
                Ok(default())
            }
        }
    }

    /// `auto` or a value.
    fn get_auto<T: FromStr>(&mut self, key: &'static str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(key) {
            Some((_, "auto")) => Ok(None),
            Some(_) => self.get(key, || unreachable!()).map(Some),
            None => {
                self.defaulted.push(key.to_string());
                Ok(None)
            }
        }
    }

    fn get_vec3(&mut self, key: &'static str, default: impl FnOnce() -> [f64; 3]) -> Result<[f64; 3]> {
        match self.raw(key) {
            Some((line, v)) => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                let parsed: std::result::Result<Vec<f64>, _> = parts.iter().map(|p| p.parse::<f64>()).collect();
                match parsed {
                    Ok(xs) if xs.len() == 3 => Ok([xs[0], xs[1], xs[2]]),
                    _ => Err(config_err(
                        Some(line),
                        format!("`{key}` must be three comma-separated numbers, got `{v}`"),
                    )),
                }
            }
            None => {
                self.defaulted.push(key.to_string());
                Ok(default())
            }
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(l, _)| *l)
    }
}

/// Step rule dt = min(0.01, 0.05/ω₀, 0.05/Γ, 0.05/|B_ext|).
pub fn default_dt(omega0: f64, gamma: f64, b_ext: &[f64; 3]) -> f64 {
    let b = Vector3::from(*b_ext).norm();
    let mut dt = 0.01f64.min(0.05 / omega0).min(0.05 / gamma);
    if b > 0.0 {
        dt = dt.min(0.05 / b);
    }
    dt
}

impl RunConfig {
    /// Parses and validates; `experiment` may be omitted only when an
    /// override is supplied.
    pub fn parse(text: &str, experiment_override: Option<Experiment>) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let experiment = match (experiment_override, e.raw("experiment")) {
            (Some(x), _) => x,
            (None, Some((line, v))) => v.parse().map_err(|m: String| config_err(Some(line), m))?,
            (None, None) => return Err(config_err(None, "`experiment` is required")),
        };
        let master_seed = match e.raw("master_seed") {
            Some(_) => e.get::<u64>("master_seed", || unreachable!())?,
            None => {
                return Err(config_err(
                    None,
                    "`master_seed` is required: runs must name their seed to be reproducible",
                ))
            }
        };
        let omega0 = e.get("omega0", || 5.0)?;
        let gamma = e.get("gamma", || 7.5)?;
        let alpha = e.get("alpha", || gamma)?;
        let temperature = e.get("temperature", || 0.0)?;
        let spectrum = e.get("spectrum", || SpectrumName::Quantum)?;
        let b_ext = e.get_vec3("b_ext", || [0.0, 0.0, -omega0])?;
        let s0 = e.get_vec3("s0", || [0.0, 0.0, 1.0])?;
        let dt = e.get("dt", || default_dt(omega0, gamma, &b_ext))?;
        let t_max = e.get("t_max", || 60.0)?;
        let output_dt = e.get("output_dt", || 0.05f64.max(dt))?;
        let n_traj = e.get("n_traj", || 5000)?;
        let n_show = e.get("n_show", || 3)?;
        let memory_method = e.get("memory_method", || MemoryMethod::AuxiliaryOscillator)?;
        let integrator = e.get("integrator", || Integrator::Rotation)?;
        let spin_length = e.get("spin_length", || crate::hl::DEFAULT_SPIN_LENGTH)?;
        let ww_stepper = e.get("ww_stepper", || VolterraStepper::Trapezoid)?;
        let omega_max = e.get_auto("omega_max")?;
        let quadrature_points = e.get_auto("quadrature_points")?;
        let kernel_samples = e.get("kernel_samples", || 200)?;
        let psd_traces = e.get("psd_traces", || 1000)?;
        let psd_samples = e.get("psd_samples", || 4096)?;
        let tail_fraction = e.get("tail_fraction", || crate::analysis::DEFAULT_TAIL_FRACTION)?;
        let suite = e.get("suite", || SuiteScale::Full)?;
        let out_dir = e.get("out_dir", || PathBuf::from("out"))?;
        if e.raw("experiment").is_none() {
            e.defaulted.push("experiment".into());
        }
        let cfg = RunConfig {
            experiment,
            master_seed,
            omega0,
            gamma,
            alpha,
            temperature,
            spectrum,
            b_ext,
            s0,
            dt,
            t_max,
            output_dt,
            n_traj,
            n_show,
            memory_method,
            integrator,
            spin_length,
            ww_stepper,
            omega_max,
            quadrature_points,
            kernel_samples,
            psd_traces,
            psd_samples,
            tail_fraction,
            suite,
            out_dir,
            defaulted: std::mem::take(&mut e.defaulted),
        };
        cfg.validate().map_err(|err| match err {
            Error::InvalidParameter { name, reason } => {
                config_err(e.line(name), format!("`{name}` {reason}"))
            }
            other => other,
        })?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(crate::error::invalid(name, reason));
        for (name, v) in [("omega0", self.omega0), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name, format!("must be > 0, got {v}"));
            }
        }
        for (name, v) in [("alpha", self.alpha), ("temperature", self.temperature)] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(name, format!("must be >= 0, got {v}"));
            }
        }
        for (name, v) in [
            ("dt", self.dt),
            ("t_max", self.t_max),
            ("output_dt", self.output_dt),
            ("spin_length", self.spin_length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(name, format!("must be > 0, got {v}"));
            }
        }
        if self.t_max < 2.0 * self.dt {
            return bad("t_max", format!("must span at least two steps of dt = {}", self.dt));
        }
        if self.output_dt < self.dt {
            return bad("output_dt", format!("must be >= dt = {}", self.dt));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return bad("tail_fraction", format!("must lie in (0, 1], got {}", self.tail_fraction));
        }
        for (name, v) in [
            ("n_traj", self.n_traj),
            ("kernel_samples", self.kernel_samples),
            ("psd_traces", self.psd_traces),
        ] {
            if v == 0 {
                return bad(name, "must be >= 1".into());
            }
        }
        if self.psd_samples < 16 {
            return bad("psd_samples", format!("must be >= 16, got {}", self.psd_samples));
        }
        if self.b_ext.iter().any(|v| !v.is_finite()) {
            return bad("b_ext", "must be finite".into());
        }
        if SpinState::new(self.s0[0], self.s0[1], self.s0[2]).is_err() {
            return bad("s0", "must be a unit vector".into());
        }
        if let Some(w) = self.omega_max {
            if !(w.is_finite() && w > 0.0) {
                return bad("omega_max", format!("must be > 0 or auto, got {w}"));
            }
        }
        if self.quadrature_points == Some(0) {
            return bad("quadrature_points", "must be >= 1 or auto".into());
        }
        Ok(())
    }

    pub fn coupling(&self) -> Result<LorentzianCoupling> {
        LorentzianCoupling::new(self.omega0, self.gamma, self.alpha)
    }

    pub fn spectrum_kind(&self) -> SpectrumKind {
        self.spectrum.at(self.temperature)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::covering(self.dt, self.t_max)
    }

    pub fn record_stride(&self) -> usize {
        ((self.output_dt / self.dt).round() as usize).max(1)
    }

    pub fn hl_config(&self) -> Result<HLConfig> {
        let mut cfg = HLConfig::new(self.coupling()?, self.spectrum_kind(), self.grid()?);
        cfg.b_ext = Vector3::from(self.b_ext);
        cfg.s0 = SpinState::new(self.s0[0], self.s0[1], self.s0[2])?;
        cfg.memory_method = self.memory_method;
        cfg.integrator = self.integrator;
        cfg.spin_length = self.spin_length;
        cfg.record_stride = self.record_stride();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every key with its resolved value, in the file format.
    pub fn to_kv(&self) -> String {
        let v3 = |v: &[f64; 3]| format!("{}, {}, {}", v[0], v[1], v[2]);
        let auto = |v: Option<String>| v.unwrap_or_else(|| "auto".into());
        let mut out = String::new();
        let pairs: Vec<(&str, String)> = vec![
            ("experiment", self.experiment.name().into()),
            ("master_seed", self.master_seed.to_string()),
            ("omega0", self.omega0.to_string()),
            ("gamma", self.gamma.to_string()),
            ("alpha", self.alpha.to_string()),
            ("temperature", self.temperature.to_string()),
            ("spectrum", self.spectrum.name().into()),
            ("b_ext", v3(&self.b_ext)),
            ("s0", v3(&self.s0)),
            ("dt", self.dt.to_string()),
            ("t_max", self.t_max.to_string()),
            ("output_dt", self.output_dt.to_string()),
            ("n_traj", self.n_traj.to_string()),
            ("n_show", self.n_show.to_string()),
            ("memory_method", self.memory_method.name().into()),
            ("integrator", self.integrator.name().into()),
            ("spin_length", self.spin_length.to_string()),
            ("ww_stepper", self.ww_stepper.name().into()),
            ("omega_max", auto(self.omega_max.map(|v| v.to_string()))),
            ("quadrature_points", auto(self.quadrature_points.map(|v| v.to_string()))),
            ("kernel_samples", self.kernel_samples.to_string()),
            ("psd_traces", self.psd_traces.to_string()),
            ("psd_samples", self.psd_samples.to_string()),
            ("tail_fraction", self.tail_fraction.to_string()),
            ("suite", self.suite.name().into()),
            ("out_dir", self.out_dir.display().to_string()),
        ];
        for (k, v) in pairs {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Reads and parses a config file.
pub fn load_config(path: &Path, experiment_override: Option<Experiment>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_err(None, format!("cannot read {}: {e}", path.display())))?;
    RunConfig::parse(&text, experiment_override)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
# Markovian reference set
experiment = hl-run
master_seed = 42
omega0 = 5
gamma = 7.5
alpha = 7.5
temperature = 0
";

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = RunConfig::parse(MINIMAL, None).unwrap();
        assert_eq!(cfg.experiment, Experiment::HlRun);
        assert_eq!(cfg.b_ext, [0.0, 0.0, -5.0]);
        assert_eq!(cfg.dt, 0.0066666666666666671f64.min(0.01));
        assert!(cfg.defaulted.contains(&"dt".to_string()));
        assert!(!cfg.defaulted.contains(&"gamma".to_string()));
        assert_eq!(cfg.record_stride(), 8);
    }

    #[test]
    fn round_trip_is_lossless() {
        let cfg = RunConfig::parse(MINIMAL, None).unwrap();
        let again = RunConfig::parse(&cfg.to_kv(), None).unwrap();
        assert_eq!(RunConfig { defaulted: vec![], ..cfg }, RunConfig { defaulted: vec![], ..again });
    }

    #[test]
    fn seed_is_mandatory() {
        let err = RunConfig::parse("experiment = hl-run\ngamma = 7.5\n", None).unwrap_err();
        assert!(err.to_string().contains("master_seed"), "{err}");
    }

    #[test]
    fn zero_width_is_rejected_with_line() {
        let text = MINIMAL.replace("gamma = 7.5", "gamma = 0");
        match RunConfig::parse(&text, None).unwrap_err() {
            Error::Config { line, message } => {
                assert_eq!(line, Some(5));
                assert!(message.contains("gamma"));
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = RunConfig::parse("master_seed = 1\nexperiment = hl-run\nfoo = 3\n", None).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
        let err = RunConfig::parse("master_seed = 1\nmaster_seed = 2\n", Some(Experiment::HlRun)).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let err = RunConfig::parse("master_seed = 1\njunk\n", Some(Experiment::HlRun)).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn override_and_bad_values() {
        let cfg = RunConfig::parse(MINIMAL, Some(Experiment::WwRun)).unwrap();
        assert_eq!(cfg.experiment, Experiment::WwRun);
        assert!(RunConfig::parse("master_seed = 1\n", None).is_err());
        let err = RunConfig::parse(&format!("{MINIMAL}s0 = 0, 0, 2\n"), None).unwrap_err();
        assert!(err.to_string().contains("s0"));
        let err = RunConfig::parse(&format!("{MINIMAL}b_ext = 0, 1\n"), None).unwrap_err();
        assert!(err.to_string().contains("line 8"), "{err}");
        let err = RunConfig::parse(&format!("{MINIMAL}integrator = euler\n"), None).unwrap_err();
        assert!(err.to_string().contains("integrator"));
    }

    #[test]
    fn auto_quadrature_keys() {
        let cfg = RunConfig::parse(&format!("{MINIMAL}omega_max = auto\nquadrature_points = 5000\n"), None).unwrap();
        assert_eq!(cfg.omega_max, None);
        assert_eq!(cfg.quadrature_points, Some(5000));
    }

    #[test]
    fn builds_simulation_config() {
        let cfg = RunConfig::parse(&format!("{MINIMAL}dt = 0.005\nt_max = 10\n"), None).unwrap();
        let hl = cfg.hl_config().unwrap();
        assert_eq!(hl.grid.len(), 2001);
        assert_eq!(hl.record_stride, 10);
        assert_eq!(hl.b_ext, Vector3::new(0.0, 0.0, -5.0));
    }
}
