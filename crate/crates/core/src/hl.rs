//! Classical Heisenberg-Langevin dynamics of a single spin.
//!
//! The spin direction n obeys dn/dt = n × B with
//! B = B_ext + b(t) + m(t)·ê_x, where b is the colored noise and
//! m(t) = α∫₀^t k(t−t′)S_x(t′)dt′ is the memory field. The physical moment
//! is S = ℓ·n with ℓ = `spin_length`; only the memory field sees ℓ because
//! precession is scale free. Reported S_z is the unit-vector component n_z.

use std::io::Write;
use std::str::FromStr;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::model::{kernel_and_derivative, memory_kernel_closed, LorentzianCoupling, SpectrumKind};
use crate::noise::{NoiseSynth, NoiseTrace, SeedSpec, TimeGrid};

/// Abort threshold for | |n| − 1 |.
pub const NORM_DRIFT_LIMIT: f64 = 1e-6;

/// Unit spin direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub s: Vector3<f64>,
}

impl SpinState {
    /// Fails unless |s| = 1 within 10⁻⁹.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let s = Vector3::new(x, y, z);
        let state = Self { s };
        if !(state.norm_error() < 1e-9) {
            return Err(invalid("s0", format!("spin must be a unit vector, |s| = {}", s.norm())));
        }
        Ok(state)
    }

    /// Fully excited state (0, 0, +1).
    pub fn up() -> Self {
        Self {
            s: Vector3::new(0.0, 0.0, 1.0),
        }
    }

    /// Unit vector at polar angle θ from +z, azimuth φ.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            s: Vector3::new(st * cp, st * sp, ct),
        }
    }

    pub fn norm_error(&self) -> f64 {
        (self.s.norm() - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MemoryMethod {
    /// O(N) propagation of ü + Γu̇ + ω₀²u = S_x.
    AuxiliaryOscillator,
    /// O(N²) trapezoid convolution; the reference path.
    DirectConvolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    /// Exact rotation with a midpoint field from a half-step predictor.
    Rotation,
    /// Heun predictor-corrector followed by renormalization.
    HeunRenormalized,
}

impl MemoryMethod {
    pub fn name(&self) -> &'static str {
        match self {
            Self::AuxiliaryOscillator => "auxiliary-oscillator",
            Self::DirectConvolution => "direct-convolution",
        }
    }
}

impl Integrator {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Rotation => "rotation",
            Self::HeunRenormalized => "heun-renormalized",
        }
    }
}

impl FromStr for MemoryMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auxiliary-oscillator" => Ok(Self::AuxiliaryOscillator),
            "direct-convolution" => Ok(Self::DirectConvolution),
            _ => Err(format!(
                "unknown memory method `{s}` (expected auxiliary-oscillator or direct-convolution)"
            )),
        }
    }
}

impl FromStr for Integrator {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "rotation" => Ok(Self::Rotation),
            "heun-renormalized" => Ok(Self::HeunRenormalized),
            _ => Err(format!("unknown integrator `{s}` (expected rotation or heun-renormalized)")),
        }
    }
}

/// Everything that determines a trajectory apart from its seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HLConfig {
    pub coupling: LorentzianCoupling,
    pub spectrum: SpectrumKind,
    pub b_ext: Vector3<f64>,
    pub s0: SpinState,
    pub grid: TimeGrid,
    pub memory_method: MemoryMethod,
    pub integrator: Integrator,
    /// Length ℓ of the physical moment S = ℓ·n that drives the memory field.
    pub spin_length: f64,
    /// Keep every `record_stride`-th sample.
    pub record_stride: usize,
}

pub const DEFAULT_SPIN_LENGTH: f64 = 0.5;

impl HLConfig {
    /// Field (0, 0, −ω₀), spin up, auxiliary memory, rotation integrator,
    /// spin-½ moment and every sample recorded.
    pub fn new(coupling: LorentzianCoupling, spectrum: SpectrumKind, grid: TimeGrid) -> Self {
        Self {
            coupling,
            spectrum,
            b_ext: Vector3::new(0.0, 0.0, -coupling.omega0()),
            s0: SpinState::up(),
            grid,
            memory_method: MemoryMethod::AuxiliaryOscillator,
            integrator: Integrator::Rotation,
            spin_length: DEFAULT_SPIN_LENGTH,
            record_stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spectrum.validate()?;
        if !self.b_ext.iter().all(|v| v.is_finite()) {
            return Err(invalid("b_ext", "must be finite"));
        }
        if !(self.s0.norm_error() < 1e-9) {
            return Err(invalid("s0", format!("must be a unit vector, |s0| = {}", self.s0.s.norm())));
        }
        if !(self.spin_length.is_finite() && self.spin_length > 0.0) {
            return Err(invalid("spin_length", format!("must be > 0, got {}", self.spin_length)));
        }
        if self.record_stride == 0 {
            return Err(invalid("record_stride", "must be >= 1"));
        }
        self.recorded_grid().map(|_| ())
    }

    /// Grid of the recorded samples.
    pub fn recorded_grid(&self) -> Result<TimeGrid> {
        let n = (self.grid.len() - 1) / self.record_stride + 1;
        TimeGrid::new(self.grid.dt() * self.record_stride as f64, n).map_err(|_| {
            invalid("record_stride", "leaves fewer than two recorded samples")
        })
    }

    /// Hex SHA-256 over the serialized config, trajectory count and seed.
    pub fn digest(&self, n_traj: usize, master_seed: u64) -> String {
        let payload = serde_json::json!({
            "config": self,
            "n_traj": n_traj,
            "master_seed": master_seed,
        });
        Sha256::digest(payload.to_string().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// State of the auxiliary oscillator; the memory field is α·u.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MemoryState {
    pub u: f64,
    pub v: f64,
}

/// Exact propagator of ü + Γu̇ + ω₀²u = f over one step of length h for
/// forcing f linear in time.
#[derive(Debug, Clone, Copy)]
pub struct AuxPropagator {
    h: f64,
    k: f64,
    dk: f64,
    gamma: f64,
    w2: f64,
}

impl AuxPropagator {
    pub fn new(c: &LorentzianCoupling, h: f64) -> Self {
        let (k, dk) = kernel_and_derivative(c, h);
        Self {
            h,
            k,
            dk,
            gamma: c.gamma(),
            w2: c.omega0() * c.omega0(),
        }
    }

    /// Advances with f going linearly from `f0` to `f1` across the step.
    pub fn step(&self, mem: MemoryState, f0: f64, f1: f64) -> MemoryState {
        // particular solution p0 + p1·t, homogeneous remainder y
        let p1 = (f1 - f0) / self.h / self.w2;
        let p0 = (f0 - self.gamma * p1) / self.w2;
        let y0 = mem.u - p0;
        let yd0 = mem.v - p1;
        let y = (yd0 + self.gamma * y0) * self.k + y0 * self.dk;
        let yd = yd0 * self.dk - y0 * self.w2 * self.k;
        MemoryState {
            u: y + p0 + p1 * self.h,
            v: yd + p1,
        }
    }
}

/// One step of the auxiliary oscillator under constant forcing `s_x`.
pub fn memory_aux_step(mem: MemoryState, s_x: f64, c: &LorentzianCoupling, dt: f64) -> MemoryState {
    AuxPropagator::new(c, dt).step(mem, s_x, s_x)
}

/// Trapezoid value of α∫₀^{t_k} k(t_k − t′)S_x(t′)dt′ from samples on a
/// uniform grid.
pub fn memory_direct(s_x: &[f64], c: &LorentzianCoupling, dt: f64, k: usize) -> f64 {
    assert!(k < s_x.len(), "history shorter than requested index");
    if k == 0 {
        return 0.0;
    }
    // k(0) = 0, so the j = k endpoint drops out
    let mut acc = 0.5 * memory_kernel_closed(c, k as f64 * dt) * s_x[0];
    for j in 1..k {
        acc += memory_kernel_closed(c, (k - j) as f64 * dt) * s_x[j];
    }
    c.alpha() * dt * acc
}

/// B_ext + b + m·ê_x.
pub fn effective_field(memory: f64, noise: &Vector3<f64>, b_ext: &Vector3<f64>) -> Vector3<f64> {
    let mut b = b_ext + noise;
    b.x += memory;
    b
}

/// Exact solution of ds/dt = s × B over dt for constant B: rotation about
/// −B̂ by |B|·dt.
pub fn rotate(s: &Vector3<f64>, field: &Vector3<f64>, dt: f64) -> Vector3<f64> {
    let b = field.norm();
    if b == 0.0 {
        return *s;
    }
    let axis = -field / b;
    let theta = b * dt;
    let (sin, half) = (theta.sin(), (0.5 * theta).sin());
    let ks = axis.cross(s);
    // written so that s ∥ axis returns s bitwise
    s + ks * sin + axis.cross(&ks) * (2.0 * half * half)
}

/// One integrator step under a frozen field.
///
/// The rotation variant is exact for constant fields. The Heun variant
/// takes a predictor-corrector step and renormalizes.
pub fn spin_step(s: &SpinState, field: &Vector3<f64>, dt: f64, integrator: Integrator) -> SpinState {
    match integrator {
        Integrator::Rotation => SpinState {
            s: rotate(&s.s, field, dt),
        },
        Integrator::HeunRenormalized => {
            let f1 = s.s.cross(field);
            let pred = s.s + f1 * dt;
            let f2 = pred.cross(field);
            SpinState {
                s: (s.s + (f1 + f2) * (0.5 * dt)).normalize(),
            }
        }
    }
}

/// Memory field evaluation backend for a running trajectory.
enum MemoryEngine {
    Aux {
        full: AuxPropagator,
        half: AuxPropagator,
        state: MemoryState,
    },
    Direct {
        /// k(j·dt)
        nodes: Vec<f64>,
        /// k((j + ½)·dt)
        mids: Vec<f64>,
        history: Vec<f64>,
    },
}

struct Kernels {
    full: AuxPropagator,
    half: AuxPropagator,
    nodes: Vec<f64>,
    mids: Vec<f64>,
}

impl Kernels {
    fn new(cfg: &HLConfig) -> Self {
        let c = &cfg.coupling;
        let dt = cfg.grid.dt();
        let (nodes, mids) = match cfg.memory_method {
            MemoryMethod::AuxiliaryOscillator => (Vec::new(), Vec::new()),
            MemoryMethod::DirectConvolution => {
                let n = cfg.grid.len();
                (
                    (0..n).map(|j| memory_kernel_closed(c, j as f64 * dt)).collect(),
                    (0..n).map(|j| memory_kernel_closed(c, (j as f64 + 0.5) * dt)).collect(),
                )
            }
        };
        Self {
            full: AuxPropagator::new(c, dt),
            half: AuxPropagator::new(c, 0.5 * dt),
            nodes,
            mids,
        }
    }

    fn engine(&self, cfg: &HLConfig) -> MemoryEngine {
        match cfg.memory_method {
            MemoryMethod::AuxiliaryOscillator => MemoryEngine::Aux {
                full: self.full,
                half: self.half,
                state: MemoryState::default(),
            },
            MemoryMethod::DirectConvolution => MemoryEngine::Direct {
                nodes: self.nodes.clone(),
                mids: self.mids.clone(),
                history: Vec::with_capacity(cfg.grid.len()),
            },
        }
    }
}

impl MemoryEngine {
    /// ∫k·S_x up to t_k + dt/2 given S_x(t_k) = `sx` and S_x at the half step.
    fn at_half(&self, sx: f64, sx_half: f64, dt: f64) -> f64 {
        match self {
            Self::Aux { half, state, .. } => half.step(*state, sx, sx_half).u,
            Self::Direct { mids, history, .. } => {
                let k = history.len();
                // history holds S_x(t_0..t_{k−1}); sx is S_x(t_k)
                let mut acc = 0.0;
                if k > 0 {
                    acc += 0.5 * mids[k] * history[0];
                    for j in 1..k {
                        acc += mids[k - j] * history[j];
                    }
                    acc += 0.5 * mids[0] * sx;
                }
                dt * acc + 0.25 * dt * mids[0] * sx
            }
        }
    }

    /// ∫k·S_x up to t_{k+1} given S_x(t_k) = `sx` and a guess for S_x(t_{k+1}).
    fn at_next(&self, sx: f64, sx_next: f64, dt: f64) -> f64 {
        match self {
            Self::Aux { full, state, .. } => full.step(*state, sx, sx_next).u,
            Self::Direct { nodes, history, .. } => {
                // k(0) = 0: the guess for S_x(t_{k+1}) never contributes
                let k = history.len();
                let mut acc = 0.5 * nodes[k + 1] * history.first().copied().unwrap_or(sx);
                for j in 1..k {
                    acc += nodes[k + 1 - j] * history[j];
                }
                if k > 0 {
                    acc += nodes[1] * sx;
                }
                dt * acc
            }
        }
    }

    /// Commits S_x(t_k) = `sx`, S_x(t_{k+1}) = `sx_next`; returns ∫k·S_x at t_{k+1}.
    fn advance(&mut self, sx: f64, sx_next: f64, dt: f64) -> f64 {
        let value = self.at_next(sx, sx_next, dt);
        match self {
            Self::Aux { full, state, .. } => *state = full.step(*state, sx, sx_next),
            Self::Direct { history, .. } => history.push(sx),
        }
        value
    }
}

/// Recorded spin history of one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub s_samples: Vec<SpinState>,
    pub seed: SeedSpec,
}

impl Trajectory {
    pub fn sz(&self) -> Vec<f64> {
        self.s_samples.iter().map(|s| s.s.z).collect()
    }

    /// CSV rows `t,Sx,Sy,Sz`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,Sx,Sy,Sz")?;
        for (k, s) in self.s_samples.iter().enumerate() {
            writeln!(out, "{},{},{},{}", self.grid.time(k), s.s.x, s.s.y, s.s.z)?;
        }
        Ok(())
    }
}

/// Precomputed noise filter and kernels shared by every member of an ensemble.
pub struct TrajectoryRunner {
    cfg: HLConfig,
    synth: NoiseSynth,
    kernels: Kernels,
    recorded: TimeGrid,
}

impl TrajectoryRunner {
    pub fn new(cfg: &HLConfig) -> Result<Self> {
        cfg.validate()?;
        let padded = cfg.grid.padded_for(cfg.coupling.memory_time());
        Ok(Self {
            cfg: *cfg,
            synth: NoiseSynth::new(padded, &cfg.spectrum, &cfg.coupling)?,
            kernels: Kernels::new(cfg),
            recorded: cfg.recorded_grid()?,
        })
    }

    pub fn config(&self) -> &HLConfig {
        &self.cfg
    }

    pub fn noise(&self, seed: &SeedSpec) -> Result<NoiseTrace> {
        self.synth.trace(seed)?.truncated(self.cfg.grid.len())
    }

    pub fn run(&self, seed: &SeedSpec) -> Result<Trajectory> {
        let noise = self.synth.trace(seed)?;
        self.integrate(&noise.samples, *seed)
    }

    /// Integrates against an explicit noise sample path (at least as long as the grid).
    pub fn run_with_noise(&self, noise: &NoiseTrace, seed: SeedSpec) -> Result<Trajectory> {
        if noise.grid.dt() != self.cfg.grid.dt() || noise.samples.len() < self.cfg.grid.len() {
            return Err(Error::GridMismatch("noise trace does not cover the simulation grid".into()));
        }
        self.integrate(&noise.samples, seed)
    }

    fn integrate(&self, noise: &[Vector3<f64>], seed: SeedSpec) -> Result<Trajectory> {
        let cfg = &self.cfg;
        let dt = cfg.grid.dt();
        let alpha = cfg.coupling.alpha();
        let ell = cfg.spin_length;
        let stride = cfg.record_stride;
        let mut engine = self.kernels.engine(cfg);
        let mut samples = Vec::with_capacity(self.recorded.len());
        let mut s = cfg.s0.s;
        let mut m = 0.0;
        samples.push(SpinState { s });
        for k in 0..cfg.grid.len() - 1 {
            let (b0, b1) = (noise[k], noise[k + 1]);
            let sx = ell * s.x;
            let field = effective_field(m, &b0, &cfg.b_ext);
            let next = match cfg.integrator {
                Integrator::Rotation => {
                    let s_half = rotate(&s, &field, 0.5 * dt);
                    let m_half = alpha * engine.at_half(sx, ell * s_half.x, dt);
                    let b_half = (b0 + b1) * 0.5;
                    rotate(&s, &effective_field(m_half, &b_half, &cfg.b_ext), dt)
                }
                Integrator::HeunRenormalized => {
                    let f1 = s.cross(&field);
                    let pred = s + f1 * dt;
                    let m_pred = alpha * engine.at_next(sx, ell * pred.x, dt);
                    let f2 = pred.cross(&effective_field(m_pred, &b1, &cfg.b_ext));
                    (s + (f1 + f2) * (0.5 * dt)).normalize()
                }
            };
            m = alpha * engine.advance(sx, ell * next.x, dt);
            s = next;
            let drift = (s.norm() - 1.0).abs();
            if !(drift <= NORM_DRIFT_LIMIT) {
                return Err(Error::NormDrift { step: k + 1, drift });
            }
            if (k + 1) % stride == 0 {
                samples.push(SpinState { s });
            }
        }
        Ok(Trajectory {
            grid: self.recorded,
            s_samples: samples,
            seed,
        })
    }
}

/// Generates this seed's noise and integrates over the configured grid.
pub fn run_trajectory(cfg: &HLConfig, seed: &SeedSpec) -> Result<Trajectory> {
    TrajectoryRunner::new(cfg)?.run(seed)
}

/// Pointwise ensemble statistics of S_z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleResult {
    pub grid: TimeGrid,
    pub mean_sz: Vec<f64>,
    /// Standard error of the mean; zero for a single trajectory.
    pub stderr_sz: Vec<f64>,
    pub n_traj: usize,
    pub master_seed: u64,
    pub digest: String,
}

impl EnsembleResult {
    pub fn times(&self) -> Vec<f64> {
        self.grid.times()
    }

    /// CSV rows `t,mean_Sz,stderr_Sz`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,mean_Sz,stderr_Sz")?;
        for (k, (m, e)) in self.mean_sz.iter().zip(&self.stderr_sz).enumerate() {
            writeln!(out, "{},{},{}", self.grid.time(k), m, e)?;
        }
        Ok(())
    }
}

/// Trajectories per reduction chunk. Part of the output contract: changing
/// it changes the last bits of the statistics.
pub const ENSEMBLE_CHUNK: usize = 16;

/// Running mean and sum of squared deviations per time point.
struct Moments {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Moments {
    fn empty(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    fn push(&mut self, x: &[SpinState]) {
        self.n += 1;
        let inv = 1.0 / self.n as f64;
        for ((mean, m2), s) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let delta = s.s.z - *mean;
            *mean += delta * inv;
            *m2 += delta * (s.s.z - *mean);
        }
    }

    fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            self.n = other.n;
            self.mean.clone_from(&other.mean);
            self.m2.clone_from(&other.m2);
            return;
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        for i in 0..self.mean.len() {
            let delta = other.mean[i] - self.mean[i];
            self.mean[i] += delta * nb / n;
            self.m2[i] += other.m2[i] + delta * delta * na * nb / n;
        }
        self.n += other.n;
    }
}

/// Runs trajectories with stream indices 0..n_traj and reduces S_z.
///
/// Trajectories are grouped into fixed chunks of [`ENSEMBLE_CHUNK`] indices,
/// each reduced sequentially, and the chunks are merged in index order. The
/// arithmetic therefore never depends on the rayon pool size.
pub fn run_ensemble(cfg: &HLConfig, n_traj: usize, master_seed: u64) -> Result<EnsembleResult> {
    if n_traj == 0 {
        return Err(invalid("n_traj", "must be >= 1"));
    }
    let runner = TrajectoryRunner::new(cfg)?;
    let len = runner.recorded.len();
    let n_chunks = n_traj.div_ceil(ENSEMBLE_CHUNK);
    // bounded batches keep memory flat; the merge order is unaffected
    let batch = 2 * rayon::current_num_threads();
    let mut total = Moments::empty(len);
    for first in (0..n_chunks).step_by(batch) {
        let parts: Vec<Result<Moments>> = (first..(first + batch).min(n_chunks))
            .into_par_iter()
            .map(|chunk| {
                let mut acc = Moments::empty(len);
                let lo = chunk * ENSEMBLE_CHUNK;
                for i in lo..(lo + ENSEMBLE_CHUNK).min(n_traj) {
                    let traj = runner.run(&SeedSpec::new(master_seed, i as u64))?;
                    acc.push(&traj.s_samples);
                }
                Ok(acc)
            })
            .collect();
        for part in parts {
            total.merge(&part?);
        }
    }
    let stderr_sz = if n_traj > 1 {
        let denom = (n_traj - 1) as f64 * n_traj as f64;
        total.m2.iter().map(|m2| (m2 / denom).sqrt()).collect()
    } else {
        vec![0.0; len]
    };
    Ok(EnsembleResult {
        grid: runner.recorded,
        mean_sz: total.mean,
        stderr_sz,
        n_traj,
        master_seed,
        digest: cfg.digest(n_traj, master_seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn lc(w0: f64, g: f64, a: f64) -> LorentzianCoupling {
        LorentzianCoupling::new(w0, g, a).unwrap()
    }

    const QUANTUM0: SpectrumKind = SpectrumKind::QuantumZeroPoint { temperature: 0.0 };

    #[test]
    fn field_without_memory_or_noise_is_external() {
        let b = Vector3::new(0.0, 0.0, -5.0);
        assert_eq!(effective_field(0.0, &Vector3::zeros(), &b), b);
        let f = effective_field(0.3, &Vector3::new(1.0, 0.0, 0.0), &b);
        assert_eq!(f, Vector3::new(1.3, 0.0, -5.0));
    }

    #[test]
    fn direct_memory_trivial_cases() {
        let c = lc(5.0, 7.5, 7.5);
        assert_eq!(memory_direct(&[1.0, 2.0], &c, 0.1, 0), 0.0);
        assert_eq!(memory_direct(&[0.0; 50], &c, 0.1, 49), 0.0);
    }

    #[test]
    fn constant_drive_reaches_static_response() {
        let c = lc(5.0, 7.5, 7.5);
        let dt = 0.005;
        let n = 4001;
        let ones = vec![1.0; n];
        let m = memory_direct(&ones, &c, dt, n - 1);
        // trapezoid end correction is α·dt²·k′(0)/12 ≈ 1.6e-5
        assert!((m - 7.5 / 25.0 + 7.5 * dt * dt / 12.0).abs() < 1e-8, "{m}");

        let mut mem = MemoryState::default();
        for _ in 0..n {
            mem = memory_aux_step(mem, 1.0, &c, dt);
        }
        assert!((mem.u - 1.0 / 25.0).abs() < 1e-12);
        assert!(mem.v.abs() < 1e-12);
    }

    #[test]
    fn zero_drive_keeps_oscillator_at_rest() {
        let c = lc(5.0, 0.01, 0.01);
        let mut mem = MemoryState::default();
        for _ in 0..100 {
            mem = memory_aux_step(mem, 0.0, &c, 0.01);
        }
        assert_eq!(mem, MemoryState::default());
    }

    #[test]
    fn resonant_drive_matches_driven_oscillator() {
        // u = −cos(ω₀t)/(Γω₀) + (k′ + Γk)/(Γω₀) solves ü + Γu̇ + ω₀²u = sin ω₀t from rest
        let (w0, g) = (5.0, 0.5);
        let c = lc(w0, g, 1.0);
        let dt = 0.002;
        let n = 20_001;
        let drive: Vec<f64> = (0..n).map(|j| (w0 * j as f64 * dt).sin()).collect();
        for k in [500, 5000, 20_000] {
            let t = k as f64 * dt;
            let (kk, dk) = kernel_and_derivative(&c, t);
            let exact = (-(w0 * t).cos() + dk + g * kk) / (g * w0);
            let m = memory_direct(&drive, &c, dt, k);
            assert!((m - exact).abs() < 1e-5 * (1.0 + exact.abs()), "t={t}: {m} vs {exact}");
        }
    }

    #[test]
    fn auxiliary_path_matches_convolution_on_smooth_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (g, a) in [(7.5, 7.5), (0.05, 0.05), (20.0, 20.0)] {
            let c = lc(5.0, g, a);
            let dt = 0.002;
            let n = 10_001;
            // random smooth path: a few random Fourier modes below 2ω₀
            let modes: Vec<(f64, f64, f64)> = (0..6)
                .map(|_| (rng.random_range(0.0..10.0), rng.random_range(0.0..6.3), rng.random_range(-1.0..1.0)))
                .collect();
            let sx: Vec<f64> = (0..n)
                .map(|j| {
                    let t = j as f64 * dt;
                    modes.iter().map(|(w, p, amp)| amp * (w * t + p).sin()).sum()
                })
                .collect();
            let prop = AuxPropagator::new(&c, dt);
            let mut mem = MemoryState::default();
            let mut max_dev: f64 = 0.0;
            let mut max_ref: f64 = 0.0;
            for k in 1..n {
                mem = prop.step(mem, sx[k - 1], sx[k]);
                if k % 97 == 0 {
                    let direct = memory_direct(&sx, &c, dt, k);
                    max_dev = max_dev.max((a * mem.u - direct).abs());
                    max_ref = max_ref.max(direct.abs());
                }
            }
            assert!(max_dev < 1e-4 * max_ref, "Γ={g}: {max_dev} vs {max_ref}");
        }
    }

    #[test]
    fn rotation_step_examples() {
        let s = SpinState::new(1.0, 0.0, 0.0).unwrap();
        let b = Vector3::new(0.0, 0.0, -5.0);
        assert_eq!(spin_step(&s, &Vector3::zeros(), 0.01, Integrator::Rotation), s);
        let up = SpinState::up();
        assert_eq!(spin_step(&up, &b, 0.01, Integrator::Rotation), up);
        assert_eq!(spin_step(&up, &b, 0.01, Integrator::HeunRenormalized), up);

        let next = spin_step(&s, &b, 0.01, Integrator::Rotation).s;
        // ds/dt = s × B = (0, 5, 0) at t = 0
        assert!((next - Vector3::new(0.05f64.cos(), 0.05f64.sin(), 0.0)).norm() < 1e-15);
        assert!((next.norm() - 1.0).abs() < 1e-15);

        // reference solve: many tiny Heun steps
        let mut r = s;
        for _ in 0..1000 {
            r = spin_step(&r, &b, 1e-5, Integrator::HeunRenormalized);
        }
        assert!((r.s - next).norm() < 1e-9);
    }

    #[test]
    fn frozen_pole_without_noise() {
        let grid = TimeGrid::covering(0.01, 50.0).unwrap();
        for kind in [
            SpectrumKind::ClassicalLinear { temperature: 0.0 },
            SpectrumKind::QuantumNoZeroPoint { temperature: 0.0 },
        ] {
            for integrator in [Integrator::Rotation, Integrator::HeunRenormalized] {
                for method in [MemoryMethod::AuxiliaryOscillator, MemoryMethod::DirectConvolution] {
                    let mut cfg = HLConfig::new(lc(5.0, 7.5, 7.5), kind, grid);
                    cfg.integrator = integrator;
                    cfg.memory_method = method;
                    let t = run_trajectory(&cfg, &SeedSpec::new(1, 0)).unwrap();
                    assert!(t.s_samples.iter().all(|s| s.s == Vector3::new(0.0, 0.0, 1.0)));
                }
            }
        }
    }

    #[test]
    fn uncoupled_spin_precesses_at_larmor_rate() {
        let grid = TimeGrid::covering(0.01, 10.0).unwrap();
        let mut cfg = HLConfig::new(lc(5.0, 7.5, 0.0), QUANTUM0, grid);
        cfg.s0 = SpinState::from_angles(0.7, 0.0);
        let t = run_trajectory(&cfg, &SeedSpec::new(1, 0)).unwrap();
        for (k, s) in t.s_samples.iter().enumerate() {
            let time = grid.time(k);
            let expect = SpinState::from_angles(0.7, 5.0 * time).s;
            assert!((s.s - expect).norm() < 1e-11, "t={time}");
        }
    }

    #[test]
    fn quantum_noise_dislodges_the_excited_state() {
        let grid = TimeGrid::covering(0.01, 20.0).unwrap();
        let cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let t = run_trajectory(&cfg, &SeedSpec::new(2, 0)).unwrap();
        let sz = t.sz();
        assert!(sz.iter().any(|&z| z < 0.9));
        assert!(t.s_samples.iter().all(|s| s.norm_error() < 1e-12));
    }

    #[test]
    fn memory_paths_agree_on_a_trajectory() {
        let grid = TimeGrid::covering(0.002, 20.0).unwrap();
        for g in [7.5, 0.05, 20.0] {
            let base = HLConfig::new(lc(5.0, g, g), QUANTUM0, grid);
            let mut direct = base;
            direct.memory_method = MemoryMethod::DirectConvolution;
            let seed = SeedSpec::new(4, 1);
            let a = run_trajectory(&base, &seed).unwrap();
            let b = run_trajectory(&direct, &seed).unwrap();
            let dev = a
                .s_samples
                .iter()
                .zip(&b.s_samples)
                .map(|(x, y)| (x.s - y.s).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-4, "Γ={g}: {dev}");
        }
    }

    #[test]
    fn stride_subsamples_the_same_path() {
        let grid = TimeGrid::covering(0.01, 5.0).unwrap();
        let full = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let mut coarse = full;
        coarse.record_stride = 10;
        let seed = SeedSpec::new(6, 3);
        let a = run_trajectory(&full, &seed).unwrap();
        let b = run_trajectory(&coarse, &seed).unwrap();
        assert_eq!(b.s_samples.len(), 51);
        for (k, s) in b.s_samples.iter().enumerate() {
            assert_eq!(*s, a.s_samples[10 * k]);
        }
    }

    #[test]
    fn single_member_ensemble() {
        let grid = TimeGrid::covering(0.01, 5.0).unwrap();
        let cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let e = run_ensemble(&cfg, 1, 8).unwrap();
        let t = run_trajectory(&cfg, &SeedSpec::new(8, 0)).unwrap();
        assert_eq!(e.mean_sz, t.sz());
        assert!(e.stderr_sz.iter().all(|&x| x == 0.0));
        assert!(run_ensemble(&cfg, 0, 8).is_err());
    }

    #[test]
    fn ensemble_matches_naive_statistics() {
        let grid = TimeGrid::covering(0.01, 3.0).unwrap();
        let cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let n = 37;
        let e = run_ensemble(&cfg, n, 5).unwrap();
        let runs: Vec<Vec<f64>> = (0..n as u64)
            .map(|i| run_trajectory(&cfg, &SeedSpec::new(5, i)).unwrap().sz())
            .collect();
        for k in (0..grid.len()).step_by(25) {
            let xs: Vec<f64> = runs.iter().map(|r| r[k]).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            assert!((e.mean_sz[k] - mean).abs() < 1e-13);
            assert!((e.stderr_sz[k] - (var / n as f64).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_is_independent_of_pool_size() {
        let grid = TimeGrid::covering(0.01, 4.0).unwrap();
        let cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| run_ensemble(&cfg, 53, 17).unwrap())
        };
        let one = run(1);
        assert_eq!(one, run(3));
        assert_eq!(one, run(8));
    }

    #[test]
    fn digest_tracks_inputs() {
        let grid = TimeGrid::covering(0.01, 1.0).unwrap();
        let cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        let d = cfg.digest(10, 1);
        assert_eq!(d.len(), 64);
        assert_eq!(d, cfg.digest(10, 1));
        assert_ne!(d, cfg.digest(10, 2));
        let mut other = cfg;
        other.spin_length = 1.0;
        assert_ne!(d, other.digest(10, 1));
    }

    #[test]
    fn config_validation() {
        let grid = TimeGrid::covering(0.01, 1.0).unwrap();
        let mut cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        cfg.s0.s = Vector3::new(0.0, 0.0, 2.0);
        assert!(cfg.validate().is_err());
        let mut cfg = HLConfig::new(lc(5.0, 7.5, 7.5), QUANTUM0, grid);
        cfg.record_stride = 1000;
        assert!(cfg.validate().is_err());
        assert!(SpinState::new(0.0, 0.0, 1.0 + 1e-6).is_err());
        assert_eq!("rotation".parse::<Integrator>(), Ok(Integrator::Rotation));
        assert!("euler".parse::<Integrator>().is_err());
        assert_eq!(
            "direct-convolution".parse::<MemoryMethod>(),
            Ok(MemoryMethod::DirectConvolution)
        );
    }
}
