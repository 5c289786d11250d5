//! Time integrators and the ensemble runner.
//!
//! Every integrator is a pure function of its configuration and the noise it is
//! handed. [`run_ensemble`] derives that noise for chain `i` from
//! `RngStream(root_seed, i)`, so batches do not depend on the worker count.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::{Drift, DriftSpec};
use crate::error::{Error, Result};
use crate::math::brownian::gaussian_increments;
use crate::math::RngStream;
use crate::targets::{Target, Temperature};

/// Child-stream tags of a chain's [`RngStream`].
pub const TAG_BROWNIAN: u64 = 0;
pub const TAG_POOL: u64 = 1;
pub const TAG_MOMENTUM: u64 = 2;

pub const DEFAULT_FRICTION: f64 = 1.0;

fn default_friction() -> f64 {
    DEFAULT_FRICTION
}

/// Euler–Maruyama discretization of the temperature-β Schrödinger–Föllmer
/// diffusion on the uniform grid `t_n = n/N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SfsConfig {
    pub steps: usize,
    pub beta: Temperature,
    pub drift: DriftSpec,
    #[serde(default)]
    pub record_path: bool,
}

impl SfsConfig {
    pub fn new(steps: usize, beta: Temperature, drift: DriftSpec) -> Result<Self> {
        let cfg = Self {
            steps,
            beta,
            drift,
            record_path: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Uses `N = 1/h`, which must be a whole number.
    pub fn from_step(h: f64, beta: Temperature, drift: DriftSpec) -> Result<Self> {
        Self::new(whole_steps("h", 1.0, h)?, beta, drift)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::param("steps", "must be at least 1"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        1.0 / self.steps as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SfsOutput {
    pub terminal: Vec<f64>,
    /// `(N + 1) × d` states `Y_{t_0}, …, Y_{t_N}` when recorded.
    pub path: Option<Vec<f64>>,
}

/// Runs `Y_{n+1} = Y_n + h f(Y_n, t_n) + √β ΔW_n` from `Y_0 = 0` and returns `Y_1`.
///
/// `increments` holds `N` row-major d-vectors with law `N(0, hI)`. The drift
/// part and the noise part are accumulated separately, `Y_n = (Σ_k f_k)/N +
/// √β W_n`, which is the same recursion but keeps a constant drift exact: for
/// `N(α, βI)` the result is `α + √β W_1` to the last bit.
pub fn sfs_run<D: Drift + ?Sized>(drift: &D, cfg: &SfsConfig, increments: &[f64]) -> Result<SfsOutput> {
    cfg.validate()?;
    let d = drift.dim();
    let n = cfg.steps;
    if increments.len() != n * d {
        return Err(Error::DimensionMismatch {
            expected: n * d,
            got: increments.len(),
        });
    }
    let nf = n as f64;
    let sb = cfg.beta.get().sqrt();
    let mut drift_sum = vec![0.0; d];
    let mut w = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut f = vec![0.0; d];
    let mut path = cfg.record_path.then(|| {
        let mut p = Vec::with_capacity((n + 1) * d);
        p.extend_from_slice(&y);
        p
    });
    for (step, dw) in increments.chunks_exact(d).enumerate() {
        let t = step as f64 / nf;
        drift.eval(&y, t, &mut f)?;
        for j in 0..d {
            drift_sum[j] += f[j];
            w[j] += dw[j];
            y[j] = drift_sum[j] / nf + sb * w[j];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if let Some(p) = path.as_mut() {
            p.extend_from_slice(&y);
        }
    }
    Ok(SfsOutput { terminal: y, path })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumInit {
    #[default]
    Zero,
    /// `m_0 ~ N(0, I)`, the stationary momentum law.
    Stationary,
}

/// Step size, horizon and initial state of a Langevin baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LangevinConfig {
    pub step: f64,
    pub horizon: f64,
    /// γ; ignored by the overdamped scheme.
    #[serde(default = "default_friction")]
    pub friction: f64,
    /// Defaults to the origin.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub momentum: MomentumInit,
    #[serde(default)]
    pub record_path: bool,
}

impl LangevinConfig {
    pub fn new(step: f64, horizon: f64) -> Result<Self> {
        let cfg = Self {
            step,
            horizon,
            friction: DEFAULT_FRICTION,
            x0: None,
            momentum: MomentumInit::Zero,
            record_path: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::param("step", format!("must be positive and finite, got {}", self.step)));
        }
        if !(self.friction > 0.0 && self.friction.is_finite()) {
            return Err(Error::param(
                "friction",
                format!("must be positive and finite, got {}", self.friction),
            ));
        }
        if let Some(x0) = &self.x0 {
            if x0.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("x0", "must be finite"));
            }
        }
        whole_steps("horizon", self.horizon, self.step).map(|_| ())
    }

    /// `T / h`.
    pub fn steps(&self) -> usize {
        whole_steps("horizon", self.horizon, self.step).expect("validated config")
    }

    fn initial_state(&self, dim: usize) -> Result<Vec<f64>> {
        match &self.x0 {
            None => Ok(vec![0.0; dim]),
            Some(x0) if x0.len() == dim => Ok(x0.clone()),
            Some(x0) => Err(Error::DimensionMismatch {
                expected: dim,
                got: x0.len(),
            }),
        }
    }
}

fn whole_steps(name: &'static str, span: f64, h: f64) -> Result<usize> {
    if !(h > 0.0 && h.is_finite() && span > 0.0 && span.is_finite()) {
        return Err(Error::param(name, format!("need positive finite span and step, got {span} / {h}")));
    }
    let ratio = span / h;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps || steps > u32::MAX as f64 {
        return Err(Error::param(name, format!("{span} / {h} is not a whole number of steps")));
    }
    Ok(steps as usize)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LangevinOutput {
    pub x: Vec<f64>,
    /// Terminal momentum of the underdamped schemes.
    pub m: Option<Vec<f64>>,
    /// `(steps + 1) × d` positions when recorded.
    pub path: Option<Vec<f64>>,
}

struct Trajectory {
    path: Option<Vec<f64>>,
}

impl Trajectory {
    fn new(record: bool, x0: &[f64], steps: usize) -> Self {
        Self {
            path: record.then(|| {
                let mut p = Vec::with_capacity((steps + 1) * x0.len());
                p.extend_from_slice(x0);
                p
            }),
        }
    }

    fn push(&mut self, step: usize, x: &[f64], m: Option<&[f64]>) -> Result<()> {
        if x.iter().chain(m.unwrap_or(&[])).any(|v| !v.is_finite()) {
            return Err(Error::Divergence { step });
        }
        if let Some(p) = self.path.as_mut() {
            p.extend_from_slice(x);
        }
        Ok(())
    }
}

fn check_noise(len: usize, steps: usize, dim: usize) -> Result<()> {
    if len != steps * dim {
        return Err(Error::DimensionMismatch {
            expected: steps * dim,
            got: len,
        });
    }
    Ok(())
}

/// Unadjusted Langevin: `x_{n+1} = x_n - h∇V(x_n) + √2 ΔW_n`.
pub fn ula_run(target: &Target, cfg: &LangevinConfig, increments: &[f64]) -> Result<LangevinOutput> {
    cfg.validate()?;
    let d = target.dim();
    let steps = cfg.steps();
    check_noise(increments.len(), steps, d)?;
    let h = cfg.step;
    let s2 = std::f64::consts::SQRT_2;
    let mut x = cfg.initial_state(d)?;
    let mut g = vec![0.0; d];
    let mut traj = Trajectory::new(cfg.record_path, &x, steps);
    for (step, dw) in increments.chunks_exact(d).enumerate() {
        target.grad_potential(&x, &mut g)?;
        for j in 0..d {
            x[j] += -h * g[j] + s2 * dw[j];
        }
        traj.push(step, &x, None)?;
    }
    Ok(LangevinOutput {
        x,
        m: None,
        path: traj.path,
    })
}

/// Euler discretization of underdamped Langevin dynamics:
/// `x_{n+1} = x_n + h m_n`, `m_{n+1} = m_n - h∇V(x_n) - hγ m_n + √(2γ) ΔW_n`.
pub fn uld_euler_run(target: &Target, cfg: &LangevinConfig, m0: &[f64], increments: &[f64]) -> Result<LangevinOutput> {
    cfg.validate()?;
    let d = target.dim();
    let steps = cfg.steps();
    check_noise(increments.len(), steps, d)?;
    check_noise(m0.len(), 1, d)?;
    let (h, gamma) = (cfg.step, cfg.friction);
    let noise = (2.0 * gamma).sqrt();
    let mut x = cfg.initial_state(d)?;
    let mut m = m0.to_vec();
    let mut g = vec![0.0; d];
    let mut traj = Trajectory::new(cfg.record_path, &x, steps);
    for (step, dw) in increments.chunks_exact(d).enumerate() {
        target.grad_potential(&x, &mut g)?;
        for j in 0..d {
            let mj = m[j];
            x[j] += h * mj;
            m[j] = mj - h * g[j] - h * gamma * mj + noise * dw[j];
        }
        traj.push(step, &x, Some(&m))?;
    }
    Ok(LangevinOutput {
        x,
        m: Some(m),
        path: traj.path,
    })
}

/// BAOAB splitting; `gaussians` are the standard normals of the O-steps.
pub fn baoab_run(target: &Target, cfg: &LangevinConfig, m0: &[f64], gaussians: &[f64]) -> Result<LangevinOutput> {
    cfg.validate()?;
    let d = target.dim();
    let steps = cfg.steps();
    check_noise(gaussians.len(), steps, d)?;
    check_noise(m0.len(), 1, d)?;
    let h = cfg.step;
    let decay = (-cfg.friction * h).exp();
    // 1 - e^{-2γh} without cancellation for small γh
    let refresh = (-(-2.0 * cfg.friction * h).exp_m1()).sqrt();
    let mut x = cfg.initial_state(d)?;
    let mut m = m0.to_vec();
    let mut g = vec![0.0; d];
    let mut traj = Trajectory::new(cfg.record_path, &x, steps);
    target.grad_potential(&x, &mut g)?;
    for (step, xi) in gaussians.chunks_exact(d).enumerate() {
        for j in 0..d {
            m[j] -= 0.5 * h * g[j];
            x[j] += 0.5 * h * m[j];
            m[j] = decay * m[j] + refresh * xi[j];
            x[j] += 0.5 * h * m[j];
        }
        target.grad_potential(&x, &mut g)?;
        for j in 0..d {
            m[j] -= 0.5 * h * g[j];
        }
        traj.push(step, &x, Some(&m))?;
    }
    Ok(LangevinOutput {
        x,
        m: Some(m),
        path: traj.path,
    })
}

/// Sampler selection for [`run_ensemble`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "snake_case")]
pub enum SamplerSpec {
    Sfs(SfsConfig),
    Ula(LangevinConfig),
    UldEuler(LangevinConfig),
    Baoab(LangevinConfig),
}

impl SamplerSpec {
    pub fn id(&self) -> &'static str {
        match self {
            SamplerSpec::Sfs(_) => "sfs",
            SamplerSpec::Ula(_) => "ula",
            SamplerSpec::UldEuler(_) => "uld_euler",
            SamplerSpec::Baoab(_) => "baoab",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SamplerSpec::Sfs(c) => c.validate(),
            SamplerSpec::Ula(c) | SamplerSpec::UldEuler(c) | SamplerSpec::Baoab(c) => c.validate(),
        }
    }

    pub fn step(&self) -> f64 {
        match self {
            SamplerSpec::Sfs(c) => c.step(),
            SamplerSpec::Ula(c) | SamplerSpec::UldEuler(c) | SamplerSpec::Baoab(c) => c.step,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            SamplerSpec::Sfs(c) => c.steps,
            SamplerSpec::Ula(c) | SamplerSpec::UldEuler(c) | SamplerSpec::Baoab(c) => c.steps(),
        }
    }

    /// Short label such as `sfs_exact_b2` or `ula`.
    pub fn label(&self) -> String {
        match self {
            SamplerSpec::Sfs(c) => format!("sfs_{}_b{}", c.drift.label(), c.beta),
            other => other.id().to_string(),
        }
    }

    /// Terminal state of one chain driven by `stream`.
    pub fn run_chain(&self, target: &Target, stream: &RngStream) -> Result<Vec<f64>> {
        let d = target.dim();
        let noise = stream.child(TAG_BROWNIAN);
        match self {
            SamplerSpec::Sfs(cfg) => {
                let drift = cfg.drift.build(target, cfg.beta, &stream.child(TAG_POOL))?;
                let dw = gaussian_increments(cfg.steps, d, cfg.step(), &noise);
                Ok(sfs_run(&drift, cfg, &dw)?.terminal)
            }
            SamplerSpec::Ula(cfg) => {
                cfg.validate()?;
                let dw = gaussian_increments(cfg.steps(), d, cfg.step, &noise);
                Ok(ula_run(target, cfg, &dw)?.x)
            }
            SamplerSpec::UldEuler(cfg) => {
                cfg.validate()?;
                let dw = gaussian_increments(cfg.steps(), d, cfg.step, &noise);
                Ok(uld_euler_run(target, cfg, &initial_momentum(cfg, d, stream), &dw)?.x)
            }
            SamplerSpec::Baoab(cfg) => {
                cfg.validate()?;
                let xi = noise.standard_normals(cfg.steps() * d);
                Ok(baoab_run(target, cfg, &initial_momentum(cfg, d, stream), &xi)?.x)
            }
        }
    }
}

fn initial_momentum(cfg: &LangevinConfig, dim: usize, stream: &RngStream) -> Vec<f64> {
    match cfg.momentum {
        MomentumInit::Zero => vec![0.0; dim],
        MomentumInit::Stationary => stream.child(TAG_MOMENTUM).standard_normals(dim),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchMeta {
    pub sampler: String,
    pub target: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    pub step: f64,
    pub steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool_size: Option<usize>,
    pub seed: u64,
    pub n_chains: usize,
    /// Kept out of serialized artifacts so that reruns are byte-identical.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Terminal states of an ensemble, one row per chain in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<f64>,
    pub dim: usize,
    pub meta: BatchMeta,
}

impl SampleBatch {
    /// A batch of externally produced samples (e.g. read from disk or drawn
    /// i.i.d. from the target).
    pub fn from_rows(dim: usize, samples: Vec<f64>, meta: BatchMeta) -> Result<Self> {
        if dim == 0 || !samples.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: samples.len(),
            });
        }
        Ok(Self { samples, dim, meta })
    }

    pub fn len(&self) -> usize {
        self.samples.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.samples.chunks_exact(self.dim)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }
}

/// Runs `n_chains` independent chains; chain `i` draws all of its randomness
/// from `RngStream(root_seed, i)`. Uses the ambient rayon pool.
pub fn run_ensemble(spec: &SamplerSpec, target: &Target, n_chains: usize, root_seed: u64) -> Result<SampleBatch> {
    spec.validate()?;
    if n_chains == 0 {
        return Err(Error::param("n_chains", "must be at least 1"));
    }
    let start = Instant::now();
    let results: Vec<Result<Vec<f64>>> = (0..n_chains)
        .into_par_iter()
        .map(|i| spec.run_chain(target, &RngStream::new(root_seed, i as u64)))
        .collect();
    let d = target.dim();
    let mut samples = Vec::with_capacity(n_chains * d);
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(row) => samples.extend(row),
            Err(e) => failures.push((i, Box::new(e))),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Ensemble {
            total: n_chains,
            failures,
        });
    }
    let (beta, pool_size) = match spec {
        SamplerSpec::Sfs(c) => (Some(c.beta.get()), c.drift.pool_size()),
        _ => (None, None),
    };
    Ok(SampleBatch {
        samples,
        dim: d,
        meta: BatchMeta {
            sampler: spec.label(),
            target: target.id(),
            beta,
            step: spec.step(),
            steps: spec.steps(),
            pool_size,
            seed: root_seed,
            n_chains,
            wall_time: start.elapsed(),
        },
    })
}

/// Runs `f` on a dedicated pool of `threads` workers (`None`: rayon's default).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::param("threads", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::param("threads", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}
