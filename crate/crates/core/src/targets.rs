//! Target distributions `μ(dx) ∝ exp(-V(x)) dx`.
//!
//! Every target exposes its potential `V`, the gradient `∇V` when one is known,
//! and `log g_β`, the log density of `μ` relative to `N(0, βI)`. The latter is
//! only defined up to an additive constant that never depends on `x`; all drift
//! evaluators consume it through ratios in which the constant cancels.
//!
//! Gaussian mixtures carry their full structure, which enables the closed-form
//! drift. Their potential is the exact negative log density, so for mixtures
//! `log g_β` is the exact log Radon–Nikodym derivative.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, norm_sq, RngStream, SpdMatrix};

/// Temperature `β > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Temperature(f64);

impl Temperature {
    pub const ONE: Temperature = Temperature(1.0);

    pub fn new(beta: f64) -> Result<Self> {
        if beta.is_finite() && beta > 0.0 {
            Ok(Self(beta))
        } else {
            Err(Error::param("beta", format!("must be positive and finite, got {beta}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Temperature {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Temperature::new(v)
    }
}

impl From<Temperature> for f64 {
    fn from(t: Temperature) -> f64 {
        t.0
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    dim: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covs: Vec<SpdMatrix>,
    /// `log θ_i - ½ log det Σ_i - (d/2) log 2π`
    log_norms: Vec<f64>,
}

const WEIGHT_SUM_TOL: f64 = 1e-9;

impl GaussianMixture {
    /// Builds a mixture; weights summing to 1 within `1e-9` are renormalized.
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<SpdMatrix>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::param("weights", "mixture needs at least one component"));
        }
        if means.len() != k || covs.len() != k {
            return Err(Error::param(
                "means",
                format!(
                    "{k} weights but {} means and {} covariances",
                    means.len(),
                    covs.len()
                ),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w >= 0.0)) {
            return Err(Error::param("weights", format!("weight {w} is not in [0, 1]")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::param("weights", format!("weights sum to {total}, not 1")));
        }
        let dim = means[0].len();
        if dim == 0 {
            return Err(Error::param("means", "dimension must be positive"));
        }
        for (m, c) in means.iter().zip(&covs) {
            if m.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: m.len() });
            }
            if c.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: c.dim() });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("means", "non-finite mean"));
            }
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_norms = weights
            .iter()
            .zip(&covs)
            .map(|(w, c)| w.ln() - 0.5 * c.log_det() - 0.5 * dim as f64 * (2.0 * PI).ln())
            .collect();
        Ok(Self {
            dim,
            weights,
            means,
            covs,
            log_norms,
        })
    }

    /// Mixture with isotropic components `Σ_i = variances[i] · I`.
    pub fn isotropic(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: &[f64]) -> Result<Self> {
        let dim = means.first().map_or(0, Vec::len);
        let covs = variances
            .iter()
            .map(|v| SpdMatrix::scaled_identity(dim, *v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights, means, covs)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn covs(&self) -> &[SpdMatrix] {
        &self.covs
    }

    /// Log density of component `i` including its mixture weight.
    fn component_log_density(&self, i: usize, x: &[f64], scratch: &mut [f64]) -> f64 {
        let cov = &self.covs[i];
        let mean = &self.means[i];
        let quad = if cov.is_diagonal() {
            x.iter()
                .zip(mean)
                .enumerate()
                .map(|(j, (xv, m))| (xv - m).powi(2) / cov.entry(j, j))
                .sum()
        } else {
            let d = self.dim;
            let l = cov.chol();
            // forward substitution L z = x - α
            for r in 0..d {
                let mut s = x[r] - mean[r];
                for c in 0..r {
                    s -= l[r * d + c] * scratch[c];
                }
                scratch[r] = s / l[r * d + r];
            }
            norm_sq(&scratch[..d])
        };
        self.log_norms[i] - 0.5 * quad
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut scratch = if self.covs.iter().all(SpdMatrix::is_diagonal) {
            Vec::new()
        } else {
            vec![0.0; self.dim]
        };
        // streaming log-sum-exp
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for i in 0..self.n_components() {
            let l = self.component_log_density(i, x, &mut scratch);
            if l > max {
                sum *= (max - l).exp();
                max = l;
            }
            sum += (l - max).exp();
        }
        if max.is_finite() {
            max + sum.ln()
        } else {
            max
        }
    }

    /// `∇ log μ(x)`.
    pub fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim;
        let mut scratch = vec![0.0; d];
        let mut resp: Vec<f64> = (0..self.n_components())
            .map(|i| self.component_log_density(i, x, &mut scratch))
            .collect();
        out.iter_mut().for_each(|o| *o = 0.0);
        if !crate::math::softmax_in_place(&mut resp).is_finite() {
            out.iter_mut().for_each(|o| *o = f64::NAN);
            return;
        }
        let mut diff = vec![0.0; d];
        for (i, r) in resp.iter().enumerate() {
            if *r == 0.0 {
                continue;
            }
            for (j, dv) in diff.iter_mut().enumerate() {
                *dv = self.means[i][j] - x[j];
            }
            self.covs[i].solve(&diff, &mut scratch);
            for (o, s) in out.iter_mut().zip(&scratch) {
                *o += r * s;
            }
        }
    }

    /// i.i.d. draws from the mixture, `n × d` row-major.
    pub fn sample(&self, n: usize, stream: &RngStream) -> Vec<f64> {
        use rand::Rng;
        let d = self.dim;
        let mut rng = stream.child(0).rng();
        let z = stream.child(1).standard_normals(n * d);
        let mut out = vec![0.0; n * d];
        for (u, dst) in z.chunks_exact(d).zip(out.chunks_exact_mut(d)) {
            let pick: f64 = rng.random();
            let mut acc = 0.0;
            let mut comp = self.n_components() - 1;
            for (i, w) in self.weights.iter().enumerate() {
                acc += w;
                if pick < acc {
                    comp = i;
                    break;
                }
            }
            self.covs[comp].chol_mul_vec(u, dst);
            for (v, m) in dst.iter_mut().zip(&self.means[comp]) {
                *v += m;
            }
        }
        out
    }

    /// Largest component standard deviation along any direction.
    pub fn max_std(&self) -> f64 {
        self.covs
            .iter()
            .map(SpdMatrix::max_eigenvalue)
            .fold(0.0, f64::max)
            .sqrt()
    }

    /// `(1-ρ)μ + ρ N(0, βI)` as a new mixture.
    pub fn regularized(&self, rho: f64, beta: Temperature) -> Result<Self> {
        if rho == 0.0 {
            return Ok(self.clone());
        }
        let mut weights: Vec<f64> = self.weights.iter().map(|w| (1.0 - rho) * w).collect();
        weights.push(rho);
        let mut means = self.means.clone();
        means.push(vec![0.0; self.dim]);
        let mut covs = self.covs.clone();
        covs.push(SpdMatrix::scaled_identity(self.dim, beta.get())?);
        Self::new(weights, means, covs)
    }
}

pub type PotentialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// A user-supplied potential with an optional analytic gradient.
#[derive(Clone)]
pub struct CustomPotential {
    pub name: String,
    pub potential: Arc<PotentialFn>,
    pub gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("has_gradient", &self.gradient.is_some())
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum TargetKind {
    GaussianMixture(GaussianMixture),
    /// `V = (r - r0)² / (2σ²)` with `r = ‖x‖`.
    Ring { r0: f64, sigma: f64 },
    /// `V = x1²/2 + x2² / (2 e^{2α x1})`.
    Funnel { alpha: f64 },
    /// `V = ((x1 x2)² + x1² + x2² - 8(x1 + x2)) / 2`.
    Example64,
    /// Posterior of ridge regression with identity design:
    /// `V = ‖y - η‖² / (2σ1²) + ‖η‖² / (2σ2²)`.
    BayesRidge { y: Vec<f64>, sigma1: f64, sigma2: f64 },
    Custom(CustomPotential),
}

#[derive(Debug, Clone)]
pub struct Target {
    kind: TargetKind,
    dim: usize,
    rho: f64,
}

fn positive(name: &'static str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {v}")))
    }
}

impl Target {
    pub fn gaussian_mixture(weights: Vec<f64>, means: Vec<Vec<f64>>, covs: Vec<SpdMatrix>) -> Result<Self> {
        Ok(Self::from_mixture(GaussianMixture::new(weights, means, covs)?))
    }

    pub fn from_mixture(gmm: GaussianMixture) -> Self {
        Self {
            dim: gmm.dim(),
            kind: TargetKind::GaussianMixture(gmm),
            rho: 0.0,
        }
    }

    pub fn ring(r0: f64, sigma: f64) -> Result<Self> {
        if !(r0.is_finite() && r0 >= 0.0) {
            return Err(Error::param("r0", format!("must be nonnegative, got {r0}")));
        }
        Ok(Self {
            kind: TargetKind::Ring { r0, sigma: positive("sigma", sigma)? },
            dim: 2,
            rho: 0.0,
        })
    }

    pub fn funnel(alpha: f64) -> Result<Self> {
        Ok(Self {
            kind: TargetKind::Funnel { alpha: positive("alpha", alpha)? },
            dim: 2,
            rho: 0.0,
        })
    }

    pub fn example64() -> Self {
        Self {
            kind: TargetKind::Example64,
            dim: 2,
            rho: 0.0,
        }
    }

    pub fn bayes_ridge(y: Vec<f64>, sigma1: f64, sigma2: f64) -> Result<Self> {
        if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("y", "must be a nonempty finite vector"));
        }
        Ok(Self {
            dim: y.len(),
            kind: TargetKind::BayesRidge {
                y,
                sigma1: positive("sigma1", sigma1)?,
                sigma2: positive("sigma2", sigma2)?,
            },
            rho: 0.0,
        })
    }

    pub fn custom(dim: usize, potential: CustomPotential) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let t = Self {
            kind: TargetKind::Custom(potential),
            dim,
            rho: 0.0,
        };
        if !t.potential(&vec![0.0; dim]).is_finite() {
            return Err(Error::NonFinite("custom potential at the origin".into()));
        }
        Ok(t)
    }

    /// Mixes `g_β` with a constant: `g_{β,ρ} = (1-ρ) g_β + ρ`, i.e. the target
    /// becomes `(1-ρ)μ + ρ N(0, βI)`. This needs a normalized density and is
    /// therefore only available for Gaussian mixtures.
    pub fn with_regularization(mut self, rho: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::param("rho", format!("must lie in [0, 1), got {rho}")));
        }
        if rho > 0.0 && self.mixture().is_none() {
            return Err(Error::Unsupported("regularization without a normalized density"));
        }
        self.rho = rho;
        Ok(self)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &TargetKind {
        &self.kind
    }

    pub fn mixture(&self) -> Option<&GaussianMixture> {
        match &self.kind {
            TargetKind::GaussianMixture(g) => Some(g),
            _ => None,
        }
    }

    /// The mixture actually sampled at temperature `β` (includes the
    /// regularizing component when `ρ > 0`).
    pub fn effective_mixture(&self, beta: Temperature) -> Option<Result<GaussianMixture>> {
        self.mixture().map(|g| g.regularized(self.rho, beta))
    }

    /// Short identifier for metadata.
    pub fn id(&self) -> String {
        match &self.kind {
            TargetKind::GaussianMixture(g) => {
                format!("gaussian_mixture(k={},d={})", g.n_components(), g.dim())
            }
            TargetKind::Ring { r0, sigma } => format!("ring(r0={r0},sigma={sigma})"),
            TargetKind::Funnel { alpha } => format!("funnel(alpha={alpha})"),
            TargetKind::Example64 => "example64".into(),
            TargetKind::BayesRidge { sigma1, sigma2, .. } => {
                format!("bayes_ridge(d={},sigma1={sigma1},sigma2={sigma2})", self.dim)
            }
            TargetKind::Custom(c) => format!("custom({})", c.name),
        }
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        match &self.kind {
            TargetKind::GaussianMixture(g) => -g.log_density(x),
            TargetKind::Ring { r0, sigma } => (norm_sq(x).sqrt() - r0).powi(2) / (2.0 * sigma * sigma),
            TargetKind::Funnel { alpha } => {
                0.5 * x[0] * x[0] + 0.5 * x[1] * x[1] * (-2.0 * alpha * x[0]).exp()
            }
            TargetKind::Example64 => {
                let (a, b) = (x[0], x[1]);
                0.5 * ((a * b).powi(2) + a * a + b * b - 8.0 * (a + b))
            }
            TargetKind::BayesRidge { y, sigma1, sigma2 } => {
                let resid: f64 = y.iter().zip(x).map(|(yv, e)| (yv - e).powi(2)).sum();
                resid / (2.0 * sigma1 * sigma1) + norm_sq(x) / (2.0 * sigma2 * sigma2)
            }
            TargetKind::Custom(c) => (c.potential)(x),
        }
    }

    pub fn has_gradient(&self) -> bool {
        match &self.kind {
            TargetKind::Custom(c) => c.gradient.is_some(),
            _ => true,
        }
    }

    /// `∇V(x)` written into `out`.
    pub fn grad_potential(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        if x.len() != self.dim || out.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len().min(out.len()) });
        }
        match &self.kind {
            TargetKind::GaussianMixture(g) => {
                g.grad_log_density(x, out);
                out.iter_mut().for_each(|v| *v = -*v);
            }
            TargetKind::Ring { r0, sigma } => {
                let r = norm_sq(x).sqrt();
                if r == 0.0 {
                    // the cone tip has no gradient; use the zero subgradient
                    out.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    let s = (r - r0) / (sigma * sigma * r);
                    for (o, v) in out.iter_mut().zip(x) {
                        *o = s * v;
                    }
                }
            }
            TargetKind::Funnel { alpha } => {
                let e = (-2.0 * alpha * x[0]).exp();
                out[0] = x[0] - alpha * x[1] * x[1] * e;
                out[1] = x[1] * e;
            }
            TargetKind::Example64 => {
                let (a, b) = (x[0], x[1]);
                out[0] = a * b * b + a - 4.0;
                out[1] = a * a * b + b - 4.0;
            }
            TargetKind::BayesRidge { y, sigma1, sigma2 } => {
                let (p1, p2) = (1.0 / (sigma1 * sigma1), 1.0 / (sigma2 * sigma2));
                for ((o, e), yv) in out.iter_mut().zip(x).zip(y) {
                    *o = (e - yv) * p1 + e * p2;
                }
            }
            TargetKind::Custom(c) => match &c.gradient {
                Some(grad) => grad(x, out),
                None => return Err(Error::Unsupported("gradient of a custom potential")),
            },
        }
        Ok(())
    }

    /// `log g_β(x) = -V(x) + ‖x‖²/(2β) + const`, with the regularization applied
    /// when `ρ > 0`.
    pub fn log_g_beta(&self, beta: Temperature, x: &[f64]) -> Result<f64> {
        let v = self.potential(x);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("potential at {x:?}")));
        }
        Ok(self.log_g_beta_from_potential(beta, x, v))
    }

    #[inline]
    pub(crate) fn log_g_beta_from_potential(&self, beta: Temperature, x: &[f64], v: f64) -> f64 {
        let lg = self.unregularized_log_g(beta, x, v);
        if self.rho > 0.0 {
            log_sum_exp(&[(1.0 - self.rho).ln() + lg, self.rho.ln()])
        } else {
            lg
        }
    }

    /// `log g_β` ignoring `ρ`; exact for mixtures, shifted by a constant otherwise.
    #[inline]
    pub(crate) fn unregularized_log_g(&self, beta: Temperature, x: &[f64], v: f64) -> f64 {
        let b = beta.get();
        let base = -v + norm_sq(x) / (2.0 * b);
        match &self.kind {
            TargetKind::GaussianMixture(_) => base + 0.5 * self.dim as f64 * (2.0 * PI * b).ln(),
            _ => base,
        }
    }
}

/// Serializable description of a target, the on-disk schema for target files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    GaussianMixture {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        covs: Vec<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "is_zero")]
        rho: f64,
    },
    Ring {
        #[serde(default = "default_r0")]
        r0: f64,
        #[serde(default = "default_ring_sigma")]
        sigma: f64,
    },
    Funnel {
        #[serde(default = "default_funnel_alpha")]
        alpha: f64,
    },
    Example64,
    BayesRidge {
        y: Vec<f64>,
        sigma1: f64,
        sigma2: f64,
    },
    /// One of the named experiment targets in [`zoo`].
    Preset {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dim: Option<usize>,
    },
}

fn is_zero(v: &f64) -> bool {
    *v == 0.0
}
fn default_r0() -> f64 {
    2.0
}
fn default_ring_sigma() -> f64 {
    0.2
}
fn default_funnel_alpha() -> f64 {
    0.6
}

impl TargetConfig {
    pub fn build(&self) -> Result<Target> {
        match self {
            TargetConfig::GaussianMixture { weights, means, covs, rho } => {
                let covs = covs
                    .iter()
                    .map(|c| SpdMatrix::from_rows(c))
                    .collect::<Result<Vec<_>>>()?;
                Target::gaussian_mixture(weights.clone(), means.clone(), covs)?.with_regularization(*rho)
            }
            TargetConfig::Ring { r0, sigma } => Target::ring(*r0, *sigma),
            TargetConfig::Funnel { alpha } => Target::funnel(*alpha),
            TargetConfig::Example64 => Ok(Target::example64()),
            TargetConfig::BayesRidge { y, sigma1, sigma2 } => Target::bayes_ridge(y.clone(), *sigma1, *sigma2),
            TargetConfig::Preset { name, dim } => zoo::preset(name, *dim),
        }
    }
}

impl Target {
    /// Serializable form; `None` for custom potentials.
    pub fn to_config(&self) -> Option<TargetConfig> {
        Some(match &self.kind {
            TargetKind::GaussianMixture(g) => TargetConfig::GaussianMixture {
                weights: g.weights().to_vec(),
                means: g.means().to_vec(),
                covs: g.covs().iter().map(SpdMatrix::rows).collect(),
                rho: self.rho,
            },
            TargetKind::Ring { r0, sigma } => TargetConfig::Ring { r0: *r0, sigma: *sigma },
            TargetKind::Funnel { alpha } => TargetConfig::Funnel { alpha: *alpha },
            TargetKind::Example64 => TargetConfig::Example64,
            TargetKind::BayesRidge { y, sigma1, sigma2 } => TargetConfig::BayesRidge {
                y: y.clone(),
                sigma1: *sigma1,
                sigma2: *sigma2,
            },
            TargetKind::Custom(_) => return None,
        })
    }
}

/// Named targets from the experiment suite.
pub mod zoo {
    use super::*;

    pub const PRESETS: &[&str] = &[
        "gmm1d_sep2",
        "gmm1d_sep6",
        "gmm1d_strong",
        "gmm2d_k4",
        "gmm2d_k8",
        "gmm_highdim",
        "gmm_highdim_asym",
        "ring",
        "funnel",
        "example64",
        "bayes_ridge",
    ];

    /// `θ = (3/4, 1/4)`, `α = (-a, a)`, `Σ = (1/5, 4/5)`.
    pub fn gmm_1d(a: f64) -> Target {
        let gmm = GaussianMixture::isotropic(vec![0.75, 0.25], vec![vec![-a], vec![a]], &[0.2, 0.8])
            .expect("valid preset");
        Target::from_mixture(gmm)
    }

    /// The strong-convergence mixture: `θ = (½, ½)`, `α = ±a·1_d`, `Σ = 4/5 I`.
    pub fn gmm_strong(dim: usize, a: f64) -> Target {
        let gmm = GaussianMixture::isotropic(
            vec![0.5, 0.5],
            vec![vec![-a; dim], vec![a; dim]],
            &[0.8, 0.8],
        )
        .expect("valid preset");
        Target::from_mixture(gmm)
    }

    /// Equal-weight planar mixture with means `λ_i (sin(2π(i-1)/κ), cos(2π(i-1)/κ))`.
    pub fn gmm_2d_circle(radii: &[f64], variances: &[f64]) -> Result<Target> {
        let k = radii.len();
        let means = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let a = 2.0 * PI * i as f64 / k as f64;
                vec![r * a.sin(), r * a.cos()]
            })
            .collect();
        Ok(Target::from_mixture(GaussianMixture::isotropic(
            vec![1.0 / k as f64; k],
            means,
            variances,
        )?))
    }

    pub fn gmm_2d_k4() -> Target {
        gmm_2d_circle(&[6.0; 4], &[0.2, 0.4, 0.2, 0.4]).expect("valid preset")
    }

    pub fn gmm_2d_k8() -> Target {
        let s = 2.0 * 3f64.sqrt();
        gmm_2d_circle(&[6.0, s, 6.0, s, 6.0, s, 6.0, s], &[0.2; 8]).expect("valid preset")
    }

    /// Two modes at `±a·1_d` with covariance `var·I`.
    pub fn gmm_two_mode(dim: usize, weights: [f64; 2], means: [f64; 2], variances: [f64; 2]) -> Result<Target> {
        Ok(Target::from_mixture(GaussianMixture::isotropic(
            weights.to_vec(),
            vec![vec![means[0]; dim], vec![means[1]; dim]],
            &variances,
        )?))
    }

    pub fn preset(name: &str, dim: Option<usize>) -> Result<Target> {
        let d = dim.unwrap_or(10);
        if d == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        match name {
            "gmm1d_sep2" => Ok(gmm_1d(2.0)),
            "gmm1d_sep6" => Ok(gmm_1d(6.0)),
            "gmm1d_strong" => Ok(gmm_strong(dim.unwrap_or(1), 1.0)),
            "gmm2d_k4" => Ok(gmm_2d_k4()),
            "gmm2d_k8" => Ok(gmm_2d_k8()),
            "gmm_highdim" => gmm_two_mode(d, [0.5, 0.5], [-6.0, 6.0], [0.25, 0.25]),
            "gmm_highdim_asym" => gmm_two_mode(d, [0.75, 0.25], [-6.0, 6.0], [0.2, 0.8]),
            "ring" => Target::ring(2.0, 0.2),
            "funnel" => Target::funnel(0.6),
            "example64" => Ok(Target::example64()),
            "bayes_ridge" => Target::bayes_ridge(vec![0.0; dim.unwrap_or(2)], 1.0, 1.0),
            other => Err(Error::param(
                "name",
                format!("unknown preset `{other}`; known: {}", PRESETS.join(", ")),
            )),
        }
    }
}
