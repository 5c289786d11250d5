//! Evaluators of the tempered Schrödinger–Föllmer drift
//!
//! ```text
//! f_β(x, t) = β ∇ log E_ξ[g_β(x + √((1-t)β) ξ)]
//!           = β E[ξ g_β(x + cξ)] / (c E[g_β(x + cξ)]),   c = √((1-t)β)
//! ```
//!
//! Three routes are provided: a closed form for Gaussian mixtures, Monte Carlo
//! over a fixed noise pool (gradient-free Stein form, or the `∇g_β` form when the
//! target has a gradient), and tensorized Gauss–Hermite quadrature for `d ≤ 2`,
//! used as a test oracle. Every route combines weights in the log domain.
//!
//! The drift is defined on `t ∈ [0, 1)`. `t = 1` is rejected rather than clamped.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::spd::{cholesky, cholesky_log_det, cholesky_solve};
use crate::math::{dot, gauss_hermite, GaussHermite, RngStream};
use crate::targets::{GaussianMixture, Target, Temperature};

/// A drift `f(x, t)` on `R^d × [0, 1)`.
pub trait Drift: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;
}

fn check_time(t: f64) -> Result<()> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        Err(Error::TimeOutOfDomain { t })
    }
}

fn check_dims(expected: usize, x: &[f64], out: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: x.len() });
    }
    if out.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: out.len() });
    }
    Ok(())
}

/// Streaming softmax-weighted sum: accumulates `Σ e^{l_i} v_i / Σ e^{l_i}`
/// without storing the log-weights.
struct WeightedMean<'o> {
    max: f64,
    mass: f64,
    acc: &'o mut [f64],
}

impl<'o> WeightedMean<'o> {
    fn new(acc: &'o mut [f64]) -> Self {
        acc.iter_mut().for_each(|v| *v = 0.0);
        Self {
            max: f64::NEG_INFINITY,
            mass: 0.0,
            acc,
        }
    }

    /// Registers log-weight `l` and returns the linear weight to apply to the
    /// term's vector (relative to the current running maximum).
    fn push(&mut self, l: f64) -> f64 {
        if l == f64::NEG_INFINITY {
            return 0.0;
        }
        if l > self.max {
            let scale = (self.max - l).exp();
            self.mass *= scale;
            self.acc.iter_mut().for_each(|v| *v *= scale);
            self.max = l;
        }
        let w = (l - self.max).exp();
        self.mass += w;
        w
    }

    /// Normalizes; returns the log of the total mass.
    fn finish(self) -> f64 {
        if self.mass > 0.0 {
            let inv = 1.0 / self.mass;
            self.acc.iter_mut().for_each(|v| *v *= inv);
            self.max + self.mass.ln()
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Closed-form drift of a Gaussian mixture target.
///
/// With `c² = (1-t)β` and `B_i = tΣ_i + c² I`, each component contributes
///
/// ```text
/// log E[g_{β,i}(x + cξ)] = log θ_i - ½ log det B_i + ½ xᵀB_i⁻¹(Σ_i - βI)x / β
///                          + α_iᵀB_i⁻¹x - (t/2) α_iᵀB_i⁻¹α_i + const(x)
/// ∇ log E[g_{β,i}]       = B_i⁻¹((Σ_i - βI)x / β + α_i)
/// ```
///
/// which is the mixture closed form rewritten so that only `B_i` is factorized
/// (no `Σ_i⁻¹`), and which stays regular at `t = 0`.
#[derive(Debug, Clone)]
pub struct GmmExactDrift {
    gmm: GaussianMixture,
    beta: f64,
    all_diagonal: bool,
}

impl GmmExactDrift {
    pub fn new(gmm: GaussianMixture, beta: Temperature) -> Self {
        let all_diagonal = gmm.covs().iter().all(|c| c.is_diagonal());
        Self {
            gmm,
            beta: beta.get(),
            all_diagonal,
        }
    }

    pub fn mixture(&self) -> &GaussianMixture {
        &self.gmm
    }

    fn eval_diagonal(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let beta = self.beta;
        let mut wm = WeightedMean::new(out);
        for ((theta, mean), cov) in self.gmm.weights().iter().zip(self.gmm.means()).zip(self.gmm.covs()) {
            if *theta == 0.0 {
                continue;
            }
            let mut log_e = theta.ln();
            for (j, (xj, aj)) in x.iter().zip(mean).enumerate() {
                let s = cov.entry(j, j);
                let b = beta + t * (s - beta);
                let v = (s - beta) * xj / b;
                let q = aj / b;
                log_e += 0.5 * xj * v / beta + xj * q - 0.5 * t * aj * q - 0.5 * b.ln();
            }
            let w = wm.push(log_e);
            if w > 0.0 {
                for (j, (xj, aj)) in x.iter().zip(mean).enumerate() {
                    let s = cov.entry(j, j);
                    let b = beta + t * (s - beta);
                    // Σ = βI gives exactly α
                    wm.acc[j] += w * ((s - beta) * xj / b + (beta / b) * aj);
                }
            }
        }
        if wm.finish() == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { t });
        }
        Ok(())
    }

    fn eval_general(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let beta = self.beta;
        let d = x.len();
        let mut b = vec![0.0; d * d];
        let mut rhs = vec![0.0; d];
        let mut v = vec![0.0; d];
        let mut q = vec![0.0; d];
        let mut wm = WeightedMean::new(out);
        for ((theta, mean), cov) in self.gmm.weights().iter().zip(self.gmm.means()).zip(self.gmm.covs()) {
            if *theta == 0.0 {
                continue;
            }
            // B = βI + t(Σ - βI)
            for (k, (dst, s)) in b.iter_mut().zip(cov.entries()).enumerate() {
                *dst = if k % (d + 1) == 0 { beta + t * (s - beta) } else { t * s };
            }
            // SPD Σ and c² > 0 make B SPD; a failure here means a broken invariant
            let l = cholesky(d, &b)?;
            // (Σ - βI) x
            cov.mul_vec(x, &mut rhs);
            for (r, xv) in rhs.iter_mut().zip(x) {
                *r -= beta * xv;
            }
            cholesky_solve(d, &l, &rhs, &mut v);
            cholesky_solve(d, &l, mean, &mut q);
            let log_e = theta.ln() - 0.5 * cholesky_log_det(d, &l) + 0.5 * dot(x, &v) / beta + dot(x, &q)
                - 0.5 * t * dot(mean, &q);
            let w = wm.push(log_e);
            if w > 0.0 {
                for ((acc, vj), qj) in wm.acc.iter_mut().zip(&v).zip(&q) {
                    *acc += w * (vj + beta * qj);
                }
            }
        }
        if wm.finish() == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { t });
        }
        Ok(())
    }
}

impl Drift for GmmExactDrift {
    fn dim(&self) -> usize {
        self.gmm.dim()
    }

    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_time(t)?;
        check_dims(self.dim(), x, out)?;
        if self.all_diagonal {
            self.eval_diagonal(x, t, out)
        } else {
            self.eval_general(x, t, out)
        }
    }
}

/// The `M` standard-normal vectors used by the Monte Carlo drift. Drawn once per
/// chain and reused at every step.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePool {
    dim: usize,
    /// `M × d` row-major.
    xi: Vec<f64>,
    antithetic: bool,
    stream: RngStream,
}

impl NoisePool {
    /// With `antithetic`, rows come in exact negated pairs so that `Σ ξ_j = 0`.
    pub fn new(size: usize, dim: usize, stream: &RngStream, antithetic: bool) -> Result<Self> {
        if size < 2 {
            return Err(Error::param("pool_size", format!("must be at least 2, got {size}")));
        }
        if antithetic && !size.is_multiple_of(2) {
            return Err(Error::param("pool_size", format!("antithetic pool needs an even size, got {size}")));
        }
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        let xi = if antithetic {
            let half = stream.standard_normals(size / 2 * dim);
            let mut xi = Vec::with_capacity(size * dim);
            for row in half.chunks_exact(dim) {
                xi.extend_from_slice(row);
                xi.extend(row.iter().map(|v| -v));
            }
            xi
        } else {
            stream.standard_normals(size * dim)
        };
        Ok(Self {
            dim,
            xi,
            antithetic,
            stream: *stream,
        })
    }

    pub fn size(&self) -> usize {
        self.xi.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_antithetic(&self) -> bool {
        self.antithetic
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.xi.chunks_exact(self.dim)
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.xi[j * self.dim..(j + 1) * self.dim]
    }
}

/// Which estimator a Monte Carlo drift uses. Both share the same weights
/// `g_β(x + cξ_j)` and agree in expectation; they differ pathwise at finite M.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum McForm {
    /// `β Σ ξ_j w_j / (c Σ w_j)`, gradient free.
    Stein,
    /// `β Σ ∇g_β(y_j) / Σ g_β(y_j)`, needs `∇V`.
    Gradient,
}

#[derive(Debug, Clone)]
pub struct McDrift<'a> {
    target: &'a Target,
    beta: Temperature,
    pool: NoisePool,
    form: McForm,
}

impl<'a> McDrift<'a> {
    pub fn new(target: &'a Target, beta: Temperature, pool: NoisePool, form: McForm) -> Result<Self> {
        if pool.dim() != target.dim() {
            return Err(Error::DimensionMismatch { expected: target.dim(), got: pool.dim() });
        }
        if form == McForm::Gradient && !target.has_gradient() {
            return Err(Error::Unsupported("gradient-form Monte Carlo drift without ∇V"));
        }
        Ok(Self { target, beta, pool, form })
    }

    pub fn pool(&self) -> &NoisePool {
        &self.pool
    }
}

/// `log g_β(y)` for weighting; points where the potential overflows carry zero
/// weight, NaN is an error.
fn log_weight(target: &Target, beta: Temperature, y: &[f64]) -> Result<f64> {
    let v = target.potential(y);
    if v.is_nan() {
        return Err(Error::NonFinite(format!("potential at {y:?}")));
    }
    if v == f64::INFINITY {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(target.log_g_beta_from_potential(beta, y, v))
}

impl Drift for McDrift<'_> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_time(t)?;
        check_dims(self.dim(), x, out)?;
        let beta = self.beta.get();
        let c = ((1.0 - t) * beta).sqrt();
        let d = x.len();
        let mut y = vec![0.0; d];
        let mut grad = match self.form {
            McForm::Stein => Vec::new(),
            McForm::Gradient => vec![0.0; d],
        };
        let rho = self.target.rho();
        let mut wm = WeightedMean::new(out);
        for xi in self.pool.rows() {
            for ((yj, xj), e) in y.iter_mut().zip(x).zip(xi) {
                *yj = xj + c * e;
            }
            let l = log_weight(self.target, self.beta, &y)?;
            let w = wm.push(l);
            if w == 0.0 {
                continue;
            }
            match self.form {
                McForm::Stein => {
                    for (a, e) in wm.acc.iter_mut().zip(xi) {
                        *a += w * e;
                    }
                }
                McForm::Gradient => {
                    // ∇g_{β,ρ} = (1-ρ) g_β ∇log g_β and ∇log g_β = -∇V + y/β
                    self.target.grad_potential(&y, &mut grad)?;
                    let frac = if rho > 0.0 {
                        let v = self.target.potential(&y);
                        ((1.0 - rho).ln() + self.target.unregularized_log_g(self.beta, &y, v) - l).exp()
                    } else {
                        1.0
                    };
                    for ((a, g), yj) in wm.acc.iter_mut().zip(&grad).zip(&y) {
                        *a += w * frac * (-g + yj / beta);
                    }
                }
            }
        }
        if wm.finish() == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { t });
        }
        let scale = match self.form {
            McForm::Stein => beta / c,
            McForm::Gradient => beta,
        };
        out.iter_mut().for_each(|v| *v *= scale);
        Ok(())
    }
}

/// Tensorized Gauss–Hermite evaluation of the Stein-form ratio, `d ≤ 2`.
#[derive(Debug, Clone)]
pub struct QuadratureDrift<'a> {
    target: &'a Target,
    beta: Temperature,
    rule: GaussHermite,
}

impl<'a> QuadratureDrift<'a> {
    pub fn new(target: &'a Target, beta: Temperature, n_nodes: usize) -> Result<Self> {
        if target.dim() > 2 {
            return Err(Error::param(
                "dim",
                format!("quadrature drift supports d <= 2, got {}", target.dim()),
            ));
        }
        Ok(Self {
            target,
            beta,
            rule: gauss_hermite(n_nodes)?.to_standard_normal(),
        })
    }

    /// Visits every tensor node `(ξ, log weight)`.
    fn for_each_node(&self, mut f: impl FnMut(&[f64], f64) -> Result<()>) -> Result<()> {
        let r = &self.rule;
        match self.target.dim() {
            1 => {
                for (n, w) in r.nodes.iter().zip(&r.weights) {
                    f(&[*n], w.ln())?;
                }
            }
            _ => {
                for (n1, w1) in r.nodes.iter().zip(&r.weights) {
                    for (n2, w2) in r.nodes.iter().zip(&r.weights) {
                        f(&[*n1, *n2], w1.ln() + w2.ln())?;
                    }
                }
            }
        }
        Ok(())
    }

    /// `E_ξ[∇g_β(x + cξ)] / E_ξ[g_β(x + cξ)]` by quadrature, the ∇g form of the
    /// same ratio (used to cross-check the Stein identity).
    pub fn gradient_form(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_time(t)?;
        check_dims(self.target.dim(), x, out)?;
        let beta = self.beta.get();
        let c = ((1.0 - t) * beta).sqrt();
        let d = x.len();
        let mut y = vec![0.0; d];
        let mut grad = vec![0.0; d];
        let mut wm = WeightedMean::new(out);
        self.for_each_node(|xi, lw| {
            for ((yj, xj), e) in y.iter_mut().zip(x).zip(xi) {
                *yj = xj + c * e;
            }
            let w = wm.push(lw + log_weight(self.target, self.beta, &y)?);
            if w > 0.0 {
                self.target.grad_potential(&y, &mut grad)?;
                for ((a, g), yj) in wm.acc.iter_mut().zip(&grad).zip(&y) {
                    *a += w * (-g + yj / beta);
                }
            }
            Ok(())
        })?;
        if wm.finish() == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { t });
        }
        out.iter_mut().for_each(|v| *v *= beta);
        Ok(())
    }
}

impl Drift for QuadratureDrift<'_> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        check_time(t)?;
        check_dims(self.dim(), x, out)?;
        let beta = self.beta.get();
        let c = ((1.0 - t) * beta).sqrt();
        let mut y = vec![0.0; x.len()];
        let mut wm = WeightedMean::new(out);
        self.for_each_node(|xi, lw| {
            for ((yj, xj), e) in y.iter_mut().zip(x).zip(xi) {
                *yj = xj + c * e;
            }
            let w = wm.push(lw + log_weight(self.target, self.beta, &y)?);
            for (a, e) in wm.acc.iter_mut().zip(xi) {
                *a += w * e;
            }
            Ok(())
        })?;
        if wm.finish() == f64::NEG_INFINITY {
            return Err(Error::ZeroMass { t });
        }
        out.iter_mut().for_each(|v| *v *= beta / c);
        Ok(())
    }
}

/// Serializable choice of drift evaluator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriftSpec {
    GmmExact,
    SteinMc {
        #[serde(default = "default_pool_size")]
        pool_size: usize,
        #[serde(default)]
        antithetic: bool,
    },
    GradMc {
        #[serde(default = "default_pool_size")]
        pool_size: usize,
        #[serde(default)]
        antithetic: bool,
    },
    Quadrature {
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
}

pub const DEFAULT_POOL_SIZE: usize = 200;
pub const DEFAULT_QUADRATURE_NODES: usize = 64;

fn default_pool_size() -> usize {
    DEFAULT_POOL_SIZE
}

fn default_nodes() -> usize {
    DEFAULT_QUADRATURE_NODES
}

impl DriftSpec {
    pub fn stein(pool_size: usize) -> Self {
        DriftSpec::SteinMc {
            pool_size,
            antithetic: false,
        }
    }

    pub fn pool_size(&self) -> Option<usize> {
        match self {
            DriftSpec::SteinMc { pool_size, .. } | DriftSpec::GradMc { pool_size, .. } => Some(*pool_size),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            DriftSpec::GmmExact => "exact".into(),
            DriftSpec::SteinMc { pool_size, .. } => format!("stein_mc{pool_size}"),
            DriftSpec::GradMc { pool_size, .. } => format!("grad_mc{pool_size}"),
            DriftSpec::Quadrature { nodes } => format!("quadrature{nodes}"),
        }
    }

    /// Builds the drift for one chain; `pool_stream` feeds the noise pool.
    pub fn build<'a>(&self, target: &'a Target, beta: Temperature, pool_stream: &RngStream) -> Result<DriftField<'a>> {
        Ok(match *self {
            DriftSpec::GmmExact => {
                let gmm = target
                    .effective_mixture(beta)
                    .ok_or(Error::Unsupported("exact drift for a non-mixture target"))??;
                DriftField::GmmExact(GmmExactDrift::new(gmm, beta))
            }
            DriftSpec::SteinMc { pool_size, antithetic } => {
                let pool = NoisePool::new(pool_size, target.dim(), pool_stream, antithetic)?;
                DriftField::Mc(McDrift::new(target, beta, pool, McForm::Stein)?)
            }
            DriftSpec::GradMc { pool_size, antithetic } => {
                let pool = NoisePool::new(pool_size, target.dim(), pool_stream, antithetic)?;
                DriftField::Mc(McDrift::new(target, beta, pool, McForm::Gradient)?)
            }
            DriftSpec::Quadrature { nodes } => DriftField::Quadrature(QuadratureDrift::new(target, beta, nodes)?),
        })
    }
}

/// Any of the drift evaluators.
#[derive(Debug, Clone)]
pub enum DriftField<'a> {
    GmmExact(GmmExactDrift),
    Mc(McDrift<'a>),
    Quadrature(QuadratureDrift<'a>),
}

impl DriftField<'_> {
    pub fn eval_vec(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, t, &mut out)?;
        Ok(out)
    }
}

impl Drift for DriftField<'_> {
    fn dim(&self) -> usize {
        match self {
            DriftField::GmmExact(d) => d.dim(),
            DriftField::Mc(d) => d.dim(),
            DriftField::Quadrature(d) => d.dim(),
        }
    }

    fn eval(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        match self {
            DriftField::GmmExact(d) => d.eval(x, t, out),
            DriftField::Mc(d) => d.eval(x, t, out),
            DriftField::Quadrature(d) => d.eval(x, t, out),
        }
    }
}

/// Closed-form mixture drift at a single point.
pub fn gmm_exact_drift(gmm: &GaussianMixture, beta: Temperature, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; gmm.dim()];
    GmmExactDrift::new(gmm.clone(), beta).eval(x, t, &mut out)?;
    Ok(out)
}

/// Stein-form Monte Carlo drift at a single point.
pub fn stein_mc_drift(target: &Target, beta: Temperature, pool: &NoisePool, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let mut out = vec![0.0; target.dim()];
    McDrift::new(target, beta, pool.clone(), McForm::Stein)?.eval(x, t, &mut out)?;
    Ok(out)
}

/// Gauss–Hermite oracle at a single point.
pub fn quadrature_drift(target: &Target, beta: Temperature, x: &[f64], t: f64, n_nodes: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; target.dim()];
    QuadratureDrift::new(target, beta, n_nodes)?.eval(x, t, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::SpdMatrix;
    use crate::targets::zoo;

    fn beta(b: f64) -> Temperature {
        Temperature::new(b).unwrap()
    }

    fn gaussian(mean: Vec<f64>, var: f64) -> Target {
        let d = mean.len();
        Target::gaussian_mixture(vec![1.0], vec![mean], vec![SpdMatrix::scaled_identity(d, var).unwrap()]).unwrap()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    /// Points distributed like the diffusion's time-t marginal, `t·X_1 + √(β t(1-t)) z`.
    fn bridge_points(target: &Target, b: f64, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
        let gmm = target.mixture().unwrap();
        let d = target.dim();
        let ends = gmm.sample(n, &RngStream::new(seed, 0));
        let z = RngStream::new(seed, 1).standard_normals(n * (d + 1));
        ends.chunks_exact(d)
            .zip(z.chunks_exact(d + 1))
            .map(|(end, zz)| {
                // t uniform on [0, 1 - 2^-9]
                let u = 0.5 * (1.0 + libm_erf(zz[d] / std::f64::consts::SQRT_2));
                let t = u * (1.0 - 2f64.powi(-9));
                let s = (b * t * (1.0 - t)).sqrt();
                (end.iter().zip(zz).map(|(e, w)| t * e + s * w).collect(), t)
            })
            .collect()
    }

    // Abramowitz–Stegun 7.1.26 is plenty for turning a normal into a uniform.
    fn libm_erf(x: f64) -> f64 {
        let s = x.signum();
        let x = x.abs();
        let t = 1.0 / (1.0 + 0.3275911 * x);
        let y = 1.0
            - (((((1.061405429 * t - 1.453152027) * t) + 1.421413741) * t - 0.284496736) * t + 0.254829592)
                * t
                * (-x * x).exp();
        s * y
    }

    #[test]
    fn centered_gaussian_has_zero_drift() {
        for b in [0.5, 1.0, 2.0] {
            let t = gaussian(vec![0.0, 0.0], b);
            let f = DriftSpec::GmmExact.build(&t, beta(b), &RngStream::new(0, 0)).unwrap();
            for (x, tt) in [([0.0, 0.0], 0.0), ([1.5, -3.0], 0.3), ([10.0, 2.0], 0.99)] {
                assert!(f.eval_vec(&x, tt).unwrap().iter().all(|v| v.abs() < 1e-12));
                let q = quadrature_drift(&t, beta(b), &x, tt, 64).unwrap();
                assert!(q.iter().all(|v| v.abs() < 1e-12), "{q:?}");
            }
        }
    }

    #[test]
    fn shifted_gaussian_has_constant_drift() {
        let alpha = vec![1.3, -0.7];
        for b in [0.5, 1.0, 2.0] {
            let t = gaussian(alpha.clone(), b);
            let gmm = t.mixture().unwrap();
            for (x, tt) in [([0.0, 0.0], 0.0), ([0.4, 2.0], 0.5), ([-3.0, 1.0], 0.9)] {
                let f = gmm_exact_drift(gmm, beta(b), &x, tt).unwrap();
                assert!(max_abs_diff(&f, &alpha) < 1e-12, "{f:?}");
                let q = quadrature_drift(&t, beta(b), &x, tt, 64).unwrap();
                assert!(max_abs_diff(&q, &alpha) < 1e-8, "{q:?}");
            }
        }
    }

    #[test]
    fn translation_equivariance() {
        let v = [0.25, -1.5, 3.0];
        for b in [0.7, 1.0, 4.0] {
            let base = gaussian(vec![0.5, 0.5, -1.0], b);
            let moved = gaussian(vec![0.75, -1.0, 2.0], b);
            let x = [0.1, -0.2, 0.3];
            let f0 = gmm_exact_drift(base.mixture().unwrap(), beta(b), &x, 0.4).unwrap();
            let f1 = gmm_exact_drift(moved.mixture().unwrap(), beta(b), &x, 0.4).unwrap();
            for k in 0..3 {
                assert!((f1[k] - f0[k] - v[k]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_component_mixture_matches_quadrature() {
        let t = zoo::gmm_1d(2.0);
        let exact = gmm_exact_drift(t.mixture().unwrap(), beta(1.0), &[0.3], 0.5).unwrap();
        let quad = quadrature_drift(&t, beta(1.0), &[0.3], 0.5, 64).unwrap();
        assert!((exact[0] - quad[0]).abs() < 1e-6, "{exact:?} vs {quad:?}");
    }

    #[test]
    fn oracle_agreement_over_bridge_points() {
        let targets = [
            zoo::gmm_1d(2.0),
            zoo::gmm_1d(6.0),
            zoo::gmm_strong(1, 1.0),
            zoo::gmm_strong(2, 0.5),
            zoo::gmm_2d_k4(),
            zoo::gmm_2d_k8(),
            Target::gaussian_mixture(
                vec![0.3, 0.7],
                vec![vec![1.0, -1.0], vec![-2.0, 0.5]],
                vec![
                    SpdMatrix::new(2, vec![1.0, 0.3, 0.3, 0.5]).unwrap(),
                    SpdMatrix::new(2, vec![0.7, -0.2, -0.2, 1.2]).unwrap(),
                ],
            )
            .unwrap(),
        ];
        for (k, target) in targets.iter().enumerate() {
            for b in [1.0, 2.0] {
                let exact = DriftSpec::GmmExact.build(target, beta(b), &RngStream::new(0, 0)).unwrap();
                // narrow components need the full rule once β > 1
                let quad = QuadratureDrift::new(target, beta(b), 128).unwrap();
                let mut q = vec![0.0; target.dim()];
                for (x, t) in bridge_points(target, b, 50, k as u64) {
                    let f = exact.eval_vec(&x, t).unwrap();
                    quad.eval(&x, t, &mut q).unwrap();
                    assert!(max_abs_diff(&f, &q) < 1e-6, "{} β={b} x={x:?} t={t}: {f:?} vs {q:?}", target.id());
                }
            }
        }
    }

    #[test]
    fn general_and_diagonal_paths_agree() {
        // a diagonal matrix routed through the dense path
        let dense = GmmExactDrift {
            gmm: zoo::gmm_2d_k4().mixture().unwrap().clone(),
            beta: 1.5,
            all_diagonal: false,
        };
        let diag = GmmExactDrift::new(zoo::gmm_2d_k4().mixture().unwrap().clone(), beta(1.5));
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        for (x, t) in [([0.0, 0.0], 0.0), ([3.0, -1.0], 0.5), ([5.5, 0.2], 0.97)] {
            dense.eval(&x, t, &mut a).unwrap();
            diag.eval(&x, t, &mut b).unwrap();
            assert!(max_abs_diff(&a, &b) < 1e-10 * a[0].abs().max(1.0));
        }
    }

    #[test]
    fn stein_identity_under_quadrature() {
        let targets = [
            zoo::gmm_1d(2.0),
            zoo::gmm_strong(1, 1.0),
            Target::bayes_ridge(vec![0.7], 0.8, 1.1).unwrap(),
            gaussian(vec![-0.4], 1.0),
        ];
        for target in &targets {
            let quad = QuadratureDrift::new(target, beta(1.0), 64).unwrap();
            let (mut s, mut g) = ([0.0], [0.0]);
            for (x, t) in [(0.0, 0.0), (0.3, 0.5), (-1.2, 0.8), (2.0, 0.99)] {
                quad.eval(&[x], t, &mut s).unwrap();
                quad.gradient_form(&[x], t, &mut g).unwrap();
                assert!((s[0] - g[0]).abs() < 1e-8, "{} {x} {t}: {s:?} {g:?}", target.id());
            }
        }
    }

    #[test]
    fn symmetric_mixture_gives_odd_drift() {
        for a in [1.0, 3.0, 6.0] {
            let t = zoo::gmm_two_mode(1, [0.5, 0.5], [-a, a], [0.5, 0.5]).unwrap();
            let f = DriftSpec::GmmExact.build(&t, beta(1.0), &RngStream::new(0, 0)).unwrap();
            for x in [0.1, 0.7, 2.5, 6.0] {
                for tt in [0.0, 0.4, 0.9] {
                    let p = f.eval_vec(&[x], tt).unwrap()[0];
                    let m = f.eval_vec(&[-x], tt).unwrap()[0];
                    assert!((p + m).abs() < 1e-10, "a={a} x={x} t={tt}");
                }
            }
        }
    }

    #[test]
    fn terminal_time_is_rejected() {
        let t = zoo::gmm_1d(2.0);
        for spec in [DriftSpec::GmmExact, DriftSpec::stein(8), DriftSpec::Quadrature { nodes: 8 }] {
            let f = spec.build(&t, beta(1.0), &RngStream::new(1, 1)).unwrap();
            assert!(matches!(f.eval_vec(&[0.0], 1.0), Err(Error::TimeOutOfDomain { .. })));
            assert!(matches!(f.eval_vec(&[0.0], -0.1), Err(Error::TimeOutOfDomain { .. })));
            assert!(f.eval_vec(&[0.0], 1.0 - 1e-9).is_ok());
        }
    }

    #[test]
    fn exact_drift_needs_a_mixture() {
        let ring = Target::ring(2.0, 0.2).unwrap();
        assert!(matches!(
            DriftSpec::GmmExact.build(&ring, beta(1.0), &RngStream::new(0, 0)),
            Err(Error::Unsupported(_))
        ));
        assert!(QuadratureDrift::new(&zoo::gmm_strong(3, 1.0), beta(1.0), 16).is_err());
    }

    #[test]
    fn noise_pool_contract() {
        let s = RngStream::new(4, 2);
        let p = NoisePool::new(2, 1, &s, true).unwrap();
        assert_eq!(p.row(1)[0], -p.row(0)[0]);
        assert_eq!(NoisePool::new(50, 3, &s, false).unwrap(), NoisePool::new(50, 3, &s, false).unwrap());
        assert!(NoisePool::new(1, 1, &s, false).is_err());
        assert!(NoisePool::new(3, 1, &s, true).is_err());
        let big = NoisePool::new(1000, 3, &s, false).unwrap();
        for k in 0..3 {
            let mean = big.rows().map(|r| r[k]).sum::<f64>() / 1000.0;
            assert!(mean.abs() < 4.0 / 1000f64.sqrt(), "{mean}");
        }
    }

    #[test]
    fn antithetic_pool_cancels_on_flat_ratio() {
        let t = gaussian(vec![0.0, 0.0], 1.0);
        let pool = NoisePool::new(64, 2, &RngStream::new(9, 0), true).unwrap();
        assert_eq!(stein_mc_drift(&t, beta(1.0), &pool, &[0.0, 0.0], 0.25).unwrap(), vec![0.0, 0.0]);
        let off = stein_mc_drift(&t, beta(1.0), &pool, &[1.0, -2.0], 0.25).unwrap();
        assert!(off.iter().all(|v| v.abs() < 1e-12), "{off:?}");
    }

    #[test]
    fn mc_drift_on_shifted_gaussian_within_clt_bound() {
        let alpha = 1.0;
        let t = gaussian(vec![alpha], 1.0);
        let m = 4096;
        let mut sq = 0.0;
        for p in 0..200 {
            let pool = NoisePool::new(m, 1, &RngStream::new(123, p), false).unwrap();
            let f = stein_mc_drift(&t, beta(1.0), &pool, &[0.3], 0.5).unwrap();
            sq += (f[0] - alpha).powi(2);
        }
        let rmse = (sq / 200.0).sqrt();
        assert!(rmse < 5.0 * alpha / (m as f64).sqrt(), "{rmse}");
    }

    #[test]
    fn mc_average_converges_to_exact_drift() {
        let t = zoo::gmm_strong(1, 1.0);
        let (x, tt) = ([0.3], 0.5);
        let exact = gmm_exact_drift(t.mixture().unwrap(), beta(1.0), &x, tt).unwrap()[0];
        let n = 10_000;
        let mut vals = Vec::with_capacity(n);
        for p in 0..n {
            let pool = NoisePool::new(4096, 1, &RngStream::new(77, p as u64), false).unwrap();
            vals.push(stein_mc_drift(&t, beta(1.0), &pool, &x, tt).unwrap()[0]);
        }
        let mean = vals.iter().sum::<f64>() / n as f64;
        let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let se = sd / (n as f64).sqrt();
        assert!((mean - exact).abs() < 5.0 * se, "mean {mean} exact {exact} se {se}");
    }

    #[test]
    fn gradient_and_stein_forms_agree_for_large_pools() {
        let t = zoo::gmm_strong(2, 0.5);
        let pool = NoisePool::new(20_000, 2, &RngStream::new(5, 5), true).unwrap();
        let stein = McDrift::new(&t, beta(1.0), pool.clone(), McForm::Stein).unwrap();
        let grad = McDrift::new(&t, beta(1.0), pool, McForm::Gradient).unwrap();
        let exact = gmm_exact_drift(t.mixture().unwrap(), beta(1.0), &[0.2, -0.1], 0.3).unwrap();
        let (mut a, mut b) = ([0.0; 2], [0.0; 2]);
        stein.eval(&[0.2, -0.1], 0.3, &mut a).unwrap();
        grad.eval(&[0.2, -0.1], 0.3, &mut b).unwrap();
        assert!(max_abs_diff(&a, &exact) < 0.05, "{a:?} {exact:?}");
        assert!(max_abs_diff(&b, &exact) < 0.05, "{b:?} {exact:?}");
    }

    #[test]
    fn regularized_mc_forms_match_regularized_exact_drift() {
        let t = zoo::gmm_1d(2.0).with_regularization(0.3).unwrap();
        let b = beta(1.0);
        let exact = DriftSpec::GmmExact.build(&t, b, &RngStream::new(0, 0)).unwrap();
        let pool = NoisePool::new(50_000, 1, &RngStream::new(8, 0), true).unwrap();
        for form in [McForm::Stein, McForm::Gradient] {
            let mc = McDrift::new(&t, b, pool.clone(), form).unwrap();
            let mut out = [0.0];
            mc.eval(&[0.4], 0.5, &mut out).unwrap();
            let e = exact.eval_vec(&[0.4], 0.5).unwrap()[0];
            assert!((out[0] - e).abs() < 0.02, "{form:?}: {} vs {e}", out[0]);
        }
        let q = quadrature_drift(&t, b, &[0.4], 0.5, 64).unwrap()[0];
        assert!((q - exact.eval_vec(&[0.4], 0.5).unwrap()[0]).abs() < 1e-8);
    }

    #[test]
    fn ring_quadrature_matches_polar_integration() {
        // adaptive polar integration of the heat-kernel ratio, frozen
        const POLAR: f64 = 0.7114565375404561;
        let ring = Target::ring(2.0, 0.2).unwrap();
        let f = quadrature_drift(&ring, beta(1.0), &[1.0, 0.0], 0.2, 128).unwrap();
        assert!((f[0] - POLAR).abs() < 1e-5, "{f:?}");
        assert!(f[1].abs() < 1e-12);
    }
}
