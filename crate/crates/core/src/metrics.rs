//! Wasserstein-2 estimators, moments, mode coverage and strong-error curves.
//!
//! Sample sets are passed as flat row-major slices together with their
//! dimension.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::drift::Drift;
use crate::error::{Error, Result};
use crate::math::{BrownianLadder, RngStream, SpdMatrix};
use crate::samplers::{sfs_run, SfsConfig, TAG_BROWNIAN, TAG_POOL};
use crate::targets::{GaussianMixture, Target};

pub const MAX_EXACT_W2: usize = 4096;
pub const DEFAULT_PROJECTIONS: usize = 128;

fn check_samples(name: &'static str, xs: &[f64], dim: usize) -> Result<usize> {
    if dim == 0 || xs.is_empty() || !xs.len().is_multiple_of(dim) {
        return Err(Error::param(name, format!("need a nonempty n × {dim} sample set, got {} values", xs.len())));
    }
    if xs.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("sample set `{name}`")));
    }
    Ok(xs.len() / dim)
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Empirical W2 between two 1-d samples.
///
/// Equal sizes use the sorted (monotone) coupling. Unequal sizes integrate the
/// squared difference of the two empirical quantile functions over `[0, 1]`,
/// which is the exact W2 between the empirical measures.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    let n = check_samples("a", a, 1)?;
    let m = check_samples("b", b, 1)?;
    let (sa, sb) = (sorted(a), sorted(b));
    if n == m {
        let s: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
        return Ok((s / n as f64).sqrt());
    }
    // merge the breakpoints i/n and j/m; integer cross-multiplication keeps the
    // comparison exact
    let (nn, mm) = (n as u128, m as u128);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0u128; // in units of 1/(n m)
    let mut s = 0.0;
    while i < n && j < m {
        let next_a = (i as u128 + 1) * mm;
        let next_b = (j as u128 + 1) * nn;
        let next = next_a.min(next_b);
        s += (next - prev) as f64 * (sa[i] - sb[j]).powi(2);
        prev = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    Ok((s / (nn * mm) as f64).sqrt())
}

/// Exact empirical W2 between equal-size d-dimensional samples by minimum-cost
/// perfect matching on squared distances (`n ≤ 4096`).
pub fn w2_exact_smalln(a: &[f64], b: &[f64], dim: usize) -> Result<f64> {
    let n = check_samples("a", a, dim)?;
    let m = check_samples("b", b, dim)?;
    if n != m {
        return Err(Error::DimensionMismatch { expected: n, got: m });
    }
    if n > MAX_EXACT_W2 {
        return Err(Error::param(
            "n",
            format!("exact W2 supports at most {MAX_EXACT_W2} samples, got {n}"),
        ));
    }
    let cost = |i: usize, j: usize| sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]);
    let assignment = min_cost_assignment(n, cost);
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost(i, j)).sum();
    Ok((total / n as f64).sqrt())
}

fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(u, v)| (u - v).powi(2)).sum()
}

/// Square assignment by successive shortest augmenting paths with dual
/// potentials (Hungarian method), O(n³). Returns the column of each row.
pub fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based: row 0 / column 0 are the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    col_of
}

/// Sliced W2: root-mean over random unit directions `u` of `w2_1d(a·u, b·u)²`.
/// Directions are normalized Gaussian vectors drawn from `stream`.
pub fn sliced_w2(a: &[f64], b: &[f64], dim: usize, n_projections: usize, stream: &RngStream) -> Result<f64> {
    let n = check_samples("a", a, dim)?;
    let m = check_samples("b", b, dim)?;
    if n_projections == 0 {
        return Err(Error::param("n_projections", "must be at least 1"));
    }
    let dirs = stream.standard_normals(n_projections * dim);
    let mut pa = vec![0.0; n];
    let mut pb = vec![0.0; m];
    let mut total = 0.0;
    for u in dirs.chunks_exact(dim) {
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = u.iter().map(|x| x / norm).collect();
        for (p, row) in pa.iter_mut().zip(a.chunks_exact(dim)) {
            *p = crate::math::dot(row, &u);
        }
        for (p, row) in pb.iter_mut().zip(b.chunks_exact(dim)) {
            *p = crate::math::dot(row, &u);
        }
        total += w2_1d(&pa, &pb)?.powi(2);
    }
    Ok((total / n_projections as f64).sqrt())
}

/// W2 between `N(m1, c1)` and `N(m2, c2)`:
/// `‖m1 - m2‖² + tr(C1 + C2 - 2 (C2^½ C1 C2^½)^½)`.
pub fn gaussian_w2_analytic(m1: &[f64], c1: &SpdMatrix, m2: &[f64], c2: &SpdMatrix) -> Result<f64> {
    let d = m1.len();
    for got in [m2.len(), c1.dim(), c2.dim()] {
        if got != d {
            return Err(Error::DimensionMismatch { expected: d, got });
        }
    }
    let root2 = psd_sqrt(&c2.to_dmatrix());
    let inner = &root2 * c1.to_dmatrix() * &root2;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = inner.symmetric_eigen().eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let tr = c1.to_dmatrix().trace() + c2.to_dmatrix().trace() - 2.0 * cross;
    let mean_part: f64 = sq_dist(m1, m2);
    Ok((mean_part + tr).max(0.0).sqrt())
}

fn psd_sqrt(m: &nalgebra::DMatrix<f64>) -> nalgebra::DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Per-mode sample weights inside capture balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeReport {
    pub centers: Vec<Vec<f64>>,
    pub radius: f64,
    pub counts: Vec<usize>,
    pub weights: Vec<f64>,
    pub unassigned: f64,
    pub n_samples: usize,
}

impl ModeReport {
    /// Largest absolute deviation of the weights from `reference`.
    pub fn max_weight_error(&self, reference: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(reference)
            .map(|(w, r)| (w - r).abs())
            .fold(0.0, f64::max)
    }
}

/// `3 σ_max √d`: a component's draws lie at distance about `σ√d` from its
/// mean, so a radius of `3σ` only works in one dimension.
pub fn default_capture_radius(gmm: &GaussianMixture) -> f64 {
    3.0 * gmm.max_std() * (gmm.dim() as f64).sqrt()
}

/// Assigns each sample to the nearest center when it lies within `radius`.
pub fn mode_weights(samples: &[f64], dim: usize, centers: &[Vec<f64>], radius: f64) -> Result<ModeReport> {
    let n = check_samples("samples", samples, dim)?;
    if centers.is_empty() {
        return Err(Error::param("centers", "need at least one center"));
    }
    if let Some(c) = centers.iter().find(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: c.len(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param("radius", format!("must be positive, got {radius}")));
    }
    for (i, a) in centers.iter().enumerate() {
        for b in &centers[..i] {
            let sep = sq_dist(a, b).sqrt();
            if radius >= 0.5 * sep {
                return Err(Error::param(
                    "radius",
                    format!("capture balls of radius {radius} overlap (center separation {sep})"),
                ));
            }
        }
    }
    let r2 = radius * radius;
    let mut counts = vec![0usize; centers.len()];
    for x in samples.chunks_exact(dim) {
        let (best, dist) = centers
            .iter()
            .map(|c| sq_dist(x, c))
            .enumerate()
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("nonempty centers");
        if dist <= r2 {
            counts[best] += 1;
        }
    }
    let weights: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let unassigned = 1.0 - weights.iter().sum::<f64>();
    Ok(ModeReport {
        centers: centers.to_vec(),
        radius,
        counts,
        weights,
        unassigned,
        n_samples: n,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares of `log err` on `log h`.
pub fn fit_loglog_slope(h: &[f64], err: &[f64]) -> Result<LogLogFit> {
    if h.len() != err.len() {
        return Err(Error::DimensionMismatch {
            expected: h.len(),
            got: err.len(),
        });
    }
    if h.len() < 3 {
        return Err(Error::param("h", format!("need at least 3 points, got {}", h.len())));
    }
    if h.iter().chain(err).any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::param("err", "all entries must be positive and finite"));
    }
    let xs: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::param("h", "needs at least two distinct values"));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LogLogFit {
        slope,
        intercept: my - slope * mx,
        r2,
    })
}

/// Unbiased sample mean and row-major covariance.
pub fn moment_stats(samples: &[f64], dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = check_samples("samples", samples, dim)?;
    if n < 2 {
        return Err(Error::param("samples", "need at least two samples"));
    }
    let mut mean = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = vec![0.0; dim * dim];
    let mut dev = vec![0.0; dim];
    for row in samples.chunks_exact(dim) {
        for ((d, v), m) in dev.iter_mut().zip(row).zip(&mean) {
            *d = v - m;
        }
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += dev[i] * dev[j];
            }
        }
    }
    cov.iter_mut().for_each(|c| *c /= (n - 1) as f64);
    Ok((mean, cov))
}

/// Coupled strong error of the SFS sampler against a fine reference grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub target: String,
    pub drift: String,
    pub beta: f64,
    /// Strictly decreasing.
    pub h: Vec<f64>,
    pub rmse: Vec<f64>,
    pub ref_level: u32,
    pub n_chains: usize,
    pub seed: u64,
    /// Fit over the entries with positive RMSE; `None` with fewer than three.
    pub fit: Option<LogLogFit>,
    /// Every RMSE is exactly zero (constant drift).
    pub exact: bool,
}

impl ConvergenceReport {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// `log2(1/h)` when `h = 2^-k` for `0 ≤ k ≤ ref_level`.
fn dyadic_level(h: f64, ref_level: u32) -> Result<u32> {
    if h > 0.0 && h <= 1.0 {
        let k = -h.log2().round();
        if k >= 0.0 && k <= ref_level as f64 && h == (-k).exp2() {
            return Ok(k as u32);
        }
    }
    Err(Error::param(
        "h",
        format!("{h} is not a dyadic step 2^-k with k ≤ {ref_level}"),
    ))
}

/// For every chain one Brownian ladder at level `ref_level` drives the
/// reference run and all coarse runs; the drift (and its noise pool) is shared
/// too. `RMSE(h) = sqrt(mean_chains ‖Y_1^(h) - Y_1^(ref)‖²)`.
pub fn strong_error_curve(
    target: &Target,
    cfg: &SfsConfig,
    h_list: &[f64],
    ref_level: u32,
    n_chains: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    if h_list.is_empty() {
        return Err(Error::param("h", "need at least one step size"));
    }
    if n_chains == 0 {
        return Err(Error::param("n_chains", "must be at least 1"));
    }
    let mut levels = h_list
        .iter()
        .map(|&h| dyadic_level(h, ref_level))
        .collect::<Result<Vec<u32>>>()?;
    levels.sort_unstable();
    if levels.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::param("h", "step sizes must be distinct"));
    }
    let d = target.dim();
    let per_chain: Vec<Result<Vec<f64>>> = (0..n_chains)
        .into_par_iter()
        .map(|i| {
            let stream = RngStream::new(seed, i as u64);
            let drift = cfg.drift.build(target, cfg.beta, &stream.child(TAG_POOL))?;
            let ladder = BrownianLadder::new(d, ref_level, &stream.child(TAG_BROWNIAN))?;
            let reference = run_level(&drift, cfg, &ladder, ref_level)?;
            levels
                .iter()
                .map(|&k| {
                    let y = run_level(&drift, cfg, &ladder, k)?;
                    Ok(sq_dist(&y, &reference))
                })
                .collect()
        })
        .collect();
    let mut sums = vec![0.0; levels.len()];
    let mut failures = Vec::new();
    for (i, r) in per_chain.into_iter().enumerate() {
        match r {
            Ok(errs) => sums.iter_mut().zip(errs).for_each(|(s, e)| *s += e),
            Err(e) => failures.push((i, Box::new(e))),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Ensemble {
            total: n_chains,
            failures,
        });
    }
    let h: Vec<f64> = levels.iter().map(|&k| (-(k as f64)).exp2()).collect();
    let rmse: Vec<f64> = sums.iter().map(|s| (s / n_chains as f64).sqrt()).collect();
    let (fh, fe): (Vec<f64>, Vec<f64>) = h.iter().zip(&rmse).filter(|(_, e)| **e > 0.0).unzip();
    let fit = if fh.len() >= 3 { fit_loglog_slope(&fh, &fe).ok() } else { None };
    Ok(ConvergenceReport {
        target: target.id(),
        drift: cfg.drift.label(),
        beta: cfg.beta.get(),
        exact: rmse.iter().all(|e| *e == 0.0),
        h,
        rmse,
        ref_level,
        n_chains,
        seed,
        fit,
    })
}

fn run_level<D: Drift>(drift: &D, cfg: &SfsConfig, ladder: &BrownianLadder, level: u32) -> Result<Vec<f64>> {
    let run_cfg = SfsConfig {
        steps: 1usize << level,
        record_path: false,
        ..cfg.clone()
    };
    Ok(sfs_run(drift, &run_cfg, &ladder.aggregate(level)?)?.terminal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::DriftSpec;
    use crate::targets::{zoo, Temperature};
    use proptest::prelude::*;

    fn normals(n: usize, dim: usize, shift: &[f64], seed: u64) -> Vec<f64> {
        let mut z = RngStream::new(seed, 0).standard_normals(n * dim);
        for row in z.chunks_exact_mut(dim) {
            for (v, s) in row.iter_mut().zip(shift) {
                *v += s;
            }
        }
        z
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in permutations(n - 1) {
            for k in 0..=p.len() {
                let mut q = p.clone();
                q.insert(k, n - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_w2(a: &[f64], b: &[f64], dim: usize) -> f64 {
        let n = a.len() / dim;
        let best = permutations(n)
            .iter()
            .map(|p| {
                p.iter()
                    .enumerate()
                    .map(|(i, &j)| sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]))
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min);
        (best / n as f64).sqrt()
    }

    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }

    #[test]
    fn w2_1d_examples() {
        assert_eq!(w2_1d(&[0.3, -1.0, 2.0], &[2.0, 0.3, -1.0]).unwrap(), 0.0);
        assert_eq!(w2_1d(&[0.0], &[3.0]).unwrap(), 3.0);
        assert!((w2_1d(&[0.0, 1.0], &[1.0, 3.0]).unwrap() - 1.5811388300841898).abs() < 1e-15);
        assert!((w2_1d(&[0.0], &[0.0, 2.0]).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!(w2_1d(&[], &[1.0]).is_err());
        assert!(w2_1d(&[f64::NAN], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn w2_1d_unequal_sizes_match_replication(
            a in prop::collection::vec(-10.0f64..10.0, 1..12),
            b in prop::collection::vec(-10.0f64..10.0, 1..12),
        ) {
            // repeating every atom lcm/n times gives equal-size empirical measures
            let l = a.len() / gcd(a.len(), b.len()) * b.len();
            let ra: Vec<f64> = a.iter().flat_map(|v| std::iter::repeat_n(*v, l / a.len())).collect();
            let rb: Vec<f64> = b.iter().flat_map(|v| std::iter::repeat_n(*v, l / b.len())).collect();
            let direct = w2_1d(&a, &b).unwrap();
            let replicated = w2_1d(&ra, &rb).unwrap();
            prop_assert!((direct - replicated).abs() < 1e-10, "{} vs {}", direct, replicated);
        }

        #[test]
        fn w2_1d_is_a_metric(
            a in prop::collection::vec(-10.0f64..10.0, 8),
            b in prop::collection::vec(-10.0f64..10.0, 8),
            c in prop::collection::vec(-10.0f64..10.0, 8),
        ) {
            let ab = w2_1d(&a, &b).unwrap();
            prop_assert!((ab - w2_1d(&b, &a).unwrap()).abs() < 1e-10);
            prop_assert!(ab <= w2_1d(&a, &c).unwrap() + w2_1d(&c, &b).unwrap() + 1e-10);
        }

        #[test]
        fn exact_w2_beats_greedy_matching(
            a in prop::collection::vec(-5.0f64..5.0, 2 * 12),
            b in prop::collection::vec(-5.0f64..5.0, 2 * 12),
        ) {
            let (dim, n) = (2, 12);
            let mut free: Vec<usize> = (0..n).collect();
            let mut greedy = 0.0;
            for i in 0..n {
                let (k, c) = free
                    .iter()
                    .map(|&j| sq_dist(&a[i * dim..(i + 1) * dim], &b[j * dim..(j + 1) * dim]))
                    .enumerate()
                    .min_by(|p, q| p.1.total_cmp(&q.1))
                    .unwrap();
                greedy += c;
                free.remove(k);
            }
            let exact = w2_exact_smalln(&a, &b, dim).unwrap();
            prop_assert!(exact <= (greedy / n as f64).sqrt() + 1e-12);
        }

        #[test]
        fn sliced_never_exceeds_exact(
            n in 2usize..40, dim in 1usize..4, seed in 0u64..1000,
        ) {
            let a = normals(n, dim, &[0.0; 3], seed);
            let b = normals(n, dim, &[1.0, -0.5, 0.2], seed + 7919);
            let exact = w2_exact_smalln(&a, &b, dim).unwrap();
            let sliced = sliced_w2(&a, &b, dim, 16, &RngStream::new(seed, 3)).unwrap();
            prop_assert!(sliced <= exact + 1e-10, "{} > {}", sliced, exact);
        }

        #[test]
        fn mode_partition_sums_to_one(
            xs in prop::collection::vec(-10.0f64..10.0, 1..300),
            r in 0.1f64..2.9,
        ) {
            let rep = mode_weights(&xs, 1, &[vec![-3.0], vec![3.0], vec![9.0]], r).unwrap();
            prop_assert_eq!(rep.weights.iter().sum::<f64>() + rep.unassigned, 1.0);
            prop_assert_eq!(rep.counts.iter().sum::<usize>() <= xs.len(), true);
        }
    }

    #[test]
    fn exact_w2_examples() {
        let a = normals(30, 3, &[0.0; 3], 1);
        assert!(w2_exact_smalln(&a, &a, 3).unwrap() < 1e-12);
        let mut shuffled: Vec<f64> = Vec::new();
        for row in a.chunks_exact(3).rev() {
            shuffled.extend_from_slice(row);
        }
        assert!(w2_exact_smalln(&a, &shuffled, 3).unwrap() < 1e-12);
        // pairing by sorted x matches (0,0)-(0.1,5) and (1,5)-(1.1,0), cost 25.01 + 1.01;
        // the optimum crosses in x: 1.21 + 0.81
        let a = [0.0, 0.0, 1.0, 5.0];
        let b = [1.1, 0.0, 0.1, 5.0];
        let exact = w2_exact_smalln(&a, &b, 2).unwrap();
        assert!((exact - brute_force_w2(&a, &b, 2)).abs() < 1e-12);
        assert!((exact - 1.01f64.sqrt()).abs() < 1e-12);
        assert!(w2_exact_smalln(&a, &b[..2], 2).is_err());
        let big = vec![0.0; MAX_EXACT_W2 + 1];
        assert!(w2_exact_smalln(&big, &big, 1).is_err());
    }

    #[test]
    fn exact_w2_matches_brute_force() {
        for seed in 0..40 {
            let n = 2 + (seed as usize % 6);
            let a = normals(n, 2, &[0.0, 0.0], seed);
            let b = normals(n, 2, &[0.5, 0.0], seed + 100);
            let exact = w2_exact_smalln(&a, &b, 2).unwrap();
            assert!((exact - brute_force_w2(&a, &b, 2)).abs() < 1e-10, "seed {seed}");
        }
    }

    #[test]
    fn exact_w2_matches_1d_estimator() {
        for seed in 0..50 {
            let n = 1 + (seed as usize * 7) % 60;
            let a = normals(n, 1, &[0.0], seed);
            let b = normals(n, 1, &[1.0], seed + 1000);
            let diff = (w2_exact_smalln(&a, &b, 1).unwrap() - w2_1d(&a, &b).unwrap()).abs();
            assert!(diff < 1e-10, "seed {seed}: {diff}");
        }
    }

    #[test]
    fn sliced_examples() {
        let s = RngStream::new(5, 5);
        let a = normals(200, 3, &[0.0; 3], 2);
        assert_eq!(sliced_w2(&a, &a, 3, 64, &s).unwrap(), 0.0);
        let x = normals(100, 1, &[0.0], 3);
        let y = normals(80, 1, &[0.7], 4);
        let one = w2_1d(&x, &y).unwrap();
        for k in [1, 7, 128] {
            assert!((sliced_w2(&x, &y, 1, k, &s).unwrap() - one).abs() < 1e-12);
        }
        assert!(sliced_w2(&x, &y, 1, 0, &s).is_err());
        // N(0, I) vs N(m, I) in d = 3 for ‖m‖ = 0, 1, 2
        let base = normals(2000, 3, &[0.0; 3], 10);
        let vals: Vec<f64> = [0.0, 1.0, 2.0]
            .iter()
            .map(|r| {
                let other = normals(2000, 3, &[*r, 0.0, 0.0], 11);
                sliced_w2(&base, &other, 3, 128, &s).unwrap()
            })
            .collect();
        assert!(vals[0] < vals[1] && vals[1] < vals[2], "{vals:?}");
        // E|u·m|² = ‖m‖²/d for uniform directions
        assert!((vals[2] - 2.0 / 3f64.sqrt()).abs() < 0.15, "{vals:?}");
    }

    #[test]
    fn gaussian_w2_examples() {
        let c = SpdMatrix::new(2, vec![2.0, 0.3, 0.3, 0.5]).unwrap();
        assert!(gaussian_w2_analytic(&[1.0, 2.0], &c, &[1.0, 2.0], &c).unwrap() < 1e-7);
        let id = SpdMatrix::scaled_identity(3, 1.0).unwrap();
        let w = gaussian_w2_analytic(&[0.0; 3], &id, &[1.0, 2.0, 2.0], &id).unwrap();
        assert!((w - 3.0).abs() < 1e-12);
        let s1 = SpdMatrix::from_diagonal(&[0.25]).unwrap();
        let s2 = SpdMatrix::from_diagonal(&[4.0]).unwrap();
        assert!((gaussian_w2_analytic(&[0.0], &s1, &[0.0], &s2).unwrap() - 1.5).abs() < 1e-12);
        assert!(gaussian_w2_analytic(&[0.0], &s1, &[0.0, 0.0], &s2).is_err());
    }

    #[test]
    fn gaussian_w2_non_commuting_2x2() {
        // for 2×2 PSD M, tr √M = sqrt(tr M + 2 sqrt(det M))
        let c1 = SpdMatrix::new(2, vec![2.0, 0.7, 0.7, 1.0]).unwrap();
        let c2 = SpdMatrix::new(2, vec![0.5, -0.2, -0.2, 3.0]).unwrap();
        let det = |m: &SpdMatrix| m.entry(0, 0) * m.entry(1, 1) - m.entry(0, 1).powi(2);
        let tr = |m: &SpdMatrix| m.entry(0, 0) + m.entry(1, 1);
        // tr(C2^½ C1 C2^½) = tr(C1 C2), det = det C1 det C2
        let tr_prod: f64 = (0..2).map(|i| (0..2).map(|k| c1.entry(i, k) * c2.entry(k, i)).sum::<f64>()).sum();
        let cross = (tr_prod + 2.0 * (det(&c1) * det(&c2)).sqrt()).sqrt();
        let expected = (1.0 + 0.25 + tr(&c1) + tr(&c2) - 2.0 * cross).sqrt();
        let got = gaussian_w2_analytic(&[0.0, 0.0], &c1, &[1.0, 0.5], &c2).unwrap();
        assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
    }

    #[test]
    fn mode_weight_examples() {
        let centers = [vec![-6.0], vec![6.0]];
        let r = mode_weights(&[-6.0; 10], 1, &centers, 2.0).unwrap();
        assert_eq!(r.weights, vec![1.0, 0.0]);
        assert_eq!(r.unassigned, 0.0);
        let r = mode_weights(&[-6.5, -5.0, 6.0, 7.0], 1, &centers, 2.0).unwrap();
        assert_eq!(r.weights, vec![0.5, 0.5]);
        let r = mode_weights(&[0.0, -6.0, 6.0, 6.0], 1, &centers, 2.0).unwrap();
        assert_eq!(r.counts, vec![1, 2]);
        assert_eq!(r.unassigned, 0.25);
        assert!((r.max_weight_error(&[0.75, 0.25]) - 0.5).abs() < 1e-15);
        assert!(mode_weights(&[0.0], 1, &centers, 6.0).is_err());
        assert!(mode_weights(&[0.0], 1, &centers, 0.0).is_err());
        assert!(mode_weights(&[0.0], 1, &[vec![0.0, 0.0]], 1.0).is_err());
    }

    #[test]
    fn default_radius_covers_high_dimensional_modes() {
        let t = zoo::preset("gmm_highdim", Some(10)).unwrap();
        let gmm = t.mixture().unwrap();
        let r = default_capture_radius(gmm);
        assert!((r - 1.5 * 10f64.sqrt()).abs() < 1e-12);
        let draws = gmm.sample(2000, &RngStream::new(1, 1));
        let rep = mode_weights(&draws, 10, gmm.means(), r).unwrap();
        assert_eq!(rep.unassigned, 0.0);
        assert!((rep.weights[0] - 0.5).abs() < 0.05, "{rep:?}");
    }

    #[test]
    fn slope_fit_examples() {
        let h = [0.5, 0.25, 0.125, 0.0625];
        let lin: Vec<f64> = h.iter().map(|v| 3.0 * v).collect();
        let fit = fit_loglog_slope(&h, &lin).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-12 && (fit.r2 - 1.0).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        let root: Vec<f64> = h.iter().map(|v| 0.2 * v.sqrt()).collect();
        assert!((fit_loglog_slope(&h, &root).unwrap().slope - 0.5).abs() < 1e-12);
        assert!(fit_loglog_slope(&h[..2], &lin[..2]).is_err());
        assert!(fit_loglog_slope(&h, &[1.0, 0.0, 1.0, 1.0]).is_err());
        // 1 % multiplicative noise over five halvings
        let hs: Vec<f64> = (5..10).map(|k| (-(k as f64)).exp2()).collect();
        for seed in 0..200 {
            let z = RngStream::new(seed, 9).standard_normals(hs.len());
            let e: Vec<f64> = hs.iter().zip(&z).map(|(h, z)| 2.0 * h * (1.0 + 0.01 * z)).collect();
            let s = fit_loglog_slope(&hs, &e).unwrap().slope;
            assert!((0.95..=1.05).contains(&s), "seed {seed}: {s}");
        }
    }

    #[test]
    fn moment_examples() {
        let (m, c) = moment_stats(&[1.0, 2.0, 1.0, 2.0, 1.0, 2.0], 2).unwrap();
        assert_eq!(m, vec![1.0, 2.0]);
        assert_eq!(c, vec![0.0; 4]);
        let n = 100_000;
        let z = normals(n, 2, &[0.0, 0.0], 42);
        let (m, c) = moment_stats(&z, 2).unwrap();
        assert!(m.iter().all(|v| v.abs() < 5.0 / (n as f64).sqrt()));
        assert!((c[0] - 1.0).abs() < 0.02 && c[1].abs() < 0.02);
        assert!(moment_stats(&[1.0], 1).is_err());
    }

    fn sfs(drift: DriftSpec) -> SfsConfig {
        SfsConfig::new(1, Temperature::new(1.0).unwrap(), drift).unwrap()
    }

    #[test]
    fn self_coupling_and_constant_drift_are_exact() {
        let gmm = zoo::gmm_strong(1, 1.0);
        let r = strong_error_curve(&gmm, &sfs(DriftSpec::GmmExact), &[1.0 / 64.0], 6, 20, 1).unwrap();
        assert_eq!(r.rmse, vec![0.0]);
        assert!(r.exact && r.fit.is_none());
        let gauss = crate::targets::Target::gaussian_mixture(
            vec![1.0],
            vec![vec![1.5, -0.5]],
            vec![SpdMatrix::scaled_identity(2, 1.0).unwrap()],
        )
        .unwrap();
        let hs: Vec<f64> = (2..8).map(|k| (-(k as f64)).exp2()).collect();
        let r = strong_error_curve(&gauss, &sfs(DriftSpec::GmmExact), &hs, 10, 50, 3).unwrap();
        assert!(r.exact, "{:?}", r.rmse);
        assert_eq!(r.slope(), None);
    }

    #[test]
    fn rejects_non_dyadic_steps() {
        let gmm = zoo::gmm_strong(1, 1.0);
        let cfg = sfs(DriftSpec::GmmExact);
        assert!(strong_error_curve(&gmm, &cfg, &[0.1], 8, 2, 0).is_err());
        assert!(strong_error_curve(&gmm, &cfg, &[1.0 / 512.0], 8, 2, 0).is_err());
        assert!(strong_error_curve(&gmm, &cfg, &[0.25, 0.25], 8, 2, 0).is_err());
        assert!(strong_error_curve(&gmm, &cfg, &[], 8, 2, 0).is_err());
    }

    #[test]
    fn coupled_rmse_shrinks_as_h_halves() {
        let gmm = zoo::gmm_strong(1, 1.0);
        let hs: Vec<f64> = (5..10).map(|k| (-(k as f64)).exp2()).collect();
        let r = strong_error_curve(&gmm, &sfs(DriftSpec::GmmExact), &hs, 12, 500, 11).unwrap();
        assert_eq!(r.h, hs);
        assert!(r.rmse.windows(2).all(|w| w[1] <= w[0]), "{:?}", r.rmse);
        assert!(r.rmse.iter().all(|e| *e > 0.0 && e.is_finite()));
        let s = r.slope().unwrap();
        assert!((0.7..1.3).contains(&s), "{s}");
    }

    #[test]
    fn reference_run_is_the_ensemble_chain() {
        // the ladder's fine level is the increment stream run_ensemble uses
        let t = zoo::gmm_1d(2.0);
        let cfg = SfsConfig::new(256, Temperature::new(1.0).unwrap(), DriftSpec::stein(16)).unwrap();
        let stream = RngStream::new(4, 2);
        let drift = cfg.drift.build(&t, cfg.beta, &stream.child(TAG_POOL)).unwrap();
        let ladder = BrownianLadder::new(1, 8, &stream.child(TAG_BROWNIAN)).unwrap();
        let via_ladder = run_level(&drift, &cfg, &ladder, 8).unwrap();
        let spec = crate::samplers::SamplerSpec::Sfs(cfg);
        assert_eq!(spec.run_chain(&t, &stream).unwrap(), via_ladder);
    }
}
