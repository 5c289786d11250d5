//! Dyadically refinable Brownian increments.
//!
//! A ladder draws every increment at the finest level once; coarser grids are
//! views obtained by summing blocks of fine increments, so runs at different
//! step sizes see the same Brownian path.
//!
//! Fine increments are rounded to the lattice `2^-40 · Z`. Partial sums of
//! lattice values stay exactly representable while `|W| < 2^13`, which makes
//! every aggregation independent of summation order: coarse increments, their
//! totals and `W_1` agree bit for bit across levels. The rounding error
//! (at most `2^-41` per increment) is far below anything a sampler resolves.

use super::rng::RngStream;
use crate::error::{Error, Result};

pub const MAX_LEVEL: u32 = 20;

const LATTICE: f64 = 1.0 / (1u64 << 40) as f64;

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianLadder {
    dim: usize,
    fine_level: u32,
    /// `2^fine_level` row-major d-vectors.
    increments: Vec<f64>,
}

fn snap(v: f64) -> f64 {
    (v / LATTICE).round() * LATTICE
}

/// `steps` lattice-rounded d-vectors distributed as `N(0, h I)`, row-major.
///
/// For `h = 2^-L` this is exactly the fine level of a [`BrownianLadder`] drawn
/// from the same stream.
pub fn gaussian_increments(steps: usize, dim: usize, h: f64, stream: &RngStream) -> Vec<f64> {
    let scale = h.sqrt();
    stream
        .standard_normals(steps * dim)
        .into_iter()
        .map(|z| snap(z * scale))
        .collect()
}

impl BrownianLadder {
    pub fn new(dim: usize, fine_level: u32, stream: &RngStream) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be positive"));
        }
        if fine_level > MAX_LEVEL {
            return Err(Error::param(
                "fine_level",
                format!("2^{fine_level} steps exceeds the limit 2^{MAX_LEVEL}"),
            ));
        }
        let steps = 1usize << fine_level;
        let increments = gaussian_increments(steps, dim, 1.0 / steps as f64, stream);
        Ok(Self {
            dim,
            fine_level,
            increments,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fine_level(&self) -> u32 {
        self.fine_level
    }

    pub fn fine_increments(&self) -> &[f64] {
        &self.increments
    }

    /// Increments on the grid with step `2^-coarse_level`; element j is the sum of
    /// fine increments `j·2^(L-k) .. (j+1)·2^(L-k) - 1`.
    pub fn aggregate(&self, coarse_level: u32) -> Result<Vec<f64>> {
        if coarse_level > self.fine_level {
            return Err(Error::param(
                "coarse_level",
                format!("{coarse_level} exceeds fine level {}", self.fine_level),
            ));
        }
        let block = 1usize << (self.fine_level - coarse_level);
        let d = self.dim;
        let mut out = vec![0.0; (1usize << coarse_level) * d];
        for (j, chunk) in self.increments.chunks_exact(block * d).enumerate() {
            let target = &mut out[j * d..(j + 1) * d];
            for row in chunk.chunks_exact(d) {
                for (acc, v) in target.iter_mut().zip(row) {
                    *acc += v;
                }
            }
        }
        Ok(out)
    }

    /// `W_1`, the terminal value of the path.
    pub fn terminal(&self) -> Vec<f64> {
        self.aggregate(0).expect("level 0 always valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sum_rows(incs: &[f64], d: usize) -> Vec<f64> {
        let mut acc = vec![0.0; d];
        for row in incs.chunks_exact(d) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
        acc
    }

    #[test]
    fn level_zero_single_increment() {
        let l = BrownianLadder::new(1, 0, &RngStream::new(3, 0)).unwrap();
        assert_eq!(l.fine_increments().len(), 1);
        assert_eq!(l.aggregate(0).unwrap(), l.fine_increments());
    }

    #[test]
    fn deterministic() {
        let s = RngStream::new(11, 5);
        assert_eq!(BrownianLadder::new(3, 6, &s).unwrap(), BrownianLadder::new(3, 6, &s).unwrap());
    }

    #[test]
    fn pairwise_sums_match_next_level() {
        let l = BrownianLadder::new(2, 3, &RngStream::new(1, 1)).unwrap();
        let fine = l.aggregate(3).unwrap();
        assert_eq!(fine, l.fine_increments());
        let coarse = l.aggregate(2).unwrap();
        for j in 0..4 {
            for c in 0..2 {
                assert_eq!(coarse[j * 2 + c], fine[(2 * j) * 2 + c] + fine[(2 * j + 1) * 2 + c]);
            }
        }
    }

    #[test]
    fn telescoping_is_bit_exact_at_every_level() {
        let d = 3;
        let l = BrownianLadder::new(d, 12, &RngStream::new(99, 2)).unwrap();
        let w1 = l.terminal();
        for k in 0..=12 {
            let coarse = l.aggregate(k).unwrap();
            assert_eq!(sum_rows(&coarse, d), w1, "level {k}");
            // reverse order too
            let mut rev: Vec<f64> = Vec::new();
            for row in coarse.chunks_exact(d).rev() {
                rev.extend_from_slice(row);
            }
            assert_eq!(sum_rows(&rev, d), w1);
        }
    }

    #[test]
    fn increment_variance_matches_step() {
        let l = BrownianLadder::new(1, 16, &RngStream::new(5, 0)).unwrap();
        let n = l.fine_increments().len() as f64;
        let var = l.fine_increments().iter().map(|v| v * v).sum::<f64>() / n;
        let h = 1.0 / n;
        assert!((var / h - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "{}", var / h);
    }

    #[test]
    fn rejects_bad_levels() {
        assert!(BrownianLadder::new(1, 21, &RngStream::new(0, 0)).is_err());
        let l = BrownianLadder::new(1, 2, &RngStream::new(0, 0)).unwrap();
        assert!(l.aggregate(3).is_err());
    }
}
