//! Gauss–Hermite quadrature.

use crate::error::{Error, Result};

pub const MAX_NODES: usize = 128;

/// Nodes and weights of an n-point rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Rescales the physicists' rule so that `Σ w_i f(x_i) ≈ E[f(ξ)]`, ξ ~ N(0, 1).
    pub fn to_standard_normal(&self) -> GaussHermite {
        let scale = std::f64::consts::PI.sqrt().recip();
        GaussHermite {
            nodes: self.nodes.iter().map(|x| x * std::f64::consts::SQRT_2).collect(),
            weights: self.weights.iter().map(|w| w * scale).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Physicists' rule for `∫ f(x) e^{-x²} dx`, nodes in ascending order.
///
/// Roots are found by Newton iteration on the orthonormal Hermite recurrence,
/// which stays in floating-point range for every supported order.
pub fn gauss_hermite(n_nodes: usize) -> Result<GaussHermite> {
    if n_nodes == 0 || n_nodes > MAX_NODES {
        return Err(Error::param(
            "n_nodes",
            format!("must be in 1..={MAX_NODES}, got {n_nodes}"),
        ));
    }
    let n = n_nodes;
    let nf = n as f64;
    // π^{-1/4}
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let half = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..half {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, p2) = hermite_orthonormal(n, z, pim4);
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, p2) = hermite_orthonormal(n, z, pim4);
        pp = if p2 != 0.0 { (2.0 * nf).sqrt() * p2 } else { pp };
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    x.reverse();
    w.reverse();
    Ok(GaussHermite {
        nodes: x,
        weights: w,
    })
}

/// Returns (p_n(z), p_{n-1}(z)) of the orthonormal Hermite family.
fn hermite_orthonormal(n: usize, z: f64, pim4: f64) -> (f64, f64) {
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, p2)
}
