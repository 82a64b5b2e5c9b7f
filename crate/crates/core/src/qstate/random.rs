//! Seeded randomness: Haar unitaries, block-restricted unitaries, and
//! random mixtures of unitaries (the channel class all bounds are stated
//! for). One seed drives everything so runs are reproducible.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{CMat, Density, C64};
use crate::error::{Error, Result};

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard complex Gaussian via Box-Muller.
fn gaussian_c64(rng: &mut ChaCha8Rng) -> C64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    let r = (-2.0 * u1.ln()).sqrt();
    let th = 2.0 * std::f64::consts::PI * u2;
    Complex64::new(r * th.cos(), r * th.sin()) / 2f64.sqrt()
}

/// Haar-distributed unitary: QR of a complex Ginibre matrix with the
/// phases of R's diagonal folded back into Q (without the phase fix the
/// distribution is not Haar).
pub fn haar_unitary(dim: usize, rng: &mut ChaCha8Rng) -> CMat {
    let g = DMatrix::from_fn(dim, dim, |_, _| gaussian_c64(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase.conj();
        }
    }
    q
}

/// Unitary acting as independent Haar blocks on the given index groups and
/// as the identity elsewhere. Groups must be disjoint.
pub fn block_haar_unitary(dim: usize, blocks: &[Vec<usize>], rng: &mut ChaCha8Rng) -> Result<CMat> {
    let mut seen = vec![false; dim];
    for b in blocks {
        for &i in b {
            if i >= dim {
                return Err(Error::Dimension(format!("block index {i} out of range")));
            }
            if seen[i] {
                return Err(Error::Validation(format!("index {i} appears in two blocks")));
            }
            seen[i] = true;
        }
    }
    let mut u = CMat::identity(dim, dim);
    for b in blocks {
        if b.len() < 2 {
            continue;
        }
        let ub = haar_unitary(b.len(), rng);
        for (bi, &i) in b.iter().enumerate() {
            for (bj, &j) in b.iter().enumerate() {
                u[(i, j)] = ub[(bi, bj)];
            }
        }
    }
    Ok(u)
}

/// A mixture of unitaries: `rho -> sum_k w_k U_k rho U_k^dag`.
///
/// This is exactly the channel class for which global passivity holds, so
/// it is the workhorse of every soundness check in the suite.
#[derive(Debug, Clone)]
pub struct Mixture {
    terms: Vec<(f64, CMat)>,
}

impl Mixture {
    pub fn new(terms: Vec<(f64, CMat)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::Validation("mixture needs at least one term".into()));
        }
        let s: f64 = terms.iter().map(|(w, _)| *w).sum();
        if terms.iter().any(|(w, _)| *w < -1e-12) || (s - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "mixture weights must be a distribution (sum {s})"
            )));
        }
        Ok(Self { terms })
    }

    pub fn unitary(u: CMat) -> Self {
        Self { terms: vec![(1.0, u)] }
    }

    /// `n_terms` Haar unitaries with Dirichlet-ish random weights.
    pub fn random(dim: usize, n_terms: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut ws: Vec<f64> = (0..n_terms).map(|_| -(rng.random::<f64>().max(1e-300)).ln()).collect();
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
        let terms = ws
            .into_iter()
            .map(|w| (w, haar_unitary(dim, rng)))
            .collect();
        Self { terms }
    }

    /// Random mixture of block-respecting unitaries (all terms act within
    /// the same invariant manifolds).
    pub fn random_in_blocks(
        dim: usize,
        blocks: &[Vec<usize>],
        n_terms: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self> {
        let mut ws: Vec<f64> = (0..n_terms).map(|_| -(rng.random::<f64>().max(1e-300)).ln()).collect();
        let s: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= s);
        let mut terms = Vec::with_capacity(n_terms);
        for w in ws {
            terms.push((w, block_haar_unitary(dim, blocks, rng)?));
        }
        Ok(Self { terms })
    }

    pub fn terms(&self) -> &[(f64, CMat)] {
        &self.terms
    }

    pub fn apply(&self, rho: &Density) -> Result<Density> {
        let n = rho.dim();
        let mut out = CMat::zeros(n, n);
        for (w, u) in &self.terms {
            if u.nrows() != n {
                return Err(Error::Dimension("mixture term dimension mismatch".into()));
            }
            out += (u * rho.matrix() * u.adjoint()).scale(*w);
        }
        Ok(Density::from_raw(out))
    }
}
