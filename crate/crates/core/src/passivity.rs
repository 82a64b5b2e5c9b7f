//! The canonical passive operator `B = -ln rho_0`, ordering functions, and
//! the `sign(alpha) * B^alpha` family.
//!
//! All deformation machinery downstream works on *value vectors*: the
//! eigenvalues of `B` and of a commuting observable `A` listed in one common
//! eigenbasis. [`JointSpectrum`] builds that basis, refining degenerate
//! population clusters so `A` is diagonal too (the construction is exact for
//! `[A, rho_0] = 0` and rejects observables that do not commute).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::qstate::{eigh, CMat, Density, Hermitian};

/// Smallest population treated as nonzero when taking logs.
const P_FLOOR: f64 = 1e-300;

/// Spectrum of `rho_0` with its passive operator values.
///
/// Entries are sorted by descending population, i.e. ascending
/// `b = -ln p` — the passive order. `basis` column `k` carries the
/// eigenvector of `populations[k]`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub basis: CMat,
    pub populations: Vec<f64>,
    /// `-ln p`, including the normalization: for a product of Gibbs states
    /// this equals `sum_k beta_k H_k + ln Z` on the diagonal.
    pub b: Vec<f64>,
}

impl Spectrum {
    pub fn from_state(rho: &Density) -> Self {
        let eig = eigh(rho.matrix());
        let n = eig.values.len();
        // eigh returns ascending eigenvalues; reverse for descending p.
        let mut basis = CMat::zeros(n, n);
        let mut populations = Vec::with_capacity(n);
        for (dst, src) in (0..n).rev().enumerate() {
            basis.set_column(dst, &eig.vectors.column(src));
            populations.push(eig.values[src].max(0.0));
        }
        let b = populations.iter().map(|&p| -(p.max(P_FLOOR)).ln()).collect();
        Self { basis, populations, b }
    }

    pub fn dim(&self) -> usize {
        self.populations.len()
    }
}

/// Common eigenbasis data for `(rho_0, A)` with `[A, rho_0] = 0`.
#[derive(Debug, Clone)]
pub struct JointSpectrum {
    pub basis: CMat,
    pub populations: Vec<f64>,
    pub b: Vec<f64>,
    pub a: Vec<f64>,
}

/// Build the joint eigenbasis of a state and a commuting observable.
///
/// Within each degenerate population cluster the basis is rotated to
/// diagonalize the observable's block; off-block leakage beyond `tol`
/// means the operators do not commute and is rejected.
pub fn joint_spectrum(rho: &Density, a: &Hermitian, tol: f64) -> Result<JointSpectrum> {
    if rho.dim() != a.dim() {
        return Err(Error::Dimension("state/observable dimension mismatch".into()));
    }
    let spec = Spectrum::from_state(rho);
    let n = spec.dim();
    let scale = a
        .matrix()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
        .max(1.0);

    // Cluster indices with equal populations (relative tolerance).
    let p_scale = spec.populations[0].max(1e-15);
    let mut clusters: Vec<(usize, usize)> = Vec::new(); // [start, end)
    let mut start = 0usize;
    for i in 1..=n {
        if i == n || (spec.populations[i] - spec.populations[start]).abs() > 1e-10 * p_scale {
            clusters.push((start, i));
            start = i;
        }
    }

    let rotated = spec.basis.adjoint() * a.matrix() * &spec.basis;
    // Commutation check: elements joining different clusters must vanish.
    let mut cluster_of = vec![0usize; n];
    for (ci, &(s, e)) in clusters.iter().enumerate() {
        for k in s..e {
            cluster_of[k] = ci;
        }
    }
    for i in 0..n {
        for j in 0..n {
            if cluster_of[i] != cluster_of[j] && rotated[(i, j)].norm() > tol * scale {
                return Err(Error::Validation(format!(
                    "observable does not commute with the state (leak {:.3e} between \
                     population clusters)",
                    rotated[(i, j)].norm()
                )));
            }
        }
    }

    let mut basis = spec.basis.clone();
    let mut a_vals = vec![0.0f64; n];
    for &(s, e) in &clusters {
        let w = e - s;
        if w == 1 {
            a_vals[s] = rotated[(s, s)].re;
            continue;
        }
        let block = DMatrix::from_fn(w, w, |i, j| rotated[(s + i, s + j)]);
        let be = eigh(&block);
        // New columns: basis[:, s..e] * block eigenvectors.
        let old: Vec<_> = (s..e).map(|k| basis.column(k).into_owned()).collect();
        for k in 0..w {
            let mut col = nalgebra::DVector::zeros(n);
            for l in 0..w {
                col += &old[l] * be.vectors[(l, k)];
            }
            basis.set_column(s + k, &col);
            a_vals[s + k] = be.values[k];
        }
    }

    Ok(JointSpectrum {
        basis,
        populations: spec.populations.clone(),
        b: spec.b,
        a: a_vals,
    })
}

/// Ordering function `chi(A, B) = tr(AB) - lambda_A_down . lambda_B_down`.
///
/// Always `<= 0` (von Neumann trace inequality), with equality iff the two
/// operators share an eigenbasis ordering ("same ordering").
pub fn chi(a: &Hermitian, b: &Hermitian) -> f64 {
    let tr = trace_product(a.matrix(), b.matrix());
    let mut la = a.eigh().values;
    let mut lb = b.eigh().values;
    la.reverse();
    lb.reverse();
    tr - dot(&la, &lb)
}

/// Reverse ordering function
/// `chi_du(A, B) = tr(AB) - lambda_A_down . lambda_B_up`, always `>= 0`;
/// zero iff the operators are reverse-ordered. Global passivity of `A`
/// w.r.t. `rho_0` is exactly `chi_du(A, rho_0) = 0`.
pub fn chi_down_up(a: &Hermitian, b: &Hermitian) -> f64 {
    let tr = trace_product(a.matrix(), b.matrix());
    let mut la = a.eigh().values;
    let lb = b.eigh().values;
    la.reverse();
    tr - dot(&la, &lb)
}

fn trace_product(a: &CMat, b: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Is the value vector `b` passive with respect to populations `p`?
/// (No pair may have strictly larger `b` together with strictly larger `p`.)
pub fn values_are_passive(b: &[f64], p: &[f64], tol_b: f64, tol_p: f64) -> bool {
    let n = b.len();
    for i in 0..n {
        for j in 0..n {
            if b[i] - b[j] > tol_b && p[i] - p[j] > tol_p {
                return false;
            }
        }
    }
    true
}

/// Eigenvalues of `sign(alpha) * B^alpha` from the eigenvalues of `B`.
///
/// `B` must be the full `-ln rho_0` (nonnegative); fractional or negative
/// powers of negative levels are a domain error, as is `alpha <= 0` on a
/// zero level.
pub fn b_alpha_values(b: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if alpha == 0.0 {
        return Err(Error::Domain("alpha must be nonzero".into()));
    }
    let sgn = alpha.signum();
    b.iter()
        .map(|&x| {
            if x < -1e-12 {
                return Err(Error::Domain(format!(
                    "B level {x} is negative; pass the full -ln rho_0 spectrum"
                )));
            }
            let x = x.max(0.0);
            if x == 0.0 && alpha < 0.0 {
                return Err(Error::Domain("negative power of a zero level".into()));
            }
            Ok(sgn * x.powf(alpha))
        })
        .collect()
}

/// `Delta<O> = tr[O (rho_f - rho_0)]` for an operator given by values in a
/// basis: `sum_i o_i (pf_i - p0_i)` where the populations are taken in that
/// basis.
pub fn delta_expectation(values: &[f64], p0: &[f64], pf: &[f64]) -> f64 {
    values
        .iter()
        .zip(p0.iter().zip(pf))
        .map(|(o, (a, b))| o * (b - a))
        .sum()
}
