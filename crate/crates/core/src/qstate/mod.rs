//! Dense quantum-state primitives.
//!
//! Everything works on `DMatrix<Complex64>`. Setups here are small (a few
//! spins or few-level systems, total dimension rarely above a hundred), so
//! dense eigendecompositions are the right tool and no sparse machinery is
//! needed.

mod random;

pub use random::{block_haar_unitary, haar_unitary, rng_from_seed, Mixture};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative scale used by hermiticity / trace / positivity validations.
pub const VALIDATION_TOL: f64 = 1e-9;

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Frobenius-style check that `m` equals its adjoint within `tol * scale`.
pub fn is_hermitian(m: &CMat, tol: f64) -> bool {
    if m.nrows() != m.ncols() {
        return false;
    }
    let scale = max_abs(m).max(1.0);
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst <= tol * scale
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`.
    pub vectors: CMat,
}

/// A validated Hermitian operator.
#[derive(Debug, Clone)]
pub struct Hermitian {
    mat: CMat,
}

impl Hermitian {
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::Dimension(format!(
                "operator must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if !is_hermitian(&mat, VALIDATION_TOL) {
            return Err(Error::Validation("operator is not Hermitian".into()));
        }
        Ok(Self { mat })
    }

    /// Build from real diagonal values.
    pub fn from_diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = CMat::zeros(n, n);
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = C64::new(*v, 0.0);
        }
        Self { mat: m }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    /// Eigenvalues and eigenvectors, eigenvalues sorted ascending.
    pub fn eigh(&self) -> Eigh {
        eigh(&self.mat)
    }

    pub fn expectation(&self, rho: &Density) -> f64 {
        expectation(&self.mat, rho.matrix())
    }

    /// Diagonal of `V^dag M V` for a given basis `V` (columns).
    pub fn diagonal_in(&self, basis: &CMat) -> Vec<f64> {
        diagonal_in_basis(&self.mat, basis)
    }
}

/// Eigendecomposition for a raw Hermitian matrix (ascending eigenvalues).
pub fn eigh(mat: &CMat) -> Eigh {
    let se = mat.clone().symmetric_eigen();
    let n = mat.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&k| se.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    Eigh { values, vectors }
}

/// `tr(M rho)` for Hermitian `M`; imaginary part is discarded (it vanishes
/// analytically and is used as an internal consistency signal).
pub fn expectation(m: &CMat, rho: &CMat) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..m.nrows() {
        for k in 0..m.ncols() {
            acc += m[(i, k)] * rho[(k, i)];
        }
    }
    acc.re
}

fn diagonal_in_basis(m: &CMat, basis: &CMat) -> Vec<f64> {
    let rotated = basis.adjoint() * m * basis;
    (0..rotated.nrows()).map(|i| rotated[(i, i)].re).collect()
}

/// A validated density matrix (Hermitian, unit trace, positive
/// semidefinite within tolerance).
#[derive(Debug, Clone)]
pub struct Density {
    mat: CMat,
}

impl Density {
    pub fn new(mat: CMat) -> Result<Self> {
        if !is_hermitian(&mat, VALIDATION_TOL) {
            return Err(Error::Validation("density matrix is not Hermitian".into()));
        }
        let tr: f64 = (0..mat.nrows()).map(|i| mat[(i, i)].re).sum();
        if (tr - 1.0).abs() > 1e-7 {
            return Err(Error::Validation(format!(
                "density matrix trace is {tr}, expected 1"
            )));
        }
        let eig = eigh(&mat);
        if eig.values.iter().any(|&v| v < -1e-8) {
            return Err(Error::Validation(format!(
                "density matrix has negative eigenvalue {}",
                eig.values[0]
            )));
        }
        Ok(Self { mat })
    }

    /// Diagonal state from a population vector (must sum to 1).
    pub fn from_populations(p: &[f64]) -> Result<Self> {
        if p.iter().any(|&x| x < -1e-12) {
            return Err(Error::Validation("negative population".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-7 {
            return Err(Error::Validation(format!(
                "populations sum to {s}, expected 1"
            )));
        }
        let n = p.len();
        let mut m = CMat::zeros(n, n);
        for (i, v) in p.iter().enumerate() {
            m[(i, i)] = C64::new(v.max(0.0) / s, 0.0);
        }
        Ok(Self { mat: m })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn populations(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).collect()
    }

    /// `U rho U^dag`, unchecked beyond shape.
    pub fn evolved(&self, u: &CMat) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::Dimension("unitary/state dimension mismatch".into()));
        }
        let m = u * &self.mat * u.adjoint();
        Ok(Self { mat: m })
    }

    /// Skip validation for states produced internally by CPTP maps.
    pub(crate) fn from_raw(mat: CMat) -> Self {
        Self { mat }
    }
}

/// Gibbs state of `h` at inverse temperature `beta`, together with
/// `ln Z` (the true log partition function, not shifted).
///
/// Computed in the eigenbasis with the spectrum shifted by its minimum so
/// the exponentials cannot overflow; the shift is restored in `ln Z`.
pub fn thermal_state(h: &Hermitian, beta: f64) -> Result<(Density, f64)> {
    if !beta.is_finite() || beta < 0.0 {
        return Err(Error::Domain(format!("inverse temperature {beta}")));
    }
    let eig = h.eigh();
    let emin = eig.values[0];
    let weights: Vec<f64> = eig.values.iter().map(|&e| (-beta * (e - emin)).exp()).collect();
    let z_shifted: f64 = weights.iter().sum();
    let ln_z = z_shifted.ln() - beta * emin;
    let n = h.dim();
    let mut m = CMat::zeros(n, n);
    for k in 0..n {
        let p = weights[k] / z_shifted;
        let vk = eig.vectors.column(k);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += vk[i] * vk[j].conj() * C64::new(p, 0.0);
            }
        }
    }
    Ok((Density::new(m)?, ln_z))
}

/// Kronecker product over slots, slot 0 = leftmost factor (most
/// significant index of the composite basis).
pub fn kron_all(factors: &[&CMat]) -> CMat {
    assert!(!factors.is_empty());
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = acc.kronecker(f);
    }
    acc
}

/// Embed `op` (acting on `dims[slot]`) into the full product space.
pub fn embed(op: &CMat, dims: &[usize], slot: usize) -> Result<CMat> {
    if slot >= dims.len() {
        return Err(Error::Dimension(format!(
            "slot {slot} out of range for {} subsystems",
            dims.len()
        )));
    }
    if op.nrows() != dims[slot] {
        return Err(Error::Dimension(format!(
            "operator dim {} does not match subsystem dim {}",
            op.nrows(),
            dims[slot]
        )));
    }
    let factors: Vec<CMat> = dims
        .iter()
        .enumerate()
        .map(|(k, &d)| if k == slot { op.clone() } else { CMat::identity(d, d) })
        .collect();
    let refs: Vec<&CMat> = factors.iter().collect();
    Ok(kron_all(&refs))
}

/// Partial trace keeping the subsystems listed in `keep` (ascending slot
/// order preserved).
pub fn partial_trace(rho: &CMat, dims: &[usize], keep: &[usize]) -> Result<CMat> {
    let total: usize = dims.iter().product();
    if rho.nrows() != total {
        return Err(Error::Dimension(format!(
            "state dim {} does not match subsystem dims (product {})",
            rho.nrows(),
            total
        )));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&k| k >= dims.len()) {
        return Err(Error::Dimension("keep slot out of range".into()));
    }
    let kept_dim: usize = keep.iter().map(|&k| dims[k]).product();
    let n_slots = dims.len();

    // Mixed-radix digits of a composite index, slot 0 most significant.
    let digits = |mut idx: usize| -> Vec<usize> {
        let mut d = vec![0usize; n_slots];
        for s in (0..n_slots).rev() {
            d[s] = idx % dims[s];
            idx /= dims[s];
        }
        d
    };
    let kept_index = |d: &[usize]| -> usize {
        let mut idx = 0usize;
        for &s in &keep {
            idx = idx * dims[s] + d[s];
        }
        idx
    };

    let mut out = CMat::zeros(kept_dim, kept_dim);
    for i in 0..total {
        let di = digits(i);
        for j in 0..total {
            let dj = digits(j);
            // Traced-out slots must match between bra and ket.
            if (0..n_slots)
                .filter(|s| !keep.contains(s))
                .all(|s| di[s] == dj[s])
            {
                out[(kept_index(&di), kept_index(&dj))] += rho[(i, j)];
            }
        }
    }
    Ok(out)
}

/// `exp(-i H t)` through the eigendecomposition of `h`.
pub fn unitary_from_hamiltonian(h: &Hermitian, t: f64) -> CMat {
    let eig = h.eigh();
    let n = h.dim();
    let mut phases = CMat::zeros(n, n);
    for k in 0..n {
        let ph = -eig.values[k] * t;
        phases[(k, k)] = C64::new(ph.cos(), ph.sin());
    }
    &eig.vectors * phases * eig.vectors.adjoint()
}

/// Von Neumann entropy in nats; zero eigenvalues contribute zero.
pub fn von_neumann_entropy(rho: &CMat) -> f64 {
    let eig = eigh(rho);
    -eig.values
        .iter()
        .filter(|&&p| p > 1e-15)
        .map(|&p| p * p.ln())
        .sum::<f64>()
}

/// Quantum relative entropy `D(x || y) = tr[x ln x] - tr[x ln y]` in nats.
///
/// Requires `supp(x) ⊆ supp(y)`; a support violation beyond tolerance is a
/// domain error rather than silently returning infinity.
pub fn relative_entropy(x: &CMat, y: &CMat) -> Result<f64> {
    let ex = eigh(x);
    let ey = eigh(y);
    let tr_x_ln_x: f64 = ex
        .values
        .iter()
        .filter(|&&p| p > 1e-15)
        .map(|&p| p * p.ln())
        .sum();
    // tr[x ln y] via |<xi|yj>|^2 overlaps.
    let overlaps = ex.vectors.adjoint() * &ey.vectors;
    let mut tr_x_ln_y = 0.0;
    for i in 0..ex.values.len() {
        let pi = ex.values[i];
        if pi <= 1e-15 {
            continue;
        }
        for j in 0..ey.values.len() {
            let w = overlaps[(i, j)].norm_sqr();
            if w <= 1e-15 {
                continue;
            }
            let qj = ey.values[j];
            if qj <= 1e-15 {
                return Err(Error::Domain(
                    "relative entropy: first argument leaves the support of the second".into(),
                ));
            }
            tr_x_ln_y += pi * w * qj.ln();
        }
    }
    Ok(tr_x_ln_x - tr_x_ln_y)
}

/// Mutual information `S(A) + S(B) - S(AB)` across the bipartition
/// `keep_a` / complement.
pub fn mutual_information(rho: &CMat, dims: &[usize], keep_a: &[usize]) -> Result<f64> {
    let keep_b: Vec<usize> = (0..dims.len()).filter(|s| !keep_a.contains(s)).collect();
    let ra = partial_trace(rho, dims, keep_a)?;
    let rb = partial_trace(rho, dims, &keep_b)?;
    Ok(von_neumann_entropy(&ra) + von_neumann_entropy(&rb) - von_neumann_entropy(rho))
}
