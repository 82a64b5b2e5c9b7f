//! The inequality hierarchy below the Clausius inequality: truncated CI,
//! binary CI, and majorization, plus spectral coarse-graining.
//!
//! Ordering of layers (least to most sensitive, most to least physical):
//! CI -> truncated CI -> binary CI -> majorization. Every truncated
//! inequality is a convex combination of binary ones, so a truncated
//! violation implies at least one binary violation.
//!
//! All functions take populations *in the eigenbasis of B* (equivalently,
//! of `rho_0`), initial populations sorted or unsorted — sorting is done
//! internally where the definition requires it.

use crate::error::{Error, Result};

/// Indices of the `l` highest-`b` levels (the least populated ones),
/// deterministic under ties: sort by `(b desc, index asc)`.
fn top_l_indices(b: &[f64], l: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..b.len()).collect();
    idx.sort_by(|&i, &j| b[j].partial_cmp(&b[i]).unwrap().then(i.cmp(&j)));
    idx.truncate(l);
    idx
}

/// Values of the truncated operator `B^(l)`: the `l` highest levels keep
/// their `b` value, all others are lowered to zero.
///
/// Lowering a level to the bottom is a legal deformation only if it lands
/// below every remaining level, so the full, nonnegative `-ln rho_0`
/// spectrum is required here (the `ln Z` part must not be dropped).
pub fn truncated_values(b: &[f64], l: usize) -> Result<Vec<f64>> {
    let n = b.len();
    if l == 0 || l > n {
        return Err(Error::Dimension(format!("truncation level {l} out of 1..={n}")));
    }
    if b.iter().any(|&x| x < -1e-12) {
        return Err(Error::Domain(
            "truncation needs the nonnegative -ln rho_0 spectrum (ln Z included)".into(),
        ));
    }
    let mut out = vec![0.0; n];
    for i in top_l_indices(b, l) {
        out[i] = b[i].max(0.0);
    }
    Ok(out)
}

/// Values of the binary operator `B_Bin^(l)`: the projector onto the `l`
/// highest-`b` levels.
pub fn binary_values(b: &[f64], l: usize) -> Result<Vec<f64>> {
    let n = b.len();
    if l == 0 || l > n {
        return Err(Error::Dimension(format!("binary level {l} out of 1..={n}")));
    }
    let mut out = vec![0.0; n];
    for i in top_l_indices(b, l) {
        out[i] = 1.0;
    }
    Ok(out)
}

/// `<B_Bin^(l)>_0` equals the sum of the `l` smallest initial populations —
/// the ascending partial sum that also appears in majorization.
pub fn ascending_partial_sum(p: &[f64], l: usize) -> f64 {
    let mut s = p.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.iter().take(l).sum()
}

/// Slacks `Delta<B^(l)>` for every `l = 1..=N`.
pub fn truncated_family_slacks(b: &[f64], p0: &[f64], pf: &[f64]) -> Result<Vec<f64>> {
    (1..=b.len())
        .map(|l| {
            let v = truncated_values(b, l)?;
            Ok(crate::passivity::delta_expectation(&v, p0, pf))
        })
        .collect()
}

/// Slacks `Delta<B_Bin^(l)>` for every `l = 1..=N`.
pub fn binary_family_slacks(b: &[f64], p0: &[f64], pf: &[f64]) -> Result<Vec<f64>> {
    (1..=b.len())
        .map(|l| {
            let v = binary_values(b, l)?;
            Ok(crate::passivity::delta_expectation(&v, p0, pf))
        })
        .collect()
}

/// Majorization report: final populations must majorize… more precisely,
/// every ascending partial sum must not decrease,
/// `sum_{j<=l} p0_up_j <= sum_{j<=l} pf_up_j` for all `l`.
#[derive(Debug, Clone)]
pub struct MajorizationReport {
    pub ok: bool,
    /// Most negative slack over `l` and the `l` attaining it.
    pub worst_slack: f64,
    pub worst_l: usize,
}

pub fn majorization_check(p0: &[f64], pf: &[f64], tol: f64) -> MajorizationReport {
    let n = p0.len();
    let mut a0 = p0.to_vec();
    let mut af = pf.to_vec();
    a0.sort_by(|a, b| a.partial_cmp(b).unwrap());
    af.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (mut s0, mut sf) = (0.0f64, 0.0f64);
    let mut worst = f64::INFINITY;
    let mut worst_l = 0;
    for l in 0..n {
        s0 += a0[l];
        sf += af[l];
        let slack = sf - s0;
        if slack < worst {
            worst = slack;
            worst_l = l + 1;
        }
    }
    MajorizationReport { ok: worst >= -tol, worst_slack: worst, worst_l }
}

/// A coarse-grained operator: one value per cluster of unresolvable levels.
#[derive(Debug, Clone)]
pub struct CoarseGrained {
    /// Representative value `q_n` per cluster (midpoint of the cluster's
    /// `b` range; any order-preserving choice is equally valid).
    pub q: Vec<f64>,
    /// Cluster id per original level.
    pub cluster_of: Vec<usize>,
}

/// Witness returned when clusters overlap and no coarse-graining exists.
#[derive(Debug, Clone)]
pub struct OverlapWitness {
    pub cluster_a: usize,
    pub cluster_b: usize,
    /// `(level in a, level in b)` with interleaved `b` values.
    pub level_a: usize,
    pub level_b: usize,
}

/// Deform clustered `b` values to a cluster-constant operator.
///
/// Allowed exactly when the clusters' value ranges do not overlap; an
/// overlapping pair is reported via a witness in the error message (the
/// deformation would need a forbidden level crossing).
pub fn coarse_grain(b: &[f64], clusters: &[Vec<usize>], rel_tol: f64) -> Result<CoarseGrained> {
    let n = b.len();
    let mut seen = vec![false; n];
    for (ci, c) in clusters.iter().enumerate() {
        if c.is_empty() {
            return Err(Error::Validation(format!("cluster {ci} is empty")));
        }
        for &i in c {
            if i >= n {
                return Err(Error::Dimension(format!("cluster {ci} references level {i} out of range")));
            }
            if seen[i] {
                return Err(Error::Validation(format!("level {i} appears in two clusters")));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Validation("clusters must cover every level".into()));
    }
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let tol = rel_tol * scale;
    let ranges: Vec<(f64, f64, usize, usize)> = clusters
        .iter()
        .map(|c| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            let (mut ilo, mut ihi) = (c[0], c[0]);
            for &i in c {
                if b[i] < lo {
                    lo = b[i];
                    ilo = i;
                }
                if b[i] > hi {
                    hi = b[i];
                    ihi = i;
                }
            }
            (lo, hi, ilo, ihi)
        })
        .collect();
    for x in 0..clusters.len() {
        for y in 0..clusters.len() {
            if x == y {
                continue;
            }
            let (lo_x, hi_x, _, ihi_x) = ranges[x];
            let (lo_y, hi_y, ilo_y, _) = ranges[y];
            // Overlap: neither strictly below nor strictly above.
            if hi_x > lo_y + tol && hi_y > lo_x + tol {
                return Err(Error::Validation(format!(
                    "clusters {x} and {y} overlap: level {} (b = {}) interleaves with level {} (b = {}); \
                     coarse-graining would require a level crossing",
                    ihi_x, b[ihi_x], ilo_y, b[ilo_y]
                )));
            }
        }
    }
    let mut cluster_of = vec![0usize; n];
    for (ci, c) in clusters.iter().enumerate() {
        for &i in c {
            cluster_of[i] = ci;
        }
    }
    let q: Vec<f64> = ranges.iter().map(|&(lo, hi, _, _)| 0.5 * (lo + hi)).collect();
    Ok(CoarseGrained { q, cluster_of })
}

impl CoarseGrained {
    /// `<B^CG>` under level populations `p`.
    pub fn expectation(&self, p: &[f64]) -> f64 {
        p.iter()
            .enumerate()
            .map(|(i, &pi)| self.q[self.cluster_of[i]] * pi)
            .sum()
    }
}
