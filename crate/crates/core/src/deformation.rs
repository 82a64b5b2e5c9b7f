//! Passivity deformation: threshold scans for `B(xi) = B + xi*A`,
//! conservation-restricted variants, bound-saturating subspaces, and the
//! corollaries for ultra-cold baths, polarization erasure, athermal passive
//! environments, and classically correlated initial states.
//!
//! All functions work on value vectors in a common eigenbasis (see
//! [`crate::passivity::JointSpectrum`]). `B(xi)` stays passive until two
//! levels with different `A` values cross; the scan returns the largest
//! window `[xi_minus, xi_plus]` containing 0. Pairs degenerate in `B` or in
//! `A` never change relative order and are excluded — degeneracies present
//! at `xi = 0` carry equal populations, so splitting them is harmless.

use crate::error::{Error, Result};
use crate::qstate::CMat;

/// Invariant manifolds of a Hamiltonian in a given basis: connected
/// components of its off-diagonal coupling graph. States in different
/// components never exchange population under `exp(-iHt)`, so the
/// component labels feed directly into the restricted threshold scan.
pub fn invariant_partition(h: &CMat, rel_tol: f64) -> Vec<usize> {
    let n = h.nrows();
    let scale = h.iter().map(|z| z.norm()).fold(0.0f64, f64::max).max(1.0);
    let tol = rel_tol * scale;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut r = i;
        while parent[r] != r {
            r = parent[r];
        }
        let mut k = i;
        while parent[k] != r {
            let next = parent[k];
            parent[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if h[(i, j)].norm() > tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }
    let mut label = vec![0usize; n];
    for i in 0..n {
        label[i] = find(&mut parent, i);
    }
    label
}

/// Result of a threshold scan. A side without any crossing is `None`
/// (deformation unbounded in that direction).
#[derive(Debug, Clone, PartialEq)]
pub struct XiScan {
    pub minus: Option<f64>,
    pub plus: Option<f64>,
    /// Index pair realizing each finite threshold (lower-b index first).
    pub minus_pair: Option<(usize, usize)>,
    pub plus_pair: Option<(usize, usize)>,
}

impl XiScan {
    /// Is `xi` inside the passive window?
    pub fn admits(&self, xi: f64) -> bool {
        self.minus.map_or(true, |m| xi >= m) && self.plus.map_or(true, |p| xi <= p)
    }
}

fn scan_tols(b: &[f64], a: &[f64], rel: f64) -> (f64, f64) {
    let sb = b.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let sa = a.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    (rel * sb, rel * sa)
}

/// Scan all level pairs for the first order-changing crossing of
/// `b + xi*a`.
///
/// `partition`, when given, assigns each index to an invariant manifold of
/// the dynamics (same id = same manifold); only pairs inside one manifold
/// can ever exchange population, so only those constrain the thresholds.
/// This is how conservation laws sharpen the bounds.
pub fn xi_thresholds(
    b: &[f64],
    a: &[f64],
    partition: Option<&[usize]>,
    rel_tol: f64,
) -> Result<XiScan> {
    let n = b.len();
    if a.len() != n {
        return Err(Error::Dimension("b/a value vectors differ in length".into()));
    }
    if let Some(p) = partition {
        if p.len() != n {
            return Err(Error::Dimension("partition length mismatch".into()));
        }
    }
    let (tol_b, tol_a) = scan_tols(b, a, rel_tol);
    let mut minus: Option<f64> = None;
    let mut plus: Option<f64> = None;
    let mut minus_pair = None;
    let mut plus_pair = None;
    for i in 0..n {
        for j in 0..n {
            if let Some(p) = partition {
                if p[i] != p[j] {
                    continue;
                }
            }
            let db = b[j] - b[i];
            if db <= tol_b {
                continue; // want strictly b_j > b_i; degenerate pairs excluded
            }
            let da = a[i] - a[j];
            if da.abs() <= tol_a {
                continue; // A-degenerate pairs never cross
            }
            let xi = db / da;
            if xi > 0.0 {
                if plus.map_or(true, |p| xi < p) {
                    plus = Some(xi);
                    plus_pair = Some((i, j));
                }
            } else if minus.map_or(true, |m| xi > m) {
                minus = Some(xi);
                minus_pair = Some((i, j));
            }
        }
    }
    Ok(XiScan { minus, plus, minus_pair, plus_pair })
}

/// Deformation-bound slack `Delta<B> + xi * Delta<A>`; nonnegative for any
/// mixture of unitaries whenever `xi` is inside the passive window.
pub fn deformation_slack(delta_b: f64, delta_a: f64, xi: f64) -> f64 {
    delta_b + xi * delta_a
}

/// Groups of indices that become degenerate in `b + xi*a` at the given
/// `xi` (within one manifold if a partition is supplied). Only nontrivial
/// groups (size >= 2) are returned; these are the subspaces on which
/// bound-saturating processes act.
pub fn degenerate_groups_at(
    b: &[f64],
    a: &[f64],
    xi: f64,
    partition: Option<&[usize]>,
    rel_tol: f64,
) -> Vec<Vec<usize>> {
    let n = b.len();
    let vals: Vec<f64> = (0..n).map(|i| b[i] + xi * a[i]).collect();
    let scale = vals.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let tol = rel_tol * scale;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| vals[x].partial_cmp(&vals[y]).unwrap());
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = vec![order[0]];
    for w in 1..n {
        let i = order[w];
        if (vals[i] - vals[current[0]]).abs() <= tol {
            current.push(i);
        } else {
            if current.len() >= 2 {
                groups.push(std::mem::take(&mut current));
            }
            current = vec![i];
        }
    }
    if current.len() >= 2 {
        groups.push(current);
    }
    // Split by manifold: states in different manifolds cannot mix.
    if let Some(p) = partition {
        let mut refined = Vec::new();
        for g in groups {
            let mut by_part: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
            for i in g {
                by_part.entry(p[i]).or_default().push(i);
            }
            for (_, v) in by_part {
                if v.len() >= 2 {
                    refined.push(v);
                }
            }
        }
        refined
    } else {
        groups
    }
}

/// Smallest gap between consecutive distinct levels.
pub fn min_gap(levels: &[f64]) -> Result<f64> {
    let mut s = levels.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let scale = s.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
    let mut best = f64::INFINITY;
    for w in s.windows(2) {
        let g = w[1] - w[0];
        if g > 1e-12 * scale {
            best = best.min(g);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Domain("spectrum is fully degenerate; no gap".into()))
    }
}

/// Full spectral span `max - min`.
pub fn span(levels: &[f64]) -> f64 {
    let mx = levels.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mn = levels.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    mx - mn
}

/// Ultra-cold boundary `beta_c* = beta_h * omega_h_max / omega_c_min`:
/// at or beyond it the hot ladders cannot overlap neighbouring cold floors
/// and no channel can cool the cold bath.
pub fn beta_c_star(beta_h: f64, omega_h_max: f64, omega_c_min: f64) -> f64 {
    beta_h * omega_h_max / omega_c_min
}

/// Slack of the temperature-independent "no-overlap" Clausius form
/// `Delta<H_c>/omega_c_min + Delta<H_h>/omega_h_max >= 0`
/// (valid for `beta_c >= beta_c*`).
pub fn ci_no_overlap_slack(d_hc: f64, d_hh: f64, omega_c_min: f64, omega_h_max: f64) -> f64 {
    d_hc / omega_c_min + d_hh / omega_h_max
}

/// Hand formula for the erasure deformation threshold: splitting a
/// degenerate hot pair at `E` is passive until the nearer of the two
/// neighbouring levels is reached, `nu_plus = min(E_up - E, E - E_down)`.
/// Valid in the non-overlapping-ladders regime; the generic scan
/// ([`xi_thresholds`]) reproduces it and stays correct outside the regime.
pub fn erasure_nu_plus_formula(hot_levels: &[f64], m: usize) -> Result<f64> {
    let n = hot_levels.len();
    if m + 1 >= n {
        return Err(Error::Dimension("degenerate pair index out of range".into()));
    }
    let e = hot_levels[m];
    if (hot_levels[m + 1] - e).abs() > 1e-12 * e.abs().max(1.0) {
        return Err(Error::Validation(format!(
            "levels {m},{} are not degenerate",
            m + 1
        )));
    }
    let below = hot_levels[..m].iter().fold(f64::NEG_INFINITY, |x, &v| x.max(v));
    let above = hot_levels[m + 2..].iter().fold(f64::INFINITY, |x, &v| x.min(v));
    let mut nu = f64::INFINITY;
    if above.is_finite() {
        nu = nu.min(above - e);
    }
    if below.is_finite() {
        nu = nu.min(e - below);
    }
    if nu.is_finite() {
        Ok(nu)
    } else {
        Err(Error::Domain("no neighbouring level to bound the split".into()))
    }
}

/// Polarization-erasure bound slack:
/// `beta_c Delta<H_c> + beta_h Delta<H_h> - nu_plus * beta_h * |pol_f|`.
pub fn pol_ineq_slack(
    beta_c: f64,
    beta_h: f64,
    d_hc: f64,
    d_hh: f64,
    nu_plus: f64,
    final_polarization: f64,
) -> f64 {
    beta_c * d_hc + beta_h * d_hh - nu_plus * beta_h * final_polarization.abs()
}

/// No-overlap boundary for an athermal passive environment with sorted
/// descending populations `p`: `beta_bar_c* = ln(p_1/p_N) / omega_c_min`.
pub fn athermal_beta_bar_star(populations_desc: &[f64], omega_c_min: f64) -> Result<f64> {
    let p1 = *populations_desc.first().ok_or_else(|| Error::Validation("empty populations".into()))?;
    let pn = *populations_desc.last().unwrap();
    if pn <= 0.0 {
        return Err(Error::Domain("zero population in athermal spectrum".into()));
    }
    for w in populations_desc.windows(2) {
        if w[1] > w[0] + 1e-12 {
            return Err(Error::Validation("populations must be sorted descending (passive)".into()));
        }
    }
    Ok((p1 / pn).ln() / omega_c_min)
}

/// Effective inverse temperature assigned to the athermal subsystem by the
/// ladder deformation: `beta_s_eff * omega_s_max = beta_c * omega_c_min`.
pub fn athermal_beta_s_eff(beta_c: f64, omega_c_min: f64, omega_s_max: f64) -> f64 {
    beta_c * omega_c_min / omega_s_max
}

/// Effective temperatures for a classically correlated `(c, h)` initial
/// state in the floors-and-ladders picture.
///
/// `p_joint[(i, j)]` is the joint population of cold level `i`, hot level
/// `j`. Floors are `-ln p_i^c`; the conditional ladders `-ln p_{j|i}` sit
/// on them. The deformation replaces floors by `beta_c_eff * E_c` (minimal
/// no-crossing value) and every ladder by `beta_h_eff * H_h` (maximal
/// no-crossing value, `beta_h_eff = beta_c_eff * omega_c_min / omega_h_max`).
///
/// Requires: floor marginal passive w.r.t. `E_c`, every conditional ladder
/// passive w.r.t. `E_h`, and non-overlapping ladders.
pub fn correlated_effective_betas(
    p_joint: &nalgebra::DMatrix<f64>,
    e_c: &[f64],
    e_h: &[f64],
) -> Result<(f64, f64)> {
    let (nc, nh) = (e_c.len(), e_h.len());
    if p_joint.nrows() != nc || p_joint.ncols() != nh {
        return Err(Error::Dimension("joint distribution shape mismatch".into()));
    }
    let marg_c: Vec<f64> = (0..nc).map(|i| p_joint.row(i).iter().sum()).collect();
    if marg_c.iter().any(|&p| p <= 0.0) {
        return Err(Error::Domain("cold marginal has a zero".into()));
    }
    // Passivity of floors and ladders.
    for i in 0..nc {
        for k in 0..nc {
            if e_c[k] > e_c[i] + 1e-12 && marg_c[k] > marg_c[i] + 1e-12 {
                return Err(Error::Validation("cold marginal is not passive w.r.t. H_c".into()));
            }
        }
        let cond: Vec<f64> = (0..nh).map(|j| p_joint[(i, j)] / marg_c[i]).collect();
        for j in 0..nh {
            for l in 0..nh {
                if e_h[l] > e_h[j] + 1e-12 && cond[l] > cond[j] + 1e-12 {
                    return Err(Error::Validation(format!(
                        "conditional ladder on cold level {i} is not passive w.r.t. H_h"
                    )));
                }
            }
        }
    }
    // Ladder extent on each floor.
    let ladder: Vec<Vec<f64>> = (0..nc)
        .map(|i| (0..nh).map(|j| -(p_joint[(i, j)] / marg_c[i]).max(1e-300).ln()).collect())
        .collect();
    let lad_max: Vec<f64> = ladder.iter().map(|l| l.iter().cloned().fold(f64::NEG_INFINITY, f64::max)).collect();
    let lad_min: Vec<f64> = ladder.iter().map(|l| l.iter().cloned().fold(f64::INFINITY, f64::min)).collect();
    // Original no-overlap requirement between every pair of floors.
    let floors: Vec<f64> = marg_c.iter().map(|&p| -p.ln()).collect();
    for i in 0..nc {
        for k in 0..nc {
            if floors[k] > floors[i] + 1e-12 {
                if floors[i] + lad_max[i] > floors[k] + lad_min[k] + 1e-9 {
                    return Err(Error::Validation(format!(
                        "ladders on floors {i} and {k} overlap; no effective temperature exists"
                    )));
                }
            }
        }
    }
    // Minimal beta_c_eff keeping ladders separated after the floor shift:
    // for E_c[k] > E_c[i]: beta*E_i + lad_max_i <= beta*E_k + lad_min_k.
    let mut beta_c_eff = 0.0f64;
    for i in 0..nc {
        for k in 0..nc {
            if e_c[k] > e_c[i] + 1e-12 {
                let need = (lad_max[i] - lad_min[k]) / (e_c[k] - e_c[i]);
                beta_c_eff = beta_c_eff.max(need);
            }
        }
    }
    let omega_c_min = min_gap(e_c)?;
    let omega_h_max = span(e_h);
    if omega_h_max <= 0.0 {
        return Err(Error::Domain("hot spectrum has zero span".into()));
    }
    let beta_h_eff = beta_c_eff * omega_c_min / omega_h_max;
    Ok((beta_c_eff, beta_h_eff))
}
