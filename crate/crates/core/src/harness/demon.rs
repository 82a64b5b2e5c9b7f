//! Lazy-demon channel and detection-threshold search.

use crate::error::{Error, Result};
use crate::harness::setup::DemonSpec;
use crate::qstate::{Density, C64};

/// A selective measurement-and-swap: with probability `p` the demon
/// measures in the global energy eigenbasis (the computational product
/// basis) and, when it finds `trigger`, releases the population onto
/// `replace`. Unconditionally the channel dephases, which is what hides
/// it from the plain Clausius audit until `p` grows.
#[derive(Debug, Clone, Copy)]
pub struct Demon {
    pub trigger: usize,
    pub replace: usize,
}

impl Demon {
    pub fn from_spec(spec: &DemonSpec) -> Self {
        Self { trigger: spec.trigger, replace: spec.replace }
    }

    pub fn apply(&self, rho: &Density, p: f64) -> Result<Density> {
        let n = rho.dim();
        if self.trigger >= n || self.replace >= n {
            return Err(Error::Dimension(format!(
                "demon indices ({}, {}) outside dimension {n}",
                self.trigger, self.replace
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("demon probability {p} outside [0, 1]")));
        }
        let mut diag: Vec<f64> = (0..n).map(|i| rho.matrix()[(i, i)].re).collect();
        diag[self.replace] += diag[self.trigger];
        diag[self.trigger] = 0.0;
        let mut out = rho.matrix() * C64::new(1.0 - p, 0.0);
        for (i, d) in diag.iter().enumerate() {
            out[(i, i)] += C64::new(p * d, 0.0);
        }
        Ok(Density::from_raw(out))
    }
}

/// Smallest demon strength at which `slack(p) < -margin`, or `None` if the
/// audit stays clean on all of [0, 1]. Coarse 0.01 grid, then bisection to
/// 1e-4. Assumes a single clean-to-violated transition, which holds for
/// these channels: every slack is affine in `p`.
pub fn detection_threshold(slack: impl Fn(f64) -> f64, margin: f64) -> Option<f64> {
    let violated = |p: f64| slack(p) < -margin;
    if violated(0.0) {
        return Some(0.0);
    }
    let steps = 100;
    let mut prev = 0.0;
    for k in 1..=steps {
        let p = k as f64 / steps as f64;
        if violated(p) {
            let (mut lo, mut hi) = (prev, p);
            while hi - lo > 1e-4 {
                let mid = 0.5 * (lo + hi);
                if violated(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        prev = p;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::Density;

    #[test]
    fn demon_moves_population_and_dephases() {
        let mut m = Density::from_populations(&[0.5, 0.3, 0.2]).unwrap().matrix().clone();
        m[(0, 1)] = C64::new(0.1, 0.05);
        m[(1, 0)] = C64::new(0.1, -0.05);
        let rho = Density::new(m).unwrap();
        let demon = Demon { trigger: 1, replace: 2 };
        let out = demon.apply(&rho, 0.5).unwrap();
        let d = out.matrix();
        assert!((d[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((d[(1, 1)].re - 0.15).abs() < 1e-15);
        assert!((d[(2, 2)].re - 0.35).abs() < 1e-15);
        // Coherence scaled by (1 - p).
        assert!((d[(0, 1)].re - 0.05).abs() < 1e-15);
        assert!((d[(0, 1)].im - 0.025).abs() < 1e-15);
    }

    #[test]
    fn threshold_finds_affine_crossing() {
        // slack(p) = 0.3 - p: crosses -1e-9 at p = 0.3.
        let t = detection_threshold(|p| 0.3 - p, 1e-9).unwrap();
        assert!((t - 0.3).abs() < 1e-4, "{t}");
        assert!(detection_threshold(|p| 0.1 + p, 1e-9).is_none());
        assert_eq!(detection_threshold(|p| -0.1 - p, 1e-9), Some(0.0));
    }
}
