//! Concrete operators and states assembled from a setup.

use crate::error::{Error, Result};
use crate::harness::setup::{InteractionSpec, ObservableSpec, SetupSpec, SubsystemSpec};
use crate::qstate::{embed, kron_all, thermal_state, CMat, Density, Hermitian, C64};

/// Everything the generic pipelines need about a product setup: the bare
/// subsystem energies, the state-defining operators (these differ for an
/// `x`-basis factor), the initial state, and `-ln rho_0` with its full
/// normalization.
pub struct Model {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    /// diag(levels) per subsystem, embedded in the full space.
    pub energies: Vec<CMat>,
    /// State-defining operator per subsystem, embedded (rotated for "x").
    pub state_ops: Vec<CMat>,
    pub h0: CMat,
    pub h_int: CMat,
    pub rho0: Density,
    /// -ln rho_0 including ln Z, so its spectrum is nonnegative.
    pub b_op: CMat,
    pub ln_z: f64,
}

fn local_operator(sub: &SubsystemSpec) -> CMat {
    let n = sub.levels.len();
    let diag = CMat::from_fn(n, n, |i, j| {
        if i == j {
            C64::new(sub.levels[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    match sub.basis.as_deref() {
        Some("x") => {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let v = CMat::from_row_slice(
                2,
                2,
                &[C64::new(s, 0.0), C64::new(s, 0.0), C64::new(s, 0.0), C64::new(-s, 0.0)],
            );
            &v * diag * v.adjoint()
        }
        _ => diag,
    }
}

/// Initial state and `-ln rho` contribution of one factor, in its local
/// space.
fn local_state(sub: &SubsystemSpec) -> Result<(Density, CMat, f64)> {
    let op = Hermitian::new(local_operator(sub))?;
    if let Some(beta) = sub.beta {
        let (rho, ln_z) = thermal_state(&op, beta)?;
        let b = op.matrix() * C64::new(beta, 0.0)
            + CMat::identity(op.dim(), op.dim()) * C64::new(ln_z, 0.0);
        return Ok((rho, b, ln_z));
    }
    if let Some(pops) = &sub.populations {
        // Populations sit in the operator eigenbasis; for the default
        // z basis that is the computational one.
        let eig = op.eigh();
        let n = pops.len();
        let mut rho = CMat::zeros(n, n);
        let mut b = CMat::zeros(n, n);
        for k in 0..n {
            let v = eig.vectors.column(k);
            let proj = &v * v.adjoint();
            rho += &proj * C64::new(pops[k], 0.0);
            let bk = -(pops[k].max(1e-300)).ln();
            b += proj * C64::new(bk, 0.0);
        }
        return Ok((Density::new(rho)?, b, 0.0));
    }
    Err(Error::Validation(format!(
        "subsystem '{}': needs beta or populations",
        sub.label
    )))
}

fn sigma_plus() -> CMat {
    // |1><0| with level 1 the excited state.
    let mut m = CMat::zeros(2, 2);
    m[(1, 0)] = C64::new(1.0, 0.0);
    m
}

fn build_interaction(spec: &InteractionSpec, dims: &[usize]) -> Result<CMat> {
    let dim: usize = dims.iter().product();
    let mut h = CMat::zeros(dim, dim);
    let g = C64::new(spec.coupling, 0.0);
    match spec.kind.as_str() {
        "none" => {}
        "ladder_exchange" => {
            if dims.len() < 2 {
                return Err(Error::Validation("ladder_exchange needs two subsystems".into()));
            }
            let (d0, d1) = (dims[0], dims[1]);
            let max_rung = d0.min(d1).saturating_sub(1);
            let rungs: Vec<usize> = match &spec.rungs {
                Some(r) => r.clone(),
                None => (0..max_rung).collect(),
            };
            for &k in &rungs {
                if k + 1 >= d0 || k + 1 >= d1 {
                    return Err(Error::Validation(format!("rung {k} outside the ladders")));
                }
                let mut lower0 = CMat::zeros(d0, d0);
                lower0[(k, k + 1)] = C64::new(1.0, 0.0); // |k><k+1|
                let mut raise1 = CMat::zeros(d1, d1);
                raise1[(k + 1, k)] = C64::new(1.0, 0.0); // |k+1><k|
                let term = embed(&lower0, dims, 0)? * embed(&raise1, dims, 1)?;
                h += &term * g + term.adjoint() * g.conj();
            }
        }
        "flip_flop" => {
            let n = dims.len();
            for (slot, &d) in dims.iter().enumerate() {
                if d != 2 {
                    return Err(Error::Validation(format!(
                        "flip_flop needs two-level subsystems (slot {slot} has {d})"
                    )));
                }
            }
            let sp = sigma_plus();
            let sm = sp.adjoint();
            for i in 0..n {
                for j in i + 1..n {
                    let mut w = spec.coupling;
                    if let (Some(slot), Some(scale)) = (spec.scale_involving, spec.scale) {
                        if i == slot || j == slot {
                            w *= scale;
                        }
                    }
                    let term = embed(&sp, dims, i)? * embed(&sm, dims, j)?;
                    h += &term * C64::new(w, 0.0) + term.adjoint() * C64::new(w, 0.0);
                }
            }
        }
        // "zz" needs the embedded energy operators and is assembled in
        // build_model, which owns them.
        other => return Err(Error::Validation(format!("unhandled interaction kind '{other}'"))),
    }
    Ok(h)
}

pub fn build_model(spec: &SetupSpec) -> Result<Model> {
    if spec.subsystems.is_empty() {
        return Err(Error::Validation("setup has no subsystems".into()));
    }
    let dims: Vec<usize> = spec.subsystems.iter().map(|s| s.levels.len()).collect();
    let labels: Vec<String> = spec.subsystems.iter().map(|s| s.label.clone()).collect();
    let dim: usize = dims.iter().product();

    let mut energies = Vec::with_capacity(dims.len());
    let mut state_ops = Vec::with_capacity(dims.len());
    let mut local_rhos = Vec::with_capacity(dims.len());
    let mut b_op = CMat::zeros(dim, dim);
    let mut ln_z = 0.0;
    for (slot, sub) in spec.subsystems.iter().enumerate() {
        let n = sub.levels.len();
        let e_loc = CMat::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(sub.levels[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        energies.push(embed(&e_loc, &dims, slot)?);
        state_ops.push(embed(&local_operator(sub), &dims, slot)?);
        let (rho_loc, b_loc, lz) = local_state(sub)?;
        b_op += embed(&b_loc, &dims, slot)?;
        ln_z += lz;
        local_rhos.push(rho_loc);
    }
    let rho_mats: Vec<&CMat> = local_rhos.iter().map(|r| r.matrix()).collect();
    let rho0 = Density::new(kron_all(&rho_mats))?;

    let mut h0 = CMat::zeros(dim, dim);
    for e in &energies {
        h0 += e;
    }

    let h_int = match &spec.interaction {
        None => CMat::zeros(dim, dim),
        Some(inter) => match inter.kind.as_str() {
            "zz" => {
                let gammas = inter
                    .gammas
                    .as_ref()
                    .ok_or_else(|| Error::Validation("zz interaction needs gammas".into()))?;
                if gammas.len() != dims.len() - 1 {
                    return Err(Error::Validation(format!(
                        "zz: {} gammas for {} bath factors",
                        gammas.len(),
                        dims.len() - 1
                    )));
                }
                let mut h = CMat::zeros(dim, dim);
                for (j, &gamma) in gammas.iter().enumerate() {
                    h += &energies[0] * &energies[j + 1] * C64::new(inter.coupling * gamma, 0.0);
                }
                h
            }
            _ => build_interaction(inter, &dims)?,
        },
    };

    Ok(Model {
        dims,
        labels,
        energies,
        state_ops,
        h0,
        h_int,
        rho0,
        b_op,
        ln_z,
    })
}

impl Model {
    pub fn dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn slot_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Validation(format!("no subsystem labeled '{label}'")))
    }

    /// Full dynamics generator `H0 + H_int`.
    pub fn hamiltonian(&self) -> Result<Hermitian> {
        Hermitian::new(&self.h0 + &self.h_int)
    }

    pub fn observable(&self, obs: &ObservableSpec, betas: &[Option<f64>]) -> Result<CMat> {
        let slot = self.slot_of(&obs.label)?;
        match obs.kind.as_str() {
            "energy" => Ok(self.energies[slot].clone()),
            "weighted_energy" => {
                let w = match obs.weight {
                    Some(w) => w,
                    None => betas[slot].ok_or_else(|| {
                        Error::Validation(format!(
                            "weighted_energy on '{}' needs a beta or explicit weight",
                            obs.label
                        ))
                    })?,
                };
                Ok(&self.energies[slot] * C64::new(w, 0.0))
            }
            "state_op" => Ok(self.state_ops[slot].clone()),
            "projector" => {
                let k = obs.level.ok_or_else(|| {
                    Error::Validation("projector observable needs a level".into())
                })?;
                let d = self.dims[slot];
                if k >= d {
                    return Err(Error::Validation(format!("projector level {k} outside 0..{d}")));
                }
                let mut p = CMat::zeros(d, d);
                p[(k, k)] = C64::new(1.0, 0.0);
                embed(&p, &self.dims, slot)
            }
            "level_delta" => {
                let m = obs.level.ok_or_else(|| {
                    Error::Validation("level_delta observable needs a level".into())
                })?;
                let d = self.dims[slot];
                if m + 1 >= d {
                    return Err(Error::Validation(format!(
                        "level_delta needs levels {m},{} inside 0..{d}",
                        m + 1
                    )));
                }
                let mut p = CMat::zeros(d, d);
                p[(m + 1, m + 1)] = C64::new(1.0, 0.0);
                p[(m, m)] = C64::new(-1.0, 0.0);
                embed(&p, &self.dims, slot)
            }
            other => Err(Error::Validation(format!("unknown observable kind '{other}'"))),
        }
    }
}
