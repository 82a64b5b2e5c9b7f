//! Generic audit pipelines behind the `audit`, `xi` and `threshold`
//! commands: build the setup's product state, drive it through its own
//! Hamiltonian and a batch of seeded random channels, and score one layer
//! of the inequality hierarchy.

use crate::deformation::{invariant_partition, xi_thresholds, XiScan};
use crate::error::{Error, Result};
use crate::harness::demon::{detection_threshold, Demon};
use crate::harness::model::{build_model, Model};
use crate::harness::result::{fmt_f64, ScenarioResult};
use crate::harness::scenarios::blocks_from_partition;
use crate::harness::setup::{param_f64, setup_hash, DemonSpec, ObservableSpec, SetupSpec};
use crate::hierarchy::{
    binary_family_slacks, binary_values, majorization_check, truncated_family_slacks,
    truncated_values,
};
use crate::passivity::{b_alpha_values, delta_expectation, joint_spectrum, Spectrum};
use crate::qstate::{
    eigh, rng_from_seed, unitary_from_hamiltonian, CMat, Density, Hermitian, Mixture,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundKind {
    Ci,
    BAlpha(f64),
    Deformation { restricted: bool },
    /// `None` audits the whole family (worst `l`).
    Truncated(Option<usize>),
    Binary(Option<usize>),
    Majorization,
}

impl BoundKind {
    pub fn label(&self) -> String {
        match self {
            BoundKind::Ci => "ci".into(),
            BoundKind::BAlpha(a) => format!("b_alpha:{a}"),
            BoundKind::Deformation { restricted: false } => "deformation".into(),
            BoundKind::Deformation { restricted: true } => "deformation_restricted".into(),
            BoundKind::Truncated(None) => "truncated".into(),
            BoundKind::Truncated(Some(l)) => format!("truncated:{l}"),
            BoundKind::Binary(None) => "binary".into(),
            BoundKind::Binary(Some(l)) => format!("binary:{l}"),
            BoundKind::Majorization => "majorization".into(),
        }
    }
}

pub fn parse_bound_kind(s: &str) -> Result<BoundKind> {
    let (head, tail) = match s.split_once(':') {
        Some((h, t)) => (h, Some(t)),
        None => (s, None),
    };
    let bad = || {
        Error::Validation(format!(
            "unknown bound '{s}' (ci, b2, b_alpha:<a>, deformation, \
             deformation_restricted, truncated[:l], binary[:l], majorization)"
        ))
    };
    match (head, tail) {
        ("ci", None) => Ok(BoundKind::Ci),
        ("b2", None) => Ok(BoundKind::BAlpha(2.0)),
        ("b_alpha", Some(t)) => t.parse::<f64>().map(BoundKind::BAlpha).map_err(|_| bad()),
        ("deformation", None) => Ok(BoundKind::Deformation { restricted: false }),
        ("deformation_restricted", None) => Ok(BoundKind::Deformation { restricted: true }),
        ("truncated", None) => Ok(BoundKind::Truncated(None)),
        ("truncated", Some(t)) => {
            t.parse::<usize>().map(|l| BoundKind::Truncated(Some(l))).map_err(|_| bad())
        }
        ("binary", None) => Ok(BoundKind::Binary(None)),
        ("binary", Some(t)) => {
            t.parse::<usize>().map(|l| BoundKind::Binary(Some(l))).map_err(|_| bad())
        }
        ("majorization", None) => Ok(BoundKind::Majorization),
        _ => Err(bad()),
    }
}

/// `kind:label[:level]`, e.g. `energy:cold` or `level_delta:hot:1`.
pub fn parse_observable_arg(s: &str) -> Result<ObservableSpec> {
    let parts: Vec<&str> = s.split(':').collect();
    let bad = || {
        Error::Validation(format!(
            "observable '{s}' is not kind:label[:level] \
             (kinds: energy, weighted_energy, state_op, projector, level_delta)"
        ))
    };
    match parts.as_slice() {
        [kind, label] => Ok(ObservableSpec {
            kind: kind.to_string(),
            label: label.to_string(),
            weight: None,
            level: None,
        }),
        [kind, label, level] => Ok(ObservableSpec {
            kind: kind.to_string(),
            label: label.to_string(),
            weight: None,
            level: Some(level.parse::<usize>().map_err(|_| bad())?),
        }),
        _ => Err(bad()),
    }
}

/// Diagonal of `rho` in the columns of `basis`.
pub fn populations_in(rho: &Density, basis: &CMat) -> Vec<f64> {
    let m = basis.adjoint() * rho.matrix() * basis;
    (0..m.nrows()).map(|i| m[(i, i)].re).collect()
}

/// Re-express a computational-basis partition in a (near-permutation)
/// eigenbasis: each column inherits the id of its dominant component.
pub fn partition_in_basis(partition: &[usize], basis: &CMat) -> Vec<usize> {
    (0..basis.ncols())
        .map(|j| {
            let col = basis.column(j);
            let mut best = 0;
            let mut best_w = -1.0;
            for (i, z) in col.iter().enumerate() {
                let w = z.norm_sqr();
                if w > best_w {
                    best_w = w;
                    best = i;
                }
            }
            partition[best]
        })
        .collect()
}

fn betas_of(spec: &SetupSpec) -> Vec<Option<f64>> {
    spec.subsystems.iter().map(|s| s.beta).collect()
}

struct SpectralData {
    basis: CMat,
    p0: Vec<f64>,
    b: Vec<f64>,
    a: Option<Vec<f64>>,
    xi: Option<XiScan>,
}

fn spectral_data(spec: &SetupSpec, model: &Model, kind: BoundKind, tol: f64) -> Result<SpectralData> {
    if let BoundKind::Deformation { restricted } = kind {
        let obs_spec = spec.observable.as_ref().ok_or_else(|| {
            Error::Validation(
                "deformation audit needs an observable: pass --observable or add [observable] \
                 to the setup"
                    .into(),
            )
        })?;
        let a_op = Hermitian::new(model.observable(obs_spec, &betas_of(spec))?)?;
        let joint = joint_spectrum(&model.rho0, &a_op, 1e-8)?;
        let partition_owned;
        let partition = if restricted {
            let comp = invariant_partition(&(&model.h0 + &model.h_int), 1e-12);
            partition_owned = partition_in_basis(&comp, &joint.basis);
            Some(partition_owned.as_slice())
        } else {
            None
        };
        let xi = xi_thresholds(&joint.b, &joint.a, partition, tol.max(1e-12))?;
        Ok(SpectralData {
            basis: joint.basis,
            p0: joint.populations,
            b: joint.b,
            a: Some(joint.a),
            xi: Some(xi),
        })
    } else {
        let s = Spectrum::from_state(&model.rho0);
        Ok(SpectralData { basis: s.basis, p0: s.populations, b: s.b, a: None, xi: None })
    }
}

fn channel_slack(
    kind: BoundKind,
    data: &SpectralData,
    pf: &[f64],
    rho_f: &Density,
    p0_eigs: &[f64],
    tol: f64,
) -> Result<f64> {
    let slack = match kind {
        BoundKind::Ci => delta_expectation(&data.b, &data.p0, pf),
        BoundKind::BAlpha(alpha) => {
            let vals = b_alpha_values(&data.b, alpha)?;
            delta_expectation(&vals, &data.p0, pf)
        }
        BoundKind::Deformation { .. } => {
            let a = data.a.as_ref().expect("deformation data");
            let xi = data.xi.as_ref().expect("deformation scan");
            let db = delta_expectation(&data.b, &data.p0, pf);
            let da = delta_expectation(a, &data.p0, pf);
            let mut s = db; // xi = 0 is always admissible
            if let Some(m) = xi.minus {
                s = s.min(db + m * da);
            }
            if let Some(p) = xi.plus {
                s = s.min(db + p * da);
            }
            s
        }
        BoundKind::Truncated(Some(l)) => {
            let vals = truncated_values(&data.b, l)?;
            delta_expectation(&vals, &data.p0, pf)
        }
        BoundKind::Truncated(None) => truncated_family_slacks(&data.b, &data.p0, pf)?
            .into_iter()
            .fold(f64::INFINITY, f64::min),
        BoundKind::Binary(Some(l)) => {
            let vals = binary_values(&data.b, l)?;
            delta_expectation(&vals, &data.p0, pf)
        }
        BoundKind::Binary(None) => binary_family_slacks(&data.b, &data.p0, pf)?
            .into_iter()
            .fold(f64::INFINITY, f64::min),
        BoundKind::Majorization => {
            let pf_eigs = eigh(rho_f.matrix()).values;
            majorization_check(p0_eigs, &pf_eigs, tol).worst_slack
        }
    };
    Ok(slack)
}

/// Score one bound over the setup's own evolution plus seeded random
/// channels. Channel 0 is the Hamiltonian evolution when an interaction
/// is configured; the rest are random three-term mixtures of Haar
/// unitaries. The restricted deformation bound is only claimed for
/// dynamics confined to the invariant manifolds, so its channels are
/// sampled block-respecting.
pub fn audit(spec: &SetupSpec, kind: BoundKind, seed: u64, tol: f64) -> Result<ScenarioResult> {
    let model = build_model(spec)?;
    let hash = setup_hash(spec)?;
    let mut res = ScenarioResult::new(&spec.scenario, seed, &hash, tol);
    res.set_columns(&["channel", "slack"]);
    res.note("bound", kind.label());

    let data = spectral_data(spec, &model, kind, tol)?;
    let p0_eigs = eigh(model.rho0.matrix()).values;
    if let Some(xi) = &data.xi {
        res.note("xi_minus", xi.minus.map_or("unbounded".into(), fmt_f64));
        res.note("xi_plus", xi.plus.map_or("unbounded".into(), fmt_f64));
    }

    let mut states: Vec<Density> = Vec::new();
    let evolve = spec.interaction.as_ref().filter(|i| i.kind != "none");
    if let Some(inter) = evolve {
        let t = inter.time.unwrap_or(1.0);
        let u = unitary_from_hamiltonian(&model.hamiltonian()?, t);
        states.push(model.rho0.evolved(&u)?);
        res.note("evolution_time", fmt_f64(t));
    }
    let blocks = if matches!(kind, BoundKind::Deformation { restricted: true }) {
        let comp = invariant_partition(&(&model.h0 + &model.h_int), 1e-12);
        Some(blocks_from_partition(&comp))
    } else {
        None
    };
    let n_channels = spec.channels.unwrap_or(200);
    let mut rng = rng_from_seed(seed);
    for _ in 0..n_channels {
        let mix = match &blocks {
            Some(bl) => Mixture::random_in_blocks(model.dim(), bl, 3, &mut rng)?,
            None => Mixture::random(model.dim(), 3, &mut rng),
        };
        states.push(mix.apply(&model.rho0)?);
    }

    let mut min_slack = f64::INFINITY;
    for (c, rho_f) in states.iter().enumerate() {
        let pf = populations_in(rho_f, &data.basis);
        let slack = channel_slack(kind, &data, &pf, rho_f, &p0_eigs, tol)?;
        min_slack = min_slack.min(slack);
        res.push_row(vec![c as f64, slack]);
    }
    res.note("channels", states.len());
    res.check(&format!("{}_holds", kind.label()), min_slack);
    Ok(res)
}

/// Report the deformation window of a setup's observable: one row per
/// finite threshold, with the level pair that pins it.
pub fn xi_report(
    spec: &SetupSpec,
    observable: Option<&ObservableSpec>,
    partition: Option<&str>,
    seed: u64,
    tol: f64,
) -> Result<ScenarioResult> {
    let model = build_model(spec)?;
    let hash = setup_hash(spec)?;
    let mut res = ScenarioResult::new(&spec.scenario, seed, &hash, tol);
    res.set_columns(&["side", "xi", "pair_low", "pair_high"]);

    let obs_spec = observable.or(spec.observable.as_ref()).ok_or_else(|| {
        Error::Validation("no observable: pass --observable or add [observable] to the setup".into())
    })?;
    let a_op = Hermitian::new(model.observable(obs_spec, &betas_of(spec))?)?;
    let joint = joint_spectrum(&model.rho0, &a_op, 1e-8)?;

    let restricted = match partition {
        None | Some("none") => false,
        Some("interaction") => true,
        Some(other) => {
            return Err(Error::Validation(format!(
                "unknown partition '{other}' (none or interaction)"
            )))
        }
    };
    let part_owned;
    let part = if restricted {
        let comp = invariant_partition(&(&model.h0 + &model.h_int), 1e-12);
        part_owned = partition_in_basis(&comp, &joint.basis);
        Some(part_owned.as_slice())
    } else {
        None
    };
    let scan = xi_thresholds(&joint.b, &joint.a, part, tol.max(1e-12))?;

    res.note("observable", format!("{}:{}", obs_spec.kind, obs_spec.label));
    res.note("partition", if restricted { "interaction" } else { "none" });
    res.note("xi_minus", scan.minus.map_or("unbounded".into(), fmt_f64));
    res.note("xi_plus", scan.plus.map_or("unbounded".into(), fmt_f64));
    if let (Some(xi), Some((i, j))) = (scan.minus, scan.minus_pair) {
        res.push_row(vec![-1.0, xi, i as f64, j as f64]);
    }
    if let (Some(xi), Some((i, j))) = (scan.plus, scan.plus_pair) {
        res.push_row(vec![1.0, xi, i as f64, j as f64]);
    }
    Ok(res)
}

/// Demon detection thresholds for the Clausius, `B^alpha` and deformation
/// audits of one setup, on a common strength grid.
pub fn threshold_report(
    spec: &SetupSpec,
    demon_spec: &DemonSpec,
    seed: u64,
    tol: f64,
) -> Result<ScenarioResult> {
    let model = build_model(spec)?;
    let hash = setup_hash(spec)?;
    let mut res = ScenarioResult::new(&spec.scenario, seed, &hash, tol);

    let alpha = param_f64(&spec.params, "alpha", 2.0)?;
    let demon = Demon::from_spec(demon_spec);
    let t = spec.interaction.as_ref().and_then(|i| i.time).unwrap_or(1.0);
    let u = unitary_from_hamiltonian(&model.hamiltonian()?, t);

    let with_deformation = spec.observable.is_some();
    let data_def = if with_deformation {
        Some(spectral_data(spec, &model, BoundKind::Deformation { restricted: false }, tol)?)
    } else {
        None
    };
    let data_ci = spectral_data(spec, &model, BoundKind::Ci, tol)?;
    let p0_eigs = eigh(model.rho0.matrix()).values;

    let final_state = |p: f64| -> Result<Density> {
        demon.apply(&model.rho0, p)?.evolved(&u)
    };
    let slack_of = |kind: BoundKind, data: &SpectralData, p: f64| -> Result<f64> {
        let rho_f = final_state(p)?;
        let pf = populations_in(&rho_f, &data.basis);
        channel_slack(kind, data, &pf, &rho_f, &p0_eigs, tol)
    };

    let mut columns = vec!["p", "ci_slack", "b_alpha_slack"];
    if with_deformation {
        columns.push("deformation_slack");
    }
    res.set_columns(&columns);
    let mut demon_free = f64::INFINITY;
    for k in 0..=50 {
        let p = k as f64 / 50.0;
        let mut row = vec![p];
        row.push(slack_of(BoundKind::Ci, &data_ci, p)?);
        row.push(slack_of(BoundKind::BAlpha(alpha), &data_ci, p)?);
        if let Some(data) = &data_def {
            row.push(slack_of(BoundKind::Deformation { restricted: false }, data, p)?);
        }
        if k == 0 {
            demon_free = row[1..].iter().cloned().fold(f64::INFINITY, f64::min);
        }
        res.push_row(row);
    }

    let margin = tol;
    let note_threshold = |res: &mut ScenarioResult, name: &str, th: Option<f64>| {
        res.note(name, th.map_or("none".into(), fmt_f64));
    };
    let th_ci = detection_threshold(|p| slack_of(BoundKind::Ci, &data_ci, p).unwrap_or(-1.0), margin);
    let th_ba = detection_threshold(
        |p| slack_of(BoundKind::BAlpha(alpha), &data_ci, p).unwrap_or(-1.0),
        margin,
    );
    note_threshold(&mut res, "threshold_ci", th_ci);
    note_threshold(&mut res, &format!("threshold_b_alpha_{alpha}"), th_ba);
    if let Some(data) = &data_def {
        let th_def = detection_threshold(
            |p| slack_of(BoundKind::Deformation { restricted: false }, data, p).unwrap_or(-1.0),
            margin,
        );
        note_threshold(&mut res, "threshold_deformation", th_def);
    }
    res.note("alpha", fmt_f64(alpha));
    res.note("evolution_time", fmt_f64(t));
    res.check("demon_free_clean", demon_free);
    Ok(res)
}
