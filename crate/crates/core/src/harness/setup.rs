//! Setup files: human-readable TOML, schema-versioned.
//!
//! A setup names a scenario, lists the subsystems of the product initial
//! state, and optionally fixes an interaction, a scanned observable, a
//! demon, and free numeric parameters. The same schema feeds `run`,
//! `audit`, `xi` and `threshold`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupSpec {
    pub schema_version: u32,
    /// Registry key deciding which runner interprets this setup.
    pub scenario: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Number of random channels in the sampling sections.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channels: Option<usize>,
    #[serde(default, rename = "subsystem", skip_serializing_if = "Vec::is_empty")]
    pub subsystems: Vec<SubsystemSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interaction: Option<InteractionSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub demon: Option<DemonSpec>,
    /// Scenario-specific numbers that don't warrant schema fields.
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub params: toml::Table,
}

/// One tensor factor of the initial state. `levels` are the diagonal of
/// the subsystem operator in the computational basis (slot 0 is the
/// leftmost, most significant factor). The state is thermal at `beta` or
/// given directly through `populations` (in the operator eigenbasis);
/// `basis = "x"` rotates a two-level operator to the conjugate basis, so
/// e.g. `levels = [-0.5, 0.5]` becomes the half-spin x operator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub label: String,
    pub levels: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub populations: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub basis: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    /// "none" | "ladder_exchange" | "flip_flop" | "zz"
    pub kind: String,
    #[serde(default = "default_coupling")]
    pub coupling: f64,
    /// ladder_exchange: which rungs `k -> (|k><k+1| (x) |k+1><k|)` to keep.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rungs: Option<Vec<usize>>,
    /// zz: weight of each bath factor against subsystem 0.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    /// flip_flop: rescale every pair touching this subsystem...
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale_involving: Option<usize>,
    /// ...by this factor.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_grid: Option<TimeGrid>,
}

fn default_coupling() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn points(&self) -> Vec<f64> {
        if self.steps <= 1 {
            return vec![self.start];
        }
        let dt = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|k| self.start + dt * k as f64).collect()
    }
}

/// Deformation observable, resolved against a subsystem by label.
///
/// kinds: "energy" (subsystem diagonal), "weighted_energy" (beta- or
/// `weight`-scaled energy), "state_op" (the state-defining operator, i.e.
/// the rotated one for `basis = "x"`), "projector" (onto `level`),
/// "level_delta" (`|level+1><level+1| - |level><level|`).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub kind: String,
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

/// A lazy demon: watches for the `trigger` basis state of the global
/// energy eigenbasis and, with the given probability, swaps its
/// population onto `replace` while wiping coherences (a measurement).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemonSpec {
    pub trigger: usize,
    pub replace: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub probability: Option<f64>,
}

const INTERACTION_KINDS: &[&str] = &["none", "ladder_exchange", "flip_flop", "zz"];
const OBSERVABLE_KINDS: &[&str] =
    &["energy", "weighted_energy", "state_op", "projector", "level_delta"];

pub fn parse_setup_str(text: &str) -> Result<SetupSpec> {
    let spec: SetupSpec =
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim_end().to_string()))?;
    validate(&spec)?;
    Ok(spec)
}

pub fn parse_setup_file(path: &Path) -> Result<SetupSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_setup_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn validate(spec: &SetupSpec) -> Result<()> {
    if spec.schema_version != SCHEMA_VERSION {
        return Err(Error::Parse(format!(
            "unsupported schema_version {} (this build reads {SCHEMA_VERSION})",
            spec.schema_version
        )));
    }
    if spec.scenario.is_empty() {
        return Err(Error::Parse("scenario name is empty".into()));
    }
    let mut dim: usize = 1;
    for (i, sub) in spec.subsystems.iter().enumerate() {
        if sub.label.is_empty() {
            return Err(Error::Parse(format!("subsystem #{i}: empty label")));
        }
        if spec.subsystems[..i].iter().any(|s| s.label == sub.label) {
            return Err(Error::Parse(format!("duplicate subsystem label '{}'", sub.label)));
        }
        if sub.levels.is_empty() {
            return Err(Error::Parse(format!("subsystem '{}': no levels", sub.label)));
        }
        dim = dim.saturating_mul(sub.levels.len());
        if sub.beta.is_some() && sub.populations.is_some() {
            return Err(Error::Parse(format!(
                "subsystem '{}': give beta or populations, not both",
                sub.label
            )));
        }
        if let Some(p) = &sub.populations {
            if p.len() != sub.levels.len() {
                return Err(Error::Parse(format!(
                    "subsystem '{}': {} populations for {} levels",
                    sub.label,
                    p.len(),
                    sub.levels.len()
                )));
            }
            if p.iter().any(|&x| x < 0.0) {
                return Err(Error::Parse(format!(
                    "subsystem '{}': negative population",
                    sub.label
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::Parse(format!(
                    "subsystem '{}': populations sum to {sum:.6}, expected 1",
                    sub.label
                )));
            }
        }
        match sub.basis.as_deref() {
            None | Some("z") => {}
            Some("x") => {
                if sub.levels.len() != 2 {
                    return Err(Error::Parse(format!(
                        "subsystem '{}': basis \"x\" needs exactly 2 levels",
                        sub.label
                    )));
                }
            }
            Some(other) => {
                return Err(Error::Parse(format!(
                    "subsystem '{}': unknown basis '{other}' (z or x)",
                    sub.label
                )));
            }
        }
    }
    if dim > 1 << 14 {
        return Err(Error::Parse(format!("total dimension {dim} is too large")));
    }
    if let Some(inter) = &spec.interaction {
        if !INTERACTION_KINDS.contains(&inter.kind.as_str()) {
            return Err(Error::Parse(format!(
                "unknown interaction kind '{}' (one of {})",
                inter.kind,
                INTERACTION_KINDS.join(", ")
            )));
        }
        if let Some(g) = &inter.time_grid {
            if g.steps == 0 {
                return Err(Error::Parse("time_grid.steps must be positive".into()));
            }
        }
    }
    if let Some(obs) = &spec.observable {
        if !OBSERVABLE_KINDS.contains(&obs.kind.as_str()) {
            return Err(Error::Parse(format!(
                "unknown observable kind '{}' (one of {})",
                obs.kind,
                OBSERVABLE_KINDS.join(", ")
            )));
        }
        if !spec.subsystems.iter().any(|s| s.label == obs.label) {
            return Err(Error::Parse(format!(
                "observable references unknown subsystem '{}'",
                obs.label
            )));
        }
    }
    if let Some(demon) = &spec.demon {
        if !spec.subsystems.is_empty() && (demon.trigger >= dim || demon.replace >= dim) {
            return Err(Error::Parse(format!(
                "demon indices ({}, {}) outside dimension {dim}",
                demon.trigger, demon.replace
            )));
        }
        if demon.trigger == demon.replace {
            return Err(Error::Parse("demon trigger equals replace".into()));
        }
        if let Some(p) = demon.probability {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Parse(format!("demon probability {p} outside [0, 1]")));
            }
        }
    }
    Ok(())
}

/// Canonical serialization used for the setup hash: field order is fixed
/// by the struct, tables are sorted, so equal specs give equal bytes.
pub fn canonical_toml(spec: &SetupSpec) -> Result<String> {
    toml::to_string(spec).map_err(|e| Error::Validation(format!("serialize setup: {e}")))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100_0000_01b3);
    }
    h
}

/// Stable 64-bit hash of the canonical setup text; recorded in every
/// result so an emitted table can be traced back to its exact inputs.
pub fn setup_hash(spec: &SetupSpec) -> Result<String> {
    Ok(format!("{:016x}", fnv1a64(canonical_toml(spec)?.as_bytes())))
}

fn param_err(key: &str, want: &str) -> Error {
    Error::Parse(format!("param '{key}': expected {want}"))
}

pub fn param_f64(params: &toml::Table, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => value_f64(v).ok_or_else(|| param_err(key, "a number")),
    }
}

pub fn param_usize(params: &toml::Table, key: &str, default: usize) -> Result<usize> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_integer()
            .and_then(|i| usize::try_from(i).ok())
            .ok_or_else(|| param_err(key, "a nonnegative integer")),
    }
}

pub fn param_vec_f64(params: &toml::Table, key: &str) -> Result<Vec<f64>> {
    let v = params.get(key).ok_or_else(|| param_err(key, "an array (missing)"))?;
    let arr = v.as_array().ok_or_else(|| param_err(key, "an array of numbers"))?;
    arr.iter()
        .map(|x| value_f64(x).ok_or_else(|| param_err(key, "an array of numbers")))
        .collect()
}

pub fn param_mat_f64(params: &toml::Table, key: &str) -> Result<Vec<Vec<f64>>> {
    let v = params.get(key).ok_or_else(|| param_err(key, "an array of arrays (missing)"))?;
    let arr = v.as_array().ok_or_else(|| param_err(key, "an array of arrays"))?;
    arr.iter()
        .map(|row| {
            let row = row.as_array().ok_or_else(|| param_err(key, "an array of arrays"))?;
            row.iter()
                .map(|x| value_f64(x).ok_or_else(|| param_err(key, "numeric entries")))
                .collect()
        })
        .collect()
}

pub fn param_clusters(params: &toml::Table, key: &str) -> Result<Vec<Vec<usize>>> {
    let v = params.get(key).ok_or_else(|| param_err(key, "an array of arrays (missing)"))?;
    let arr = v.as_array().ok_or_else(|| param_err(key, "an array of index arrays"))?;
    arr.iter()
        .map(|row| {
            let row =
                row.as_array().ok_or_else(|| param_err(key, "an array of index arrays"))?;
            row.iter()
                .map(|x| {
                    x.as_integer()
                        .and_then(|i| usize::try_from(i).ok())
                        .ok_or_else(|| param_err(key, "nonnegative indices"))
                })
                .collect()
        })
        .collect()
}

fn value_f64(v: &toml::Value) -> Option<f64> {
    match v {
        toml::Value::Float(x) => Some(*x),
        toml::Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
schema_version = 1
scenario = "two_four_level"
seed = 7

[[subsystem]]
label = "cold"
beta = 2.0
levels = [0.0, 4.0, 8.0, 12.0]

[[subsystem]]
label = "hot"
beta = 1.0
levels = [0.0, 1.0, 2.0, 3.0]

[interaction]
kind = "ladder_exchange"
rungs = [0, 1]
time_grid = { start = 0.0, stop = 3.0, steps = 61 }

[observable]
kind = "weighted_energy"
label = "cold"
"#;

    #[test]
    fn parses_and_hashes_stably() {
        let spec = parse_setup_str(SAMPLE).unwrap();
        assert_eq!(spec.subsystems.len(), 2);
        assert_eq!(spec.subsystems[0].label, "cold");
        let h1 = setup_hash(&spec).unwrap();
        let h2 = setup_hash(&parse_setup_str(SAMPLE).unwrap()).unwrap();
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 16);
    }

    #[test]
    fn bad_population_sum_names_subsystem() {
        let text = r#"
schema_version = 1
scenario = "athermal"

[[subsystem]]
label = "work_medium"
levels = [0.0, 1.0]
populations = [0.6, 0.3]
"#;
        let err = parse_setup_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("work_medium"), "{msg}");
        assert!(msg.contains("0.9"), "{msg}");
    }

    #[test]
    fn unknown_key_is_a_line_precise_error() {
        let text = "schema_version = 1\nscenario = \"x\"\nbogus_key = 3\n";
        let err = parse_setup_str(text).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn wrong_schema_version_rejected() {
        let text = "schema_version = 2\nscenario = \"x\"\n";
        assert!(parse_setup_str(text).is_err());
    }

    #[test]
    fn time_grid_points_cover_range() {
        let g = TimeGrid { start: 0.0, stop: 3.0, steps: 61 };
        let pts = g.points();
        assert_eq!(pts.len(), 61);
        assert!((pts[0] - 0.0).abs() < 1e-15);
        assert!((pts[60] - 3.0).abs() < 1e-12);
        assert!((pts[1] - 0.05).abs() < 1e-12);
    }
}
