//! Problem sets, random instance generation and sample draws.
//!
//! Magnitudes are generated so that the alternatives roughly trade off
//! against each other: one pivot attribute is set from a weighted power sum
//! of the others, so alternatives that are strong on most attributes are weak
//! on the pivot.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::ErrorModel;
use crate::preference::{
    true_utilities, Preference, TrueUtilities, UtilityFunctionSpec, ValueFunctionSpec, ValueKind,
};

pub const MAX_MAGNITUDE: i64 = 15;

const TABLE_A: [([f64; 7], f64); 3] = [
    ([0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020], 1.31),
    ([0.080, 0.129, 0.178, 0.227, 0.178, 0.129, 0.080], 1.68),
    ([0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140], 1.99),
];

const TABLE_B: [([f64; 7], f64); 4] = [
    ([0.020, 0.116, 0.211, 0.307, 0.211, 0.116, 0.020], 1.31),
    ([0.060, 0.124, 0.189, 0.253, 0.189, 0.124, 0.060], 1.57),
    ([0.100, 0.133, 0.167, 0.200, 0.167, 0.133, 0.100], 1.79),
    ([0.140, 0.142, 0.144, 0.147, 0.144, 0.142, 0.140], 1.99),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemSet {
    A,
    B,
}

impl ProblemSet {
    pub const ALL: [ProblemSet; 2] = [ProblemSet::A, ProblemSet::B];
}

impl fmt::Display for ProblemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            ProblemSet::A => "A",
            ProblemSet::B => "B",
        })
    }
}

impl FromStr for ProblemSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(ProblemSet::A),
            "B" | "b" => Ok(ProblemSet::B),
            _ => Err(Error::UnknownSet(s.to_string())),
        }
    }
}

/// Measurement error models of a problem set, one per attribute, renormalized
/// from the tabulated (rounded) probabilities on offsets -3..=3.
pub fn error_table(set_name: &str) -> Result<Vec<ErrorModel>> {
    let rows: &[([f64; 7], f64)] = match set_name.parse::<ProblemSet>()? {
        ProblemSet::A => &TABLE_A,
        ProblemSet::B => &TABLE_B,
    };
    rows.iter()
        .map(|(w, sd)| ErrorModel::from_table(-3, w, *sd))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSetSpec {
    pub name: ProblemSet,
    pub alternatives: usize,
    pub attributes: usize,
    pub max_magnitude: i64,
    pub error_table: Vec<ErrorModel>,
}

impl ProblemSetSpec {
    pub fn new(name: ProblemSet) -> Self {
        let (alternatives, attributes) = match name {
            ProblemSet::A => (12, 3),
            ProblemSet::B => (9, 4),
        };
        ProblemSetSpec {
            name,
            alternatives,
            attributes,
            max_magnitude: MAX_MAGNITUDE,
            error_table: error_table(&name.to_string()).expect("built-in tables are valid"),
        }
    }

    pub fn pairs(&self) -> usize {
        self.alternatives * self.attributes
    }
}

/// Utility family chosen at generation time; the risk-averse γ is drawn per instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UtilityKind {
    #[serde(rename = "rn")]
    RiskNeutral,
    #[serde(rename = "ra")]
    RiskAverse,
}

impl UtilityKind {
    pub const ALL: [UtilityKind; 2] = [UtilityKind::RiskNeutral, UtilityKind::RiskAverse];
}

impl fmt::Display for UtilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            UtilityKind::RiskNeutral => "rn",
            UtilityKind::RiskAverse => "ra",
        })
    }
}

impl FromStr for UtilityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rn" | "risk-neutral" | "neutral" => Ok(UtilityKind::RiskNeutral),
            "ra" | "risk-averse" | "averse" | "exponential" => Ok(UtilityKind::RiskAverse),
            _ => Err(Error::Parse(format!("unknown utility kind {s:?}"))),
        }
    }
}

/// The experimental cell an instance belongs to, plus its index within the cell.
/// Renders as e.g. `A-vB-ra-007`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct InstanceId {
    pub set: ProblemSet,
    pub value: ValueKind,
    pub utility: UtilityKind,
    pub index: u32,
}

impl fmt::Display for InstanceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = match self.value {
            ValueKind::A => "vA",
            ValueKind::B => "vB",
        };
        write!(f, "{}-{}-{}-{:03}", self.set, v, self.utility, self.index)
    }
}

impl FromStr for InstanceId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("malformed instance id {s:?}"));
        let parts: Vec<&str> = s.split('-').collect();
        if parts.len() != 4 {
            return Err(bad());
        }
        let value = match parts[1] {
            "vA" => ValueKind::A,
            "vB" => ValueKind::B,
            _ => return Err(bad()),
        };
        Ok(InstanceId {
            set: parts[0].parse()?,
            value,
            utility: parts[2].parse()?,
            index: parts[3].parse().map_err(|_| bad())?,
        })
    }
}

impl From<InstanceId> for String {
    fn from(id: InstanceId) -> String {
        id.to_string()
    }
}

impl TryFrom<String> for InstanceId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Random draws behind the true magnitudes, kept for audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    /// attribute whose magnitude is derived from the others (0-based)
    pub pivot: usize,
    pub alpha: f64,
    /// raw weights c_j; zero at the pivot
    pub raw_weights: Vec<f64>,
    /// normalized weights d_j; zero at the pivot
    pub weights: Vec<f64>,
    /// x_ij in [0, 1]
    pub positions: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct Instance {
    id: InstanceId,
    seed: u64,
    mu: Vec<Vec<i64>>,
    error_assignment: Vec<usize>,
    utility: UtilityFunctionSpec,
    latent: LatentParams,
    spec: ProblemSetSpec,
    errors: Vec<ErrorModel>,
    preference: Arc<Preference>,
    truth: TrueUtilities,
}

impl PartialEq for Instance {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.seed == other.seed
            && self.mu == other.mu
            && self.error_assignment == other.error_assignment
            && self.utility == other.utility
            && self.latent == other.latent
    }
}

/// On-disk form of an instance.
#[derive(Serialize, Deserialize)]
struct InstanceFile {
    id: InstanceId,
    set: ProblemSet,
    seed: u64,
    value_function: ValueKind,
    utility_function: UtilityFunctionSpec,
    /// attribute j uses row error_assignment[j] of the set's error table
    error_assignment: Vec<usize>,
    mu: Vec<Vec<i64>>,
    latent: LatentParams,
}

impl Instance {
    /// Assembles an instance from its parts, validating dimensions and ranges.
    pub fn new(
        id: InstanceId,
        seed: u64,
        mu: Vec<Vec<i64>>,
        error_assignment: Vec<usize>,
        utility: UtilityFunctionSpec,
        latent: LatentParams,
    ) -> Result<Self> {
        let spec = ProblemSetSpec::new(id.set);
        if mu.len() != spec.alternatives || mu.iter().any(|r| r.len() != spec.attributes) {
            return Err(Error::InvalidDimensions(format!(
                "set {} needs a {}x{} magnitude matrix",
                spec.name, spec.alternatives, spec.attributes
            )));
        }
        if let Some(x) = mu.iter().flatten().find(|&&x| x < 1 || x > spec.max_magnitude) {
            return Err(Error::OutOfRange {
                what: "true magnitude",
                value: *x as f64,
                min: 1.0,
                max: spec.max_magnitude as f64,
            });
        }
        let mut sorted = error_assignment.clone();
        sorted.sort_unstable();
        if sorted != (0..spec.attributes).collect::<Vec<_>>() {
            return Err(Error::InvalidDimensions(format!(
                "error assignment {error_assignment:?} is not a permutation of the error table"
            )));
        }
        let vspec = ValueFunctionSpec::new(id.value, vec![spec.max_magnitude; spec.attributes])?;
        let preference = Arc::new(Preference::new(vspec, utility)?);
        let truth = true_utilities(&mu, &preference)?;
        let errors = error_assignment
            .iter()
            .map(|&row| spec.error_table[row].clone())
            .collect();
        Ok(Instance {
            id,
            seed,
            mu,
            error_assignment,
            utility,
            latent,
            spec,
            errors,
            preference,
            truth,
        })
    }

    pub fn id(&self) -> InstanceId {
        self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn spec(&self) -> &ProblemSetSpec {
        &self.spec
    }

    pub fn alternatives(&self) -> usize {
        self.spec.alternatives
    }

    pub fn attributes(&self) -> usize {
        self.spec.attributes
    }

    pub fn mu(&self) -> &[Vec<i64>] {
        &self.mu
    }

    pub fn error_assignment(&self) -> &[usize] {
        &self.error_assignment
    }

    /// Error model of each attribute, after assignment.
    pub fn error_models(&self) -> &[ErrorModel] {
        &self.errors
    }

    pub fn preference(&self) -> &Arc<Preference> {
        &self.preference
    }

    pub fn utility_spec(&self) -> &UtilityFunctionSpec {
        &self.utility
    }

    pub fn latent(&self) -> &LatentParams {
        &self.latent
    }

    pub fn truth(&self) -> &TrueUtilities {
        &self.truth
    }

    /// Same instance with every attribute measured without error.
    pub fn with_exact_measurements(mut self) -> Self {
        self.errors = vec![ErrorModel::exact(); self.errors.len()];
        self
    }

    pub fn to_json(&self) -> Result<String> {
        let file = InstanceFile {
            id: self.id,
            set: self.spec.name,
            seed: self.seed,
            value_function: self.id.value,
            utility_function: self.utility,
            error_assignment: self.error_assignment.clone(),
            mu: self.mu.clone(),
            latent: self.latent.clone(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(text)?;
        if file.set != file.id.set || file.value_function != file.id.value {
            return Err(Error::Parse(format!(
                "instance {} disagrees with its set/value fields",
                file.id
            )));
        }
        Self::new(
            file.id,
            file.seed,
            file.mu,
            file.error_assignment,
            file.utility_function,
            file.latent,
        )
    }
}

/// Generates one instance deterministically from `seed`.
///
/// Draw order is pivot, α, raw weights, positions, error permutation, then γ,
/// so instances that differ only in value or utility kind share magnitudes
/// and error assignment.
pub fn generate_instance(
    set: ProblemSet,
    value: ValueKind,
    utility: UtilityKind,
    index: u32,
    seed: u64,
) -> Instance {
    let spec = ProblemSetSpec::new(set);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = spec.attributes;
    let pivot = rng.random_range(0..k);
    let alpha = rng.random_range(1.0..=3.0);
    let raw_weights: Vec<f64> = (0..k)
        .map(|j| if j == pivot { 0.0 } else { rng.random_range(0.0..=1.0) })
        .collect();
    let weights = normalize_weights(&raw_weights, pivot);
    let positions: Vec<Vec<f64>> = (0..spec.alternatives)
        .map(|_| {
            let mut x: Vec<f64> = (0..k)
                .map(|j| if j == pivot { 0.0 } else { rng.random::<f64>() })
                .collect();
            x[pivot] = pivot_position(&x, &weights, alpha, pivot);
            x
        })
        .collect();
    let mu = positions
        .iter()
        .map(|row| row.iter().map(|&x| magnitude_from_position(x, spec.max_magnitude)).collect())
        .collect();
    let mut error_assignment: Vec<usize> = (0..k).collect();
    error_assignment.shuffle(&mut rng);
    let uspec = match utility {
        UtilityKind::RiskNeutral => UtilityFunctionSpec::RiskNeutral,
        UtilityKind::RiskAverse => UtilityFunctionSpec::Exponential {
            gamma: rng.random_range(1.0..=10.0),
        },
    };
    let latent = LatentParams {
        pivot,
        alpha,
        raw_weights,
        weights,
        positions,
    };
    let id = InstanceId {
        set,
        value,
        utility,
        index,
    };
    Instance::new(id, seed, mu, error_assignment, uspec, latent)
        .expect("generated instances are valid")
}

/// Seed of instance `index` of a problem set. Cells of the same set share it.
pub fn instance_seed(root: u64, set: ProblemSet, index: u32) -> u64 {
    let s = crate::sim::splitmix64(root ^ 0x1A57_A11C_E5EE_D000);
    crate::sim::splitmix64(crate::sim::splitmix64(s ^ set as u64) ^ index as u64)
}

/// `count` instances of one cell, seeded from `root`.
pub fn generate_cell(
    set: ProblemSet,
    value: ValueKind,
    utility: UtilityKind,
    count: u32,
    root: u64,
) -> Vec<Instance> {
    (0..count)
        .map(|n| generate_instance(set, value, utility, n, instance_seed(root, set, n)))
        .collect()
}

/// d_j = c_j / Σ_{g≠h} c_g, zero at the pivot. All-zero raw weights fall back
/// to equal weights.
fn normalize_weights(raw: &[f64], pivot: usize) -> Vec<f64> {
    let total: f64 = raw.iter().enumerate().filter(|&(j, _)| j != pivot).map(|(_, c)| c).sum();
    let others = (raw.len() - 1) as f64;
    raw.iter()
        .enumerate()
        .map(|(j, &c)| match (j == pivot, total > 0.0) {
            (true, _) => 0.0,
            (false, true) => c / total,
            (false, false) => 1.0 / others,
        })
        .collect()
}

/// x_ih = 1 - Σ_{j≠h} d_j x_ij^α.
fn pivot_position(x: &[f64], weights: &[f64], alpha: f64, pivot: usize) -> f64 {
    1.0 - x
        .iter()
        .zip(weights)
        .enumerate()
        .filter(|&(j, _)| j != pivot)
        .map(|(_, (xj, d))| d * xj.powf(alpha))
        .sum::<f64>()
}

/// 1 + ⌊x·max⌋, clamped to max (x = 1 would otherwise give max + 1).
fn magnitude_from_position(x: f64, max: i64) -> i64 {
    (1 + (x * max as f64).floor() as i64).min(max)
}

/// One noisy measurement of attribute `j` of alternative `i`; may fall outside 1..=max.
pub fn draw_sample<R: Rng + ?Sized>(instance: &Instance, i: usize, j: usize, rng: &mut R) -> i64 {
    instance.mu[i][j] + instance.errors[j].pmf().sample(rng)
}
