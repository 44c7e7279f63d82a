//! Value and utility functions, and the exact utility distribution of an
//! alternative under independent attribute beliefs.
//!
//! Both supported value functions are strictly increasing functions of an
//! integer statistic of the magnitude vector (a weighted sum for the additive
//! form, a sum of squares for the compensating form). That statistic is the
//! *lattice key*: equal keys mean equal value, and ordering keys orders
//! utilities. Utility distributions are therefore pmfs over lattice keys and
//! are built by convolving per-attribute key contributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::Pmf;

/// Keys above this are evaluated on demand instead of through a table.
const MAX_TABLE_KEYS: i64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ValueKind {
    /// Additive, attribute j weighted by j / (1 + ... + k).
    A,
    /// Root-mean-square of single-attribute values; favors compensating profiles.
    B,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueFunctionSpec {
    pub kind: ValueKind,
    /// Largest magnitude of each attribute; its length is the attribute count.
    pub max_magnitudes: Vec<i64>,
}

impl ValueFunctionSpec {
    pub fn new(kind: ValueKind, max_magnitudes: Vec<i64>) -> Result<Self> {
        let spec = ValueFunctionSpec {
            kind,
            max_magnitudes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn attributes(&self) -> usize {
        self.max_magnitudes.len()
    }

    fn validate(&self) -> Result<()> {
        if self.max_magnitudes.len() < 2 {
            return Err(Error::InvalidDimensions(format!(
                "need at least 2 attributes, got {}",
                self.max_magnitudes.len()
            )));
        }
        if let Some(m) = self.max_magnitudes.iter().find(|&&m| m < 1) {
            return Err(Error::InvalidDimensions(format!(
                "maximum magnitude {m} must be positive"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityFunctionSpec {
    RiskNeutral,
    /// (1 - e^{-γv}) / (1 - e^{-γ}), risk averse for γ > 0.
    Exponential { gamma: f64 },
}

impl UtilityFunctionSpec {
    pub fn is_risk_neutral(&self) -> bool {
        matches!(self, UtilityFunctionSpec::RiskNeutral)
    }
}

pub fn single_attr_value(x: i64, max_x: i64) -> Result<f64> {
    if x < 1 || x > max_x {
        return Err(Error::OutOfRange {
            what: "magnitude",
            value: x as f64,
            min: 1.0,
            max: max_x as f64,
        });
    }
    Ok(x as f64 / max_x as f64)
}

/// Multi-attribute value of a magnitude vector, in [0, 1].
pub fn value(spec: &ValueFunctionSpec, x: &[i64]) -> Result<f64> {
    let k = spec.attributes();
    if x.len() != k {
        return Err(Error::InvalidDimensions(format!(
            "magnitude vector has {} entries, expected {k}",
            x.len()
        )));
    }
    let singles = x
        .iter()
        .zip(&spec.max_magnitudes)
        .map(|(&xj, &mj)| single_attr_value(xj, mj))
        .collect::<Result<Vec<_>>>()?;
    Ok(match spec.kind {
        ValueKind::A => {
            let bk = (k * (k + 1) / 2) as f64;
            singles
                .iter()
                .enumerate()
                .map(|(j, v)| (j + 1) as f64 / bk * v)
                .sum()
        }
        ValueKind::B => (singles.iter().map(|v| v * v).sum::<f64>() / k as f64).sqrt(),
    })
}

pub fn utility(spec: &UtilityFunctionSpec, v: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::OutOfRange {
            what: "value",
            value: v,
            min: 0.0,
            max: 1.0,
        });
    }
    Ok(utility_unchecked(spec, v))
}

fn utility_unchecked(spec: &UtilityFunctionSpec, v: f64) -> f64 {
    match *spec {
        UtilityFunctionSpec::RiskNeutral => v,
        UtilityFunctionSpec::Exponential { gamma } => {
            (-(-gamma * v).exp_m1()) / (-(-gamma).exp_m1())
        }
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Integer key per magnitude vector with key ↦ value strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueLattice {
    kind: ValueKind,
    /// lcm of the maxima divided by each attribute's maximum
    scale: Vec<i64>,
    common_max: i64,
    max_key: i64,
}

impl ValueLattice {
    pub fn new(spec: &ValueFunctionSpec) -> Result<Self> {
        spec.validate()?;
        let common_max = spec
            .max_magnitudes
            .iter()
            .fold(1, |l, &m| l / gcd(l, m) * m);
        let scale: Vec<i64> = spec.max_magnitudes.iter().map(|m| common_max / m).collect();
        let mut lattice = ValueLattice {
            kind: spec.kind,
            scale,
            common_max,
            max_key: 0,
        };
        lattice.max_key = spec
            .max_magnitudes
            .iter()
            .enumerate()
            .map(|(j, &m)| lattice.contribution(j, m))
            .sum();
        Ok(lattice)
    }

    pub fn attributes(&self) -> usize {
        self.scale.len()
    }

    /// Contribution of attribute `j` (0-based) at magnitude `x` to the key.
    #[inline]
    pub fn contribution(&self, j: usize, x: i64) -> i64 {
        let s = self.scale[j] * x;
        match self.kind {
            ValueKind::A => (j as i64 + 1) * s,
            ValueKind::B => s * s,
        }
    }

    pub fn key(&self, x: &[i64]) -> i64 {
        x.iter()
            .enumerate()
            .map(|(j, &xj)| self.contribution(j, xj))
            .sum()
    }

    pub fn max_key(&self) -> i64 {
        self.max_key
    }

    pub fn value_of_key(&self, key: i64) -> f64 {
        let k = self.attributes() as f64;
        let l = self.common_max as f64;
        match self.kind {
            ValueKind::A => key as f64 / (k * (k + 1.0) / 2.0 * l),
            ValueKind::B => (key as f64 / (k * l * l)).sqrt(),
        }
    }
}

/// Value function, utility function and the memoized key ↦ utility map.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "PreferenceRepr", into = "PreferenceRepr")]
pub struct Preference {
    vspec: ValueFunctionSpec,
    uspec: UtilityFunctionSpec,
    lattice: ValueLattice,
    table: Option<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct PreferenceRepr {
    value: ValueFunctionSpec,
    utility: UtilityFunctionSpec,
}

impl TryFrom<PreferenceRepr> for Preference {
    type Error = Error;

    fn try_from(r: PreferenceRepr) -> Result<Self> {
        Preference::new(r.value, r.utility)
    }
}

impl From<Preference> for PreferenceRepr {
    fn from(p: Preference) -> Self {
        PreferenceRepr {
            value: p.vspec,
            utility: p.uspec,
        }
    }
}

impl PartialEq for Preference {
    fn eq(&self, other: &Self) -> bool {
        self.vspec == other.vspec && self.uspec == other.uspec
    }
}

impl Preference {
    pub fn new(vspec: ValueFunctionSpec, uspec: UtilityFunctionSpec) -> Result<Self> {
        if let UtilityFunctionSpec::Exponential { gamma } = uspec {
            if !(gamma.is_finite() && gamma > 0.0) {
                return Err(Error::OutOfRange {
                    what: "gamma",
                    value: gamma,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        let lattice = ValueLattice::new(&vspec)?;
        let table = (lattice.max_key() <= MAX_TABLE_KEYS).then(|| {
            (0..=lattice.max_key())
                .map(|key| utility_unchecked(&uspec, lattice.value_of_key(key)))
                .collect()
        });
        Ok(Preference {
            vspec,
            uspec,
            lattice,
            table,
        })
    }

    pub fn value_spec(&self) -> &ValueFunctionSpec {
        &self.vspec
    }

    pub fn utility_spec(&self) -> &UtilityFunctionSpec {
        &self.uspec
    }

    pub fn lattice(&self) -> &ValueLattice {
        &self.lattice
    }

    pub fn attributes(&self) -> usize {
        self.lattice.attributes()
    }

    #[inline]
    pub fn utility_of_key(&self, key: i64) -> f64 {
        match &self.table {
            Some(t) => t[key as usize],
            None => utility_unchecked(&self.uspec, self.lattice.value_of_key(key)),
        }
    }

    /// Dense key ↦ utility table, when the lattice is small enough to tabulate.
    pub(crate) fn utility_table(&self) -> Option<&[f64]> {
        self.table.as_deref()
    }

    /// Pmf of one attribute's contribution to the lattice key.
    pub fn contribution_pmf(&self, j: usize, belief: &Pmf) -> Pmf {
        belief.map_keys_increasing(|x| self.lattice.contribution(j, x))
    }
}

/// Exact distribution of an alternative's utility, as a pmf over lattice keys.
///
/// `beliefs[j]` is the magnitude belief for attribute `j`; magnitudes must lie
/// in `1..=max`. Use [`Preference::utility_of_key`] to read utilities.
pub fn utility_distribution(beliefs: &[Pmf], pref: &Preference) -> Pmf {
    assert_eq!(beliefs.len(), pref.attributes(), "one belief per attribute");
    let mut acc = pref.contribution_pmf(0, &beliefs[0]);
    for (j, b) in beliefs.iter().enumerate().skip(1) {
        acc = acc.convolve(&pref.contribution_pmf(j, b));
    }
    acc
}

/// Utility distribution by enumerating every magnitude vector and merging
/// utilities that agree within 1e-12. Usable for value functions without an
/// integer lattice; exponential in the attribute count.
pub fn enumerate_utility_distribution(
    beliefs: &[Pmf],
    vspec: &ValueFunctionSpec,
    uspec: &UtilityFunctionSpec,
) -> Result<Vec<(f64, f64)>> {
    let k = vspec.attributes();
    if beliefs.len() != k {
        return Err(Error::InvalidDimensions(format!(
            "{} beliefs for {k} attributes",
            beliefs.len()
        )));
    }
    let mut outcomes = Vec::new();
    let mut idx = vec![0usize; k];
    let mut x = vec![0i64; k];
    loop {
        let mut p = 1.0;
        for j in 0..k {
            x[j] = beliefs[j].support()[idx[j]];
            p *= beliefs[j].probs()[idx[j]];
        }
        outcomes.push((utility(uspec, value(vspec, &x)?)?, p));
        let mut j = 0;
        loop {
            idx[j] += 1;
            if idx[j] < beliefs[j].len() {
                break;
            }
            idx[j] = 0;
            j += 1;
            if j == k {
                return Ok(merge_sorted(outcomes));
            }
        }
    }
}

fn merge_sorted(mut outcomes: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    outcomes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (u, p) in outcomes {
        match merged.last_mut() {
            Some(last) if (u - last.0).abs() <= 1e-12 => last.1 += p,
            _ => merged.push((u, p)),
        }
    }
    merged
}

/// True utilities ξᵢ of every alternative, the best utility ξ* and the set A*
/// of alternatives attaining it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueUtilities {
    pub utilities: Vec<f64>,
    pub best: f64,
    pub best_set: Vec<usize>,
}

impl TrueUtilities {
    pub fn is_best(&self, i: usize) -> bool {
        self.best_set.contains(&i)
    }

    pub fn opportunity_cost(&self, i: usize) -> f64 {
        self.best - self.utilities[i]
    }

    /// Alternatives ordered from best to worst true utility, ties by index.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.utilities.len()).collect();
        order.sort_by(|&a, &b| self.utilities[b].total_cmp(&self.utilities[a]).then(a.cmp(&b)));
        order
    }
}

/// ξᵢ for one magnitude vector. Computed through the lattice key so that
/// vectors with equal value get bit-identical utilities.
pub fn true_utility(mu: &[i64], pref: &Preference) -> Result<f64> {
    // range check
    value(pref.value_spec(), mu)?;
    Ok(pref.utility_of_key(pref.lattice().key(mu)))
}

pub fn true_utilities(mu: &[Vec<i64>], pref: &Preference) -> Result<TrueUtilities> {
    if mu.is_empty() {
        return Err(Error::InvalidDimensions("no alternatives".into()));
    }
    let utilities = mu
        .iter()
        .map(|row| true_utility(row, pref))
        .collect::<Result<Vec<_>>>()?;
    let best = utilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let best_set = (0..utilities.len())
        .filter(|&i| utilities[i] == best)
        .collect();
    Ok(TrueUtilities {
        utilities,
        best,
        best_set,
    })
}
