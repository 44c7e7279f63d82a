//! The decision-maker's belief state: one magnitude pmf per
//! (alternative, attribute), the utility distribution of every alternative,
//! and the two selection rules built on them.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pmf::{bayes_update, ErrorModel, Pmf};
use crate::preference::{utility_distribution, Preference};

/// Scores closer than this are treated as tied; ties go to the lowest index.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Index of the largest value, preferring the lowest index among ties.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (n, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] + TIE_TOLERANCE {
            best = n;
        }
    }
    best
}

/// Which quality measure drives selection (and, for the sequential phase,
/// the lookahead payoff).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionRule {
    /// Select the greatest expected utility (opportunity-cost loss).
    #[serde(rename = "I")]
    ExpectedUtility,
    /// Select the greatest probability of being best (0-1 loss).
    #[serde(rename = "II")]
    ProbabilityOfBest,
}

impl DecisionRule {
    pub const ALL: [DecisionRule; 2] = [DecisionRule::ExpectedUtility, DecisionRule::ProbabilityOfBest];
}

impl fmt::Display for DecisionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            DecisionRule::ExpectedUtility => "I",
            DecisionRule::ProbabilityOfBest => "II",
        })
    }
}

impl FromStr for DecisionRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(DecisionRule::ExpectedUtility),
            "II" | "2" => Ok(DecisionRule::ProbabilityOfBest),
            _ => Err(Error::Parse(format!("unknown decision rule {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BeliefStateRepr", into = "BeliefStateRepr")]
pub struct BeliefState {
    stage: usize,
    alternatives: usize,
    attributes: usize,
    /// row-major: alternative i, attribute j at i * attributes + j
    magnitudes: Vec<Pmf>,
    utilities: Vec<Pmf>,
    preference: Arc<Preference>,
}

#[derive(Serialize, Deserialize)]
struct BeliefStateRepr {
    stage: usize,
    preference: Preference,
    magnitudes: Vec<Vec<Pmf>>,
}

impl TryFrom<BeliefStateRepr> for BeliefState {
    type Error = Error;

    fn try_from(r: BeliefStateRepr) -> Result<Self> {
        let mut s = BeliefState::from_magnitudes(r.magnitudes, Arc::new(r.preference))?;
        s.stage = r.stage;
        Ok(s)
    }
}

impl From<BeliefState> for BeliefStateRepr {
    fn from(s: BeliefState) -> Self {
        let magnitudes = s
            .magnitudes
            .chunks(s.attributes)
            .map(|row| row.to_vec())
            .collect();
        BeliefStateRepr {
            stage: s.stage,
            preference: (*s.preference).clone(),
            magnitudes,
        }
    }
}

impl BeliefState {
    /// Uniform priors on `1..=max` for every attribute of `m` alternatives.
    pub fn init_uniform(m: usize, preference: Arc<Preference>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidDimensions("need at least one alternative".into()));
        }
        let row = preference
            .value_spec()
            .max_magnitudes
            .iter()
            .map(|&max| Pmf::uniform(1, max))
            .collect::<Result<Vec<_>>>()?;
        Self::from_magnitudes(vec![row; m], preference)
    }

    /// Stage-0 state from arbitrary magnitude beliefs, one row per alternative.
    pub fn from_magnitudes(rows: Vec<Vec<Pmf>>, preference: Arc<Preference>) -> Result<Self> {
        let m = rows.len();
        let k = preference.attributes();
        if m == 0 {
            return Err(Error::InvalidDimensions("need at least one alternative".into()));
        }
        let maxima = &preference.value_spec().max_magnitudes;
        for row in &rows {
            if row.len() != k {
                return Err(Error::InvalidDimensions(format!(
                    "belief row has {} attributes, expected {k}",
                    row.len()
                )));
            }
            for (pmf, &max) in row.iter().zip(maxima) {
                if pmf.min_key() < 1 || pmf.max_key() > max {
                    return Err(Error::InvalidDimensions(format!(
                        "belief support {}..={} outside 1..={max}",
                        pmf.min_key(),
                        pmf.max_key()
                    )));
                }
            }
        }
        let utilities = rows
            .iter()
            .map(|row| utility_distribution(row, &preference))
            .collect();
        Ok(BeliefState {
            stage: 0,
            alternatives: m,
            attributes: k,
            magnitudes: rows.into_iter().flatten().collect(),
            utilities,
            preference,
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn preference(&self) -> &Arc<Preference> {
        &self.preference
    }

    pub fn magnitude(&self, i: usize, j: usize) -> &Pmf {
        &self.magnitudes[i * self.attributes + j]
    }

    pub fn magnitude_row(&self, i: usize) -> &[Pmf] {
        &self.magnitudes[i * self.attributes..(i + 1) * self.attributes]
    }

    /// Utility distribution of alternative `i` over lattice keys.
    pub fn utility_dist(&self, i: usize) -> &Pmf {
        &self.utilities[i]
    }

    pub fn utility_dists(&self) -> &[Pmf] {
        &self.utilities
    }

    /// Conditions belief (i, j) on sample `w` and refreshes alternative i's
    /// utility distribution. Nothing else changes.
    pub fn apply_sample(&mut self, i: usize, j: usize, w: i64, error: &ErrorModel) -> Result<()> {
        self.check_pair(i, j)?;
        let n = i * self.attributes + j;
        self.magnitudes[n] = bayes_update(&self.magnitudes[n], error, w)?;
        self.utilities[i] = utility_distribution(self.magnitude_row(i), &self.preference);
        self.stage += 1;
        Ok(())
    }

    /// Like [`apply_sample`](Self::apply_sample) but returns the new state.
    pub fn with_sample(&self, i: usize, j: usize, w: i64, error: &ErrorModel) -> Result<Self> {
        let mut next = self.clone();
        next.apply_sample(i, j, w, error)?;
        Ok(next)
    }

    pub(crate) fn check_pair(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.alternatives || j >= self.attributes {
            return Err(Error::InvalidDimensions(format!(
                "pair ({i}, {j}) outside {}x{}",
                self.alternatives, self.attributes
            )));
        }
        Ok(())
    }

    pub fn expected_utility(&self, i: usize) -> f64 {
        let pref = &self.preference;
        self.utilities[i].expectation(|key| pref.utility_of_key(key))
    }

    pub fn expected_utilities(&self) -> Vec<f64> {
        (0..self.alternatives).map(|i| self.expected_utility(i)).collect()
    }

    /// Probability that each alternative is best under the index tie-break.
    pub fn prob_best(&self) -> Vec<f64> {
        prob_best(&self.utilities)
    }

    pub fn select_by_expected_utility(&self) -> usize {
        argmax_lowest(&self.expected_utilities())
    }

    pub fn select_by_prob_best(&self) -> usize {
        argmax_lowest(&self.prob_best())
    }

    pub fn select(&self, rule: DecisionRule) -> usize {
        match rule {
            DecisionRule::ExpectedUtility => self.select_by_expected_utility(),
            DecisionRule::ProbabilityOfBest => self.select_by_prob_best(),
        }
    }
}

/// Non-strict CDFs of every distribution on a shared dense key grid starting at `lo`.
pub(crate) fn dense_cdfs(dists: &[Pmf], lo: i64, width: usize) -> Vec<Vec<f64>> {
    dists
        .iter()
        .map(|d| {
            let mut cdf = vec![0.0; width];
            for (z, p) in d.iter() {
                cdf[(z - lo) as usize] += p;
            }
            let mut run = 0.0;
            for c in cdf.iter_mut() {
                run += *c;
                *c = run;
            }
            cdf
        })
        .collect()
}

/// P{Zᵢ beats every other Zₕ}, where a tie is won by the lower index.
pub fn prob_best(dists: &[Pmf]) -> Vec<f64> {
    if dists.len() == 1 {
        return vec![1.0];
    }
    let lo = dists.iter().map(Pmf::min_key).min().expect("at least one distribution");
    let hi = dists.iter().map(Pmf::max_key).max().unwrap();
    let width = (hi - lo + 1) as usize;
    let cdf = dense_cdfs(dists, lo, width);
    dists
        .iter()
        .enumerate()
        .map(|(i, d)| {
            d.iter()
                .map(|(z, p)| {
                    let n = (z - lo) as usize;
                    let mut q = p;
                    for (h, c) in cdf.iter().enumerate() {
                        if h < i {
                            q *= if n == 0 { 0.0 } else { c[n - 1] };
                        } else if h > i {
                            q *= c[n];
                        }
                    }
                    q
                })
                .sum()
        })
        .collect()
}
