//! Finite discrete distributions over integer keys.
//!
//! A [`Pmf`] holds a strictly increasing list of integer keys (attribute
//! magnitudes, error offsets, sample values or utility-lattice keys) and the
//! probability attached to each. Zero-probability keys are never stored, and
//! every constructor renormalizes so the stored masses sum to one.
//!
//! The Bayesian machinery used by the allocation procedures lives here too:
//! [`bayes_update`] conditions a magnitude belief on one noisy sample and
//! [`predictive_sample_dist`] gives the distribution of the next sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute tolerance for probability comparisons.
pub const PROB_TOLERANCE: f64 = 1e-12;

/// Tolerance accepted on the input mass of [`Pmf::new`] before renormalizing.
const INPUT_MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PmfRepr", into = "PmfRepr")]
pub struct Pmf {
    support: Vec<i64>,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct PmfRepr {
    support: Vec<i64>,
    probs: Vec<f64>,
}

impl TryFrom<PmfRepr> for Pmf {
    type Error = Error;

    fn try_from(r: PmfRepr) -> Result<Self> {
        validate_keys_and_weights(&r.support, &r.probs)?;
        let total: f64 = r.probs.iter().sum();
        if (total - 1.0).abs() > INPUT_MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        // stored probabilities are kept bit-for-bit
        let (support, probs) = r
            .support
            .into_iter()
            .zip(r.probs)
            .filter(|&(_, p)| p > 0.0)
            .unzip();
        Ok(Pmf { support, probs })
    }
}

impl From<Pmf> for PmfRepr {
    fn from(p: Pmf) -> Self {
        PmfRepr {
            support: p.support,
            probs: p.probs,
        }
    }
}

impl Pmf {
    /// Builds a pmf from keys and probabilities that already sum to one
    /// (within 1e-9). Zero entries are dropped and the rest renormalized.
    pub fn new(support: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        Self::from_parts(support, probs)
    }

    /// Builds a pmf from arbitrary non-negative weights, normalizing by their sum.
    pub fn from_weights(support: Vec<i64>, weights: Vec<f64>) -> Result<Self> {
        validate_keys_and_weights(&support, &weights)?;
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidPmf("total weight is zero".into()));
        }
        Ok(Self::normalized_unchecked(support, weights, total))
    }

    fn from_parts(support: Vec<i64>, probs: Vec<f64>) -> Result<Self> {
        validate_keys_and_weights(&support, &probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > INPUT_MASS_TOLERANCE {
            return Err(Error::InvalidPmf(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self::normalized_unchecked(support, probs, total))
    }

    fn normalized_unchecked(support: Vec<i64>, weights: Vec<f64>, total: f64) -> Self {
        let mut keys = Vec::with_capacity(support.len());
        let mut probs = Vec::with_capacity(support.len());
        for (k, w) in support.into_iter().zip(weights) {
            if w > 0.0 {
                keys.push(k);
                probs.push(w / total);
            }
        }
        Pmf {
            support: keys,
            probs,
        }
    }

    /// Normalizes a dense weight vector whose index `n` corresponds to key `offset + n`.
    /// Returns `None` if every weight is zero.
    pub(crate) fn from_dense(offset: i64, weights: &[f64]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if total.is_nan() || total <= 0.0 {
            return None;
        }
        let mut support = Vec::new();
        let mut probs = Vec::new();
        for (n, &w) in weights.iter().enumerate() {
            if w > 0.0 {
                support.push(offset + n as i64);
                probs.push(w / total);
            }
        }
        Some(Pmf { support, probs })
    }

    pub fn point(key: i64) -> Self {
        Pmf {
            support: vec![key],
            probs: vec![1.0],
        }
    }

    /// Uniform distribution over the inclusive key range `lo..=hi`.
    pub fn uniform(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidPmf(format!("empty range {lo}..={hi}")));
        }
        let n = (hi - lo + 1) as usize;
        Ok(Pmf {
            support: (lo..=hi).collect(),
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn support(&self) -> &[i64] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.support.iter().copied().zip(self.probs.iter().copied())
    }

    pub fn min_key(&self) -> i64 {
        self.support[0]
    }

    pub fn max_key(&self) -> i64 {
        self.support[self.support.len() - 1]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability of `key`; zero off the support.
    pub fn prob(&self, key: i64) -> f64 {
        match self.support.binary_search(&key) {
            Ok(n) => self.probs[n],
            Err(_) => 0.0,
        }
    }

    pub fn is_point_mass(&self) -> bool {
        self.support.len() == 1
    }

    /// P{X <= z}.
    pub fn cdf_at(&self, z: f64) -> f64 {
        self.iter()
            .take_while(|&(k, _)| (k as f64) <= z)
            .map(|(_, p)| p)
            .sum()
    }

    /// P{X < z}.
    pub fn cdf_below(&self, z: f64) -> f64 {
        self.iter()
            .take_while(|&(k, _)| (k as f64) < z)
            .map(|(_, p)| p)
            .sum()
    }

    /// Σ f(key)·p(key).
    pub fn expectation<F: Fn(i64) -> f64>(&self, f: F) -> f64 {
        self.iter().map(|(k, p)| f(k) * p).sum()
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|k| k as f64)
    }

    /// Distribution of the sum of two independent variables.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let offset = self.min_key() + other.min_key();
        let width = (self.max_key() + other.max_key() - offset + 1) as usize;
        let mut acc = vec![0.0; width];
        for (a, pa) in self.iter() {
            let base = (a + other.min_key() - offset) as usize;
            for (b, pb) in other.iter() {
                acc[base + (b - other.min_key()) as usize] += pa * pb;
            }
        }
        Pmf::from_dense(offset, &acc).expect("convolution of valid pmfs has positive mass")
    }

    /// Draws one key by inverting the CDF at a uniform variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        let u: f64 = rng.random();
        let mut run = 0.0;
        for (k, p) in self.iter() {
            run += p;
            if u < run {
                return k;
            }
        }
        self.max_key()
    }

    /// Image of the pmf under a strictly increasing key map.
    pub fn map_keys_increasing<F: Fn(i64) -> i64>(&self, f: F) -> Pmf {
        let support: Vec<i64> = self.support.iter().map(|&k| f(k)).collect();
        debug_assert!(support.windows(2).all(|w| w[0] < w[1]));
        Pmf {
            support,
            probs: self.probs.clone(),
        }
    }
}

fn validate_keys_and_weights(support: &[i64], weights: &[f64]) -> Result<()> {
    if support.len() != weights.len() {
        return Err(Error::InvalidPmf(format!(
            "{} keys but {} probabilities",
            support.len(),
            weights.len()
        )));
    }
    if support.is_empty() {
        return Err(Error::InvalidPmf("empty support".into()));
    }
    if support.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidPmf("keys must be strictly increasing".into()));
    }
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidPmf(format!("invalid probability {w}")));
    }
    Ok(())
}

/// Additive measurement error for one attribute: symmetric about zero with its
/// largest probability at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ErrorModelRepr", into = "ErrorModelRepr")]
pub struct ErrorModel {
    pmf: Pmf,
    nominal_std_dev: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct ErrorModelRepr {
    pmf: Pmf,
    nominal_std_dev: Option<f64>,
}

impl TryFrom<ErrorModelRepr> for ErrorModel {
    type Error = Error;

    fn try_from(r: ErrorModelRepr) -> Result<Self> {
        let mut m = ErrorModel::new(r.pmf)?;
        m.nominal_std_dev = r.nominal_std_dev;
        Ok(m)
    }
}

impl From<ErrorModel> for ErrorModelRepr {
    fn from(m: ErrorModel) -> Self {
        ErrorModelRepr {
            pmf: m.pmf,
            nominal_std_dev: m.nominal_std_dev,
        }
    }
}

impl ErrorModel {
    pub fn new(pmf: Pmf) -> Result<Self> {
        let p0 = pmf.prob(0);
        for (e, p) in pmf.iter() {
            if (p - pmf.prob(-e)).abs() > PROB_TOLERANCE {
                return Err(Error::InvalidErrorModel(format!(
                    "not symmetric: p({e}) = {p} but p({}) = {}",
                    -e,
                    pmf.prob(-e)
                )));
            }
            if p > p0 + PROB_TOLERANCE {
                return Err(Error::InvalidErrorModel(format!(
                    "p({e}) = {p} exceeds p(0) = {p0}"
                )));
            }
        }
        Ok(ErrorModel {
            pmf,
            nominal_std_dev: None,
        })
    }

    /// Builds an error model from tabulated (possibly rounded) weights on
    /// consecutive offsets starting at `first_offset`; weights are renormalized.
    pub fn from_table(first_offset: i64, weights: &[f64], nominal_std_dev: f64) -> Result<Self> {
        let support = (0..weights.len() as i64).map(|n| first_offset + n).collect();
        let pmf = Pmf::from_weights(support, weights.to_vec())?;
        let mut m = Self::new(pmf)?;
        m.nominal_std_dev = Some(nominal_std_dev);
        Ok(m)
    }

    /// Noise-free measurement.
    pub fn exact() -> Self {
        ErrorModel {
            pmf: Pmf::point(0),
            nominal_std_dev: Some(0.0),
        }
    }

    pub fn pmf(&self) -> &Pmf {
        &self.pmf
    }

    pub fn offsets(&self) -> &[i64] {
        self.pmf.support()
    }

    pub fn prob(&self, e: i64) -> f64 {
        self.pmf.prob(e)
    }

    /// The printed standard deviation, if this model came from a table.
    pub fn nominal_std_dev(&self) -> Option<f64> {
        self.nominal_std_dev
    }

    pub fn std_dev(&self) -> f64 {
        let mean = self.pmf.mean();
        self.pmf
            .expectation(|e| (e as f64 - mean).powi(2))
            .sqrt()
    }
}

/// Posterior over magnitudes after observing `sample = magnitude + error`.
pub fn bayes_update(prior: &Pmf, error: &ErrorModel, sample: i64) -> Result<Pmf> {
    let weights: Vec<f64> = prior
        .iter()
        .map(|(x, p)| p * error.prob(sample - x))
        .collect();
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::ZeroLikelihood { sample });
    }
    Ok(Pmf::normalized_unchecked(
        prior.support().to_vec(),
        weights,
        total,
    ))
}

/// Distribution of the next sample given the current magnitude belief.
pub fn predictive_sample_dist(belief: &Pmf, error: &ErrorModel) -> Pmf {
    belief.convolve(error.pmf())
}
