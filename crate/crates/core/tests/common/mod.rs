//! Brute-force reference implementations for small belief states. Everything
//! here enumerates joint outcomes directly instead of convolving on the value
//! lattice.
#![allow(dead_code)]

use std::sync::Arc;

use hybrid_alloc::belief::BeliefState;
use hybrid_alloc::pmf::{ErrorModel, Pmf};
use hybrid_alloc::preference::{Preference, UtilityFunctionSpec, ValueFunctionSpec, ValueKind};
use hybrid_alloc::DecisionRule;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TIE: f64 = 1e-12;

pub struct SmallCase {
    pub state: BeliefState,
    pub errors: Vec<ErrorModel>,
    pub kind: ValueKind,
    pub maxima: Vec<i64>,
    pub uspec: UtilityFunctionSpec,
}

fn random_pmf(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Pmf {
    loop {
        let keys: Vec<i64> = (lo..=hi).filter(|_| rng.random_bool(0.6)).collect();
        if keys.is_empty() {
            continue;
        }
        let weights = keys.iter().map(|_| rng.random_range(0.05..1.0)).collect();
        return Pmf::from_weights(keys, weights).unwrap();
    }
}

fn random_error(rng: &mut ChaCha8Rng) -> ErrorModel {
    let r = rng.random_range(0..=2i64);
    let mut half = vec![1.0];
    for _ in 0..r {
        let prev: f64 = *half.last().unwrap();
        half.push(prev * rng.random_range(0.1..=1.0));
    }
    let support: Vec<i64> = (-r..=r).collect();
    let weights = support.iter().map(|e| half[e.unsigned_abs() as usize]).collect();
    ErrorModel::new(Pmf::from_weights(support, weights).unwrap()).unwrap()
}

/// A random state with m ≤ 3 alternatives, k = 2 attributes and at most five
/// magnitude levels per attribute.
pub fn small_case(seed: u64) -> SmallCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(1..=3usize);
    let k = 2;
    let maxima: Vec<i64> = (0..k).map(|_| rng.random_range(2..=5)).collect();
    let kind = if rng.random_bool(0.5) { ValueKind::A } else { ValueKind::B };
    let uspec = if rng.random_bool(0.5) {
        UtilityFunctionSpec::RiskNeutral
    } else {
        UtilityFunctionSpec::Exponential {
            gamma: rng.random_range(0.5..10.0),
        }
    };
    let pref = Arc::new(
        Preference::new(ValueFunctionSpec::new(kind, maxima.clone()).unwrap(), uspec).unwrap(),
    );
    let rows = (0..m)
        .map(|_| maxima.iter().map(|&mx| random_pmf(&mut rng, 1, mx)).collect())
        .collect();
    let state = BeliefState::from_magnitudes(rows, pref).unwrap();
    let errors = (0..k).map(|_| random_error(&mut rng)).collect();
    SmallCase {
        state,
        errors,
        kind,
        maxima,
        uspec,
    }
}

pub fn direct_utility(kind: ValueKind, maxima: &[i64], uspec: &UtilityFunctionSpec, x: &[i64]) -> f64 {
    let k = x.len() as f64;
    let singles: Vec<f64> = x
        .iter()
        .zip(maxima)
        .map(|(&xj, &mj)| xj as f64 / mj as f64)
        .collect();
    let v = match kind {
        ValueKind::A => {
            let bk = k * (k + 1.0) / 2.0;
            singles.iter().enumerate().map(|(j, s)| (j as f64 + 1.0) * s / bk).sum::<f64>()
        }
        ValueKind::B => (singles.iter().map(|s| s * s).sum::<f64>() / k).sqrt(),
    };
    match uspec {
        UtilityFunctionSpec::RiskNeutral => v,
        UtilityFunctionSpec::Exponential { gamma } => {
            (1.0 - (-gamma * v).exp()) / (1.0 - (-gamma).exp())
        }
    }
}

/// Utility outcomes of one alternative, by enumerating its magnitude vectors,
/// sorted and merged within `TIE`.
pub fn enumerate_utilities(
    row: &[Pmf],
    kind: ValueKind,
    maxima: &[i64],
    uspec: &UtilityFunctionSpec,
) -> Vec<(f64, f64)> {
    let mut outcomes: Vec<(Vec<i64>, f64)> = vec![(vec![], 1.0)];
    for pmf in row {
        let mut next = Vec::new();
        for (x, p) in &outcomes {
            for (v, q) in pmf.iter() {
                let mut y = x.clone();
                y.push(v);
                next.push((y, p * q));
            }
        }
        outcomes = next;
    }
    let mut list: Vec<(f64, f64)> = outcomes
        .iter()
        .map(|(x, p)| (direct_utility(kind, maxima, uspec, x), *p))
        .collect();
    list.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (u, p) in list {
        match merged.last_mut() {
            Some(last) if (u - last.0).abs() <= TIE => last.1 += p,
            _ => merged.push((u, p)),
        }
    }
    merged
}

/// Probability that each alternative is selected as best, a tie going to the
/// lowest index, by enumerating the joint outcome space.
pub fn joint_prob_best(lists: &[Vec<(f64, f64)>]) -> Vec<f64> {
    let m = lists.len();
    let mut out = vec![0.0; m];
    let mut idx = vec![0usize; m];
    loop {
        let us: Vec<f64> = (0..m).map(|i| lists[i][idx[i]].0).collect();
        let p: f64 = (0..m).map(|i| lists[i][idx[i]].1).product();
        let best = us.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winner = (0..m).find(|&i| us[i] >= best - TIE).unwrap();
        out[winner] += p;
        let mut n = 0;
        loop {
            if n == m {
                return out;
            }
            idx[n] += 1;
            if idx[n] < lists[n].len() {
                break;
            }
            idx[n] = 0;
            n += 1;
        }
    }
}

pub fn mean(list: &[(f64, f64)]) -> f64 {
    list.iter().map(|(u, p)| u * p).sum()
}

fn rows_of(state: &BeliefState) -> Vec<Vec<Pmf>> {
    (0..state.alternatives())
        .map(|i| state.magnitude_row(i).to_vec())
        .collect()
}

fn payoff(case: &SmallCase, rows: &[Vec<Pmf>], rule: DecisionRule) -> f64 {
    let lists: Vec<Vec<(f64, f64)>> = rows
        .iter()
        .map(|r| enumerate_utilities(r, case.kind, &case.maxima, &case.uspec))
        .collect();
    match rule {
        DecisionRule::ExpectedUtility => lists.iter().map(|l| mean(l)).fold(f64::NEG_INFINITY, f64::max),
        DecisionRule::ProbabilityOfBest => joint_prob_best(&lists).into_iter().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Current payoff of the state: max expected utility (rule I) or max
/// probability of being best (rule II).
pub fn current_payoff(case: &SmallCase, rule: DecisionRule) -> f64 {
    payoff(case, &rows_of(&case.state), rule)
}

/// Predictive probability of each possible sample of pair (i, j), and the
/// posterior it leads to, computed from Bayes' rule directly.
pub type SampleOutcome = (i64, f64, Vec<(i64, f64)>);

pub fn sample_outcomes(prior: &Pmf, error: &ErrorModel) -> Vec<SampleOutcome> {
    let emin = error.pmf().min_key();
    let emax = error.pmf().max_key();
    let mut out = Vec::new();
    for w in prior.min_key() + emin..=prior.max_key() + emax {
        let joint: Vec<(i64, f64)> = prior
            .iter()
            .map(|(x, p)| (x, p * error.prob(w - x)))
            .filter(|&(_, q)| q > 0.0)
            .collect();
        let pw: f64 = joint.iter().map(|(_, q)| q).sum();
        if pw > 0.0 {
            out.push((w, pw, joint.into_iter().map(|(x, q)| (x, q / pw)).collect()));
        }
    }
    out
}

/// One-step lookahead value of sampling pair (i, j) next: the expected payoff
/// after the sample, each posterior state rebuilt from scratch.
pub fn lookahead_oracle(case: &SmallCase, rule: DecisionRule) -> Vec<Vec<f64>> {
    let rows = rows_of(&case.state);
    (0..rows.len())
        .map(|i| {
            (0..rows[i].len())
                .map(|j| {
                    sample_outcomes(&rows[i][j], &case.errors[j])
                        .into_iter()
                        .map(|(_, pw, post)| {
                            let mut next = rows.clone();
                            let (keys, probs) = post.into_iter().unzip();
                            next[i][j] = Pmf::from_weights(keys, probs).unwrap();
                            pw * payoff(case, &next, rule)
                        })
                        .sum()
                })
                .collect()
        })
        .collect()
}

fn close(what: &str, got: f64, want: f64, tol: f64) -> Result<(), String> {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, oracle {want}"))
    }
}

/// Lattice utility distributions, probabilities of being best and both
/// rules' lookahead scores against enumeration.
pub fn check_oracle_equivalence(seed: u64) -> Result<(), String> {
    let case = small_case(seed);
    let s = &case.state;
    let pref = s.preference().clone();
    let lists: Vec<Vec<(f64, f64)>> = (0..s.alternatives())
        .map(|i| enumerate_utilities(s.magnitude_row(i), case.kind, &case.maxima, &case.uspec))
        .collect();
    for (i, list) in lists.iter().enumerate() {
        let z = s.utility_dist(i);
        if z.len() != list.len() {
            return Err(format!("alternative {i}: {} outcomes, oracle {}", z.len(), list.len()));
        }
        for ((key, p), &(u, q)) in z.iter().zip(list) {
            close("utility outcome", pref.utility_of_key(key), u, 1e-10)?;
            close("utility probability", p, q, 1e-10)?;
        }
    }
    for (got, want) in s.prob_best().iter().zip(joint_prob_best(&lists)) {
        close("probability of being best", *got, want, 1e-10)?;
    }
    for rule in DecisionRule::ALL {
        let got = hybrid_alloc::lookahead_scores(s, &case.errors, rule);
        let want = lookahead_oracle(&case, rule);
        for (gr, wr) in got.iter().zip(&want) {
            for (g, w) in gr.iter().zip(wr) {
                close(&format!("rule {rule} score"), *g, *w, 1e-10)?;
            }
        }
    }
    Ok(())
}

/// Every pmf of the state sums to one within 1e-12 and the probabilities of
/// being best sum to one within 1e-10.
pub fn check_normalization(seed: u64) -> Result<(), String> {
    let case = small_case(seed);
    let s = &case.state;
    for i in 0..s.alternatives() {
        for p in s.magnitude_row(i) {
            close("magnitude mass", p.total(), 1.0, 1e-12)?;
        }
        close("utility mass", s.utility_dist(i).total(), 1.0, 1e-12)?;
        for j in 0..s.attributes() {
            let pred = hybrid_alloc::pmf::predictive_sample_dist(s.magnitude(i, j), &case.errors[j]);
            close("predictive mass", pred.total(), 1.0, 1e-12)?;
        }
    }
    close("sum of P", s.prob_best().iter().sum(), 1.0, 1e-10)
}

/// Averaging posteriors over the predictive returns the prior, and no
/// lookahead score falls below the current payoff.
pub fn check_martingale(seed: u64) -> Result<(), String> {
    let case = small_case(seed);
    let s = &case.state;
    for i in 0..s.alternatives() {
        for j in 0..s.attributes() {
            let prior = s.magnitude(i, j);
            let pred = hybrid_alloc::pmf::predictive_sample_dist(prior, &case.errors[j]);
            let mut avg = std::collections::BTreeMap::<i64, f64>::new();
            for (w, pw) in pred.iter() {
                let post = hybrid_alloc::pmf::bayes_update(prior, &case.errors[j], w)
                    .map_err(|e| e.to_string())?;
                for (x, q) in post.iter() {
                    *avg.entry(x).or_default() += pw * q;
                }
            }
            for (x, p) in prior.iter() {
                close("averaged posterior", avg.get(&x).copied().unwrap_or(0.0), p, 1e-10)?;
            }
        }
    }
    let emax = s.expected_utilities().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let pmax = s.prob_best().into_iter().fold(f64::NEG_INFINITY, f64::max);
    for (rule, floor) in [(DecisionRule::ExpectedUtility, emax), (DecisionRule::ProbabilityOfBest, pmax)] {
        for row in hybrid_alloc::lookahead_scores(s, &case.errors, rule) {
            for f in row {
                if f < floor - 1e-10 {
                    return Err(format!("rule {rule} score {f} below current {floor}"));
                }
            }
        }
    }
    Ok(())
}
