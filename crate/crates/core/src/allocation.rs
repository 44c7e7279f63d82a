//! Sample allocation policies: uniform, one-step lookahead (Sequential I and
//! II), and the hybrids that run the uniform schedule for the first `H`
//! samples before switching to lookahead.
//!
//! The lookahead score of a pair (i, j) is the expected value, over the
//! predictive distribution of the next sample w, of the best expected utility
//! (rule I) or best probability-of-best (rule II) after conditioning belief
//! (i, j) on w. Only alternative i's utility distribution depends on w, and it
//! is linear in the posterior of (i, j), so each rule reduces to one vector
//! `V(x)` per candidate magnitude x:
//!
//! ```text
//! F_ij = Σ_w max_h Σ_x p_ij(x) · p_e(w - x) · V_h(x)
//! ```
//!
//! where `V_h(x)` is the payoff of alternative h given Y_ij = x. Rule I needs
//! V only for h = i (the other expectations are constants); rule II needs it
//! for every h.

use std::fmt;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{dense_cdfs, BeliefState, DecisionRule, TIE_TOLERANCE};
use crate::error::{Error, Result};
use crate::instances::{draw_sample, Instance};
use crate::pmf::{ErrorModel, Pmf};
use crate::sim::{AllocationCounts, RunTrace, StageRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Total number of samples T.
    pub budget: usize,
    /// Samples allocated by the uniform schedule before lookahead starts (H).
    pub uniform_phase: usize,
    pub rule: DecisionRule,
}

impl PolicyConfig {
    pub fn new(budget: usize, uniform_phase: usize, rule: DecisionRule) -> Self {
        PolicyConfig {
            budget,
            uniform_phase,
            rule,
        }
    }

    pub fn validate(&self, alternatives: usize, attributes: usize) -> Result<()> {
        if self.uniform_phase > self.budget {
            return Err(Error::InvalidPolicy(format!(
                "uniform phase {} exceeds budget {}",
                self.uniform_phase, self.budget
            )));
        }
        let pairs = alternatives * attributes;
        if !self.uniform_phase.is_multiple_of(pairs) {
            return Err(Error::NotMultiple {
                h: self.uniform_phase,
                pairs,
            });
        }
        Ok(())
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform_phase == self.budget
    }
}

impl fmt::Display for PolicyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T{}-H{}-{}", self.budget, self.uniform_phase, self.rule)
    }
}

/// Uniform allocation of `h` samples: `h / (m·k)` per pair, in round-robin
/// cycles (alternatives inner, attributes outer) so every pair is sampled once
/// before any pair is sampled twice.
pub fn uniform_schedule(m: usize, k: usize, h: usize) -> Result<Vec<(usize, usize)>> {
    let pairs = m * k;
    if pairs == 0 {
        return Err(Error::InvalidDimensions("empty alternative-attribute grid".into()));
    }
    if !h.is_multiple_of(pairs) {
        return Err(Error::NotMultiple { h, pairs });
    }
    let cycle: Vec<(usize, usize)> = (0..k).flat_map(|j| (0..m).map(move |i| (i, j))).collect();
    Ok(cycle.iter().copied().cycle().take(h).collect())
}

/// Argmax over the score grid; ties go to the lowest alternative, then the
/// lowest attribute.
pub fn next_pair(scores: &[Vec<f64>]) -> (usize, usize) {
    let mut best = (0, 0);
    for (i, row) in scores.iter().enumerate() {
        for (j, &s) in row.iter().enumerate() {
            if s > scores[best.0][best.1] + TIE_TOLERANCE {
                best = (i, j);
            }
        }
    }
    best
}

/// Distribution of alternative i's lattice key contributed by every attribute but `skip`.
fn partial_utility(state: &BeliefState, i: usize, skip: usize) -> Pmf {
    let pref = state.preference();
    let mut acc: Option<Pmf> = None;
    for (j, belief) in state.magnitude_row(i).iter().enumerate() {
        if j == skip {
            continue;
        }
        let c = pref.contribution_pmf(j, belief);
        acc = Some(match acc {
            None => c,
            Some(a) => a.convolve(&c),
        });
    }
    acc.expect("at least two attributes")
}

/// Σ_w max_h Σ_x p(x) p_e(w - x) payoff[x][h] (+ floor·p_s(w) as an extra
/// candidate for the max when given).
fn expected_best(
    belief: &Pmf,
    error: &ErrorModel,
    payoff: &[f64],
    width: usize,
    floor: Option<f64>,
) -> f64 {
    let err = error.pmf();
    let w_lo = belief.min_key() + err.min_key();
    let w_n = (belief.max_key() + err.max_key() - w_lo + 1) as usize;
    let mut num = vec![0.0; w_n * width];
    let mut ps = vec![0.0; w_n];
    for (n, (x, px)) in belief.iter().enumerate() {
        let row = &payoff[n * width..(n + 1) * width];
        for (e, pe) in err.iter() {
            let q = px * pe;
            let w = (x + e - w_lo) as usize;
            ps[w] += q;
            let acc = &mut num[w * width..(w + 1) * width];
            for (a, v) in acc.iter_mut().zip(row) {
                *a += q * v;
            }
        }
    }
    let mut total = 0.0;
    for (w, &p) in ps.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        let mut best = num[w * width..(w + 1) * width]
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        if let Some(f) = floor {
            best = best.max(p * f);
        }
        total += best;
    }
    total
}

fn utility_by_key(state: &BeliefState) -> Vec<f64> {
    let pref = state.preference();
    match pref.utility_table() {
        Some(t) => t.to_vec(),
        None => (0..=pref.lattice().max_key()).map(|k| pref.utility_of_key(k)).collect(),
    }
}

fn scores_expected_utility(state: &BeliefState, errors: &[ErrorModel]) -> Vec<Vec<f64>> {
    let m = state.alternatives();
    let k = state.attributes();
    let lattice = state.preference().lattice();
    let utab = utility_by_key(state);
    let e = state.expected_utilities();
    (0..m)
        .map(|i| {
            let others = (0..m)
                .filter(|&h| h != i)
                .map(|h| e[h])
                .fold(f64::NEG_INFINITY, f64::max);
            let floor = (m > 1).then_some(others);
            (0..k)
                .map(|j| {
                    let partial = partial_utility(state, i, j);
                    let belief = state.magnitude(i, j);
                    let payoff: Vec<f64> = belief
                        .support()
                        .iter()
                        .map(|&x| {
                            let c = lattice.contribution(j, x);
                            partial.iter().map(|(s, p)| p * utab[(s + c) as usize]).sum()
                        })
                        .collect();
                    expected_best(belief, &errors[j], &payoff, 1, floor)
                })
                .collect()
        })
        .collect()
}

/// For every candidate alternative i, the table `T_i[s][h]` such that after
/// Zᵢ is replaced by a distribution q over keys, Pₕ = Σ_s q(s)·T_i[s][h].
/// Keys run over `lo..lo + width`, covering every current utility support.
struct WinTables {
    lo: i64,
    width: usize,
    m: usize,
    /// per i: width × m, h fastest
    tables: Vec<Vec<f64>>,
}

impl WinTables {
    fn build(dists: &[Pmf]) -> Self {
        let m = dists.len();
        let lo = dists.iter().map(Pmf::min_key).min().unwrap();
        let hi = dists.iter().map(Pmf::max_key).max().unwrap();
        let width = (hi - lo + 1) as usize;
        let cdf = dense_cdfs(dists, lo, width);
        // P{Z_g < z} for g before the reference alternative, P{Z_g <= z} after it
        let below = |g: usize, n: usize| if n == 0 { 0.0 } else { cdf[g][n - 1] };
        let factor = |g: usize, reference: usize, n: usize| {
            if g < reference {
                below(g, n)
            } else {
                cdf[g][n]
            }
        };
        let mut tables = vec![vec![0.0; width * m]; m];

        // h ≠ i: point masses p_h(z)·Π_{g∉{h,i}} F_g(z), spread later into tail sums.
        let mut prefix = vec![1.0; m + 1];
        let mut suffix = vec![1.0; m + 1];
        for (h, dist) in dists.iter().enumerate() {
            for (z, p) in dist.iter() {
                let n = (z - lo) as usize;
                for g in 0..m {
                    let f = if g == h { 1.0 } else { factor(g, h, n) };
                    prefix[g + 1] = prefix[g] * f;
                }
                for g in (0..m).rev() {
                    let f = if g == h { 1.0 } else { factor(g, h, n) };
                    suffix[g] = suffix[g + 1] * f;
                }
                for (i, table) in tables.iter_mut().enumerate() {
                    if i != h {
                        table[n * m + h] = p * prefix[i] * suffix[i + 1];
                    }
                }
            }
        }
        for (i, table) in tables.iter_mut().enumerate() {
            for h in (0..m).filter(|&h| h != i) {
                // i beats h on ties when i < h: Zᵢ = s must be strictly below z
                let strict = i < h;
                let mut run = 0.0;
                for n in (0..width).rev() {
                    let mass = table[n * m + h];
                    if strict {
                        table[n * m + h] = run;
                        run += mass;
                    } else {
                        run += mass;
                        table[n * m + h] = run;
                    }
                }
            }
            // h = i: probability that Zᵢ = s beats everyone else
            for n in 0..width {
                table[n * m + i] = (0..m)
                    .filter(|&g| g != i)
                    .map(|g| factor(g, i, n))
                    .product();
            }
        }
        WinTables {
            lo,
            width,
            m,
            tables,
        }
    }
}

fn scores_prob_best(state: &BeliefState, errors: &[ErrorModel]) -> Vec<Vec<f64>> {
    let m = state.alternatives();
    let k = state.attributes();
    let lattice = state.preference().lattice();
    let wins = WinTables::build(state.utility_dists());
    (0..m)
        .map(|i| {
            let table = &wins.tables[i];
            (0..k)
                .map(|j| {
                    let partial = partial_utility(state, i, j);
                    let belief = state.magnitude(i, j);
                    let mut payoff = vec![0.0; belief.len() * wins.m];
                    for (n, &x) in belief.support().iter().enumerate() {
                        let c = lattice.contribution(j, x);
                        let out = &mut payoff[n * m..(n + 1) * m];
                        for (s, p) in partial.iter() {
                            let key = (s + c - wins.lo) as usize;
                            debug_assert!(key < wins.width);
                            for (o, t) in out.iter_mut().zip(&table[key * m..(key + 1) * m]) {
                                *o += p * t;
                            }
                        }
                    }
                    expected_best(belief, &errors[j], &payoff, m, None)
                })
                .collect()
        })
        .collect()
}

/// One-step lookahead scores F_ij for every (alternative, attribute) pair.
///
/// `errors[j]` is the measurement error model of attribute j.
pub fn lookahead_scores(
    state: &BeliefState,
    errors: &[ErrorModel],
    rule: DecisionRule,
) -> Vec<Vec<f64>> {
    assert_eq!(errors.len(), state.attributes(), "one error model per attribute");
    match rule {
        DecisionRule::ExpectedUtility => scores_expected_utility(state, errors),
        DecisionRule::ProbabilityOfBest => scores_prob_best(state, errors),
    }
}

/// Runs one policy on one instance for the full budget.
pub fn run_policy<R: Rng + ?Sized>(
    instance: &Instance,
    config: &PolicyConfig,
    rng: &mut R,
) -> Result<RunTrace> {
    run_policy_observed(instance, config, rng, |_, _| {})
}

/// [`run_policy`], calling `observer` with the state after every stage.
pub fn run_policy_observed<R, F>(
    instance: &Instance,
    config: &PolicyConfig,
    rng: &mut R,
    mut observer: F,
) -> Result<RunTrace>
where
    R: Rng + ?Sized,
    F: FnMut(&BeliefState, &StageRecord),
{
    let m = instance.alternatives();
    let k = instance.attributes();
    config.validate(m, k)?;
    let errors = instance.error_models();
    let truth = instance.truth();
    let schedule = uniform_schedule(m, k, config.uniform_phase)?;
    let mut state = BeliefState::init_uniform(m, instance.preference().clone())?;
    let mut counts = AllocationCounts::new(m, k);
    let mut stages = Vec::with_capacity(config.budget);
    let mut elapsed = 0.0;
    for t in 1..=config.budget {
        let start = Instant::now();
        let (i, j) = if t <= config.uniform_phase {
            schedule[t - 1]
        } else {
            next_pair(&lookahead_scores(&state, errors, config.rule))
        };
        let w = draw_sample(instance, i, j, rng);
        state.apply_sample(i, j, w, &errors[j])?;
        counts.record(i, j);
        let selected = state.select(config.rule);
        elapsed += start.elapsed().as_secs_f64() * 1e3;
        let record = StageRecord {
            stage: t,
            alt: i,
            attr: j,
            sample: w,
            selected,
            opportunity_cost: truth.opportunity_cost(selected),
            correct: truth.is_best(selected),
            entropy: counts.entropy(),
            elapsed_ms: elapsed,
        };
        observer(&state, &record);
        stages.push(record);
    }
    Ok(RunTrace {
        instance: instance.id(),
        replication: 0,
        policy: *config,
        alternatives: m,
        attributes: k,
        stages,
        true_utilities: truth.utilities.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate_instance, ProblemSet, UtilityKind};
    use crate::preference::{Preference, UtilityFunctionSpec, ValueFunctionSpec, ValueKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    #[test]
    fn uniform_schedule_counts_and_order() {
        let s = uniform_schedule(12, 3, 36).unwrap();
        assert_eq!(s.len(), 36);
        let mut seen = s.clone();
        seen.sort_unstable();
        seen.dedup();
        assert_eq!(seen.len(), 36);
        assert_eq!(&s[..3], &[(0, 0), (1, 0), (2, 0)]);
        assert_eq!(s[12], (0, 1));

        let s = uniform_schedule(12, 3, 180).unwrap();
        let mut counts = AllocationCounts::new(12, 3);
        for &(i, j) in &s {
            counts.record(i, j);
        }
        assert!(counts.counts().iter().all(|&c| c == 5));
        assert!(uniform_schedule(12, 3, 0).unwrap().is_empty());
        assert!(matches!(uniform_schedule(12, 3, 40), Err(Error::NotMultiple { h: 40, pairs: 36 })));
    }

    #[test]
    fn next_pair_tie_breaks() {
        assert_eq!(next_pair(&[vec![1.0, 1.0], vec![1.0, 1.0]]), (0, 0));
        assert_eq!(next_pair(&[vec![1.0, 1.0], vec![1.0, 2.0]]), (1, 1));
        assert_eq!(next_pair(&[vec![1.0, 2.0, 2.0], vec![0.0, 0.0, 0.0]]), (0, 1));
    }

    #[test]
    fn policy_validation() {
        let p = PolicyConfig::new(180, 36, DecisionRule::ExpectedUtility);
        assert!(p.validate(12, 3).is_ok());
        assert!(PolicyConfig::new(180, 200, DecisionRule::ExpectedUtility).validate(12, 3).is_err());
        assert!(PolicyConfig::new(180, 30, DecisionRule::ExpectedUtility).validate(12, 3).is_err());
    }

    #[test]
    fn point_mass_state_has_nothing_to_learn() {
        let pref = Arc::new(
            Preference::new(
                ValueFunctionSpec::new(ValueKind::A, vec![15; 3]).unwrap(),
                UtilityFunctionSpec::Exponential { gamma: 3.0 },
            )
            .unwrap(),
        );
        let mu = [[3, 6, 9], [10, 12, 4], [7, 7, 7]];
        let rows = mu.iter().map(|r| r.iter().map(|&x| Pmf::point(x)).collect()).collect();
        let state = BeliefState::from_magnitudes(rows, pref.clone()).unwrap();
        let errors = crate::instances::error_table("A").unwrap();
        let best = state.expected_utilities().into_iter().fold(f64::NEG_INFINITY, f64::max);
        for row in lookahead_scores(&state, &errors, DecisionRule::ExpectedUtility) {
            for f in row {
                assert!((f - best).abs() < 1e-12);
            }
        }
        for row in lookahead_scores(&state, &errors, DecisionRule::ProbabilityOfBest) {
            for f in row {
                assert!((f - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn single_alternative_scores() {
        let pref = Arc::new(
            Preference::new(
                ValueFunctionSpec::new(ValueKind::B, vec![5; 2]).unwrap(),
                UtilityFunctionSpec::RiskNeutral,
            )
            .unwrap(),
        );
        let state = BeliefState::init_uniform(1, pref).unwrap();
        let errors = vec![ErrorModel::exact(), ErrorModel::exact()];
        let e = state.expected_utility(0);
        for row in lookahead_scores(&state, &errors, DecisionRule::ExpectedUtility) {
            assert!(row.iter().all(|f| (f - e).abs() < 1e-12));
        }
        for row in lookahead_scores(&state, &errors, DecisionRule::ProbabilityOfBest) {
            assert!(row.iter().all(|f| (f - 1.0).abs() < 1e-12));
        }
    }

    fn instance() -> Instance {
        generate_instance(ProblemSet::A, ValueKind::A, UtilityKind::RiskAverse, 0, 42)
    }

    #[test]
    fn uniform_policy_allocates_evenly() {
        let inst = instance();
        let cfg = PolicyConfig::new(180, 180, DecisionRule::ProbabilityOfBest);
        let trace = run_policy(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(trace.stages.len(), 180);
        let counts = trace.allocation_counts();
        assert!(counts.counts().iter().all(|&c| c == 5));
        assert!((trace.stages[35].entropy - 36f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn hybrids_share_the_uniform_phase() {
        let inst = instance();
        let a = run_policy(&inst, &PolicyConfig::new(60, 36, DecisionRule::ExpectedUtility), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = run_policy(&inst, &PolicyConfig::new(60, 36, DecisionRule::ProbabilityOfBest), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        for (x, y) in a.stages.iter().zip(&b.stages).take(36) {
            assert_eq!((x.alt, x.attr, x.sample), (y.alt, y.attr, y.sample));
        }
    }

    #[test]
    fn fully_sequential_run_keeps_invariants() {
        let inst = instance();
        let cfg = PolicyConfig::new(40, 0, DecisionRule::ProbabilityOfBest);
        let mut n = 0;
        let trace = run_policy_observed(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(2), |state, rec| {
            n += 1;
            assert_eq!(state.stage(), rec.stage);
            assert!((state.prob_best().iter().sum::<f64>() - 1.0).abs() < 1e-10);
        })
        .unwrap();
        assert_eq!(n, 40);
        assert_eq!(trace.allocation_counts().total(), 40);
        let prior = BeliefState::init_uniform(inst.alternatives(), inst.preference().clone()).unwrap();
        let first = next_pair(&lookahead_scores(&prior, inst.error_models(), cfg.rule));
        assert_eq!((trace.stages[0].alt, trace.stages[0].attr), first);
        for rec in &trace.stages {
            assert!(rec.opportunity_cost >= 0.0);
            assert_eq!(rec.correct, rec.opportunity_cost == 0.0);
        }
    }

    #[test]
    fn perfect_information_finds_the_best() {
        for seed in 0..5 {
            let inst = generate_instance(ProblemSet::B, ValueKind::B, UtilityKind::RiskNeutral, 0, seed)
                .with_exact_measurements();
            for rule in DecisionRule::ALL {
                let cfg = PolicyConfig::new(36, 36, rule);
                let trace = run_policy(&inst, &cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
                assert!(trace.stages.last().unwrap().correct);
            }
        }
    }
}
