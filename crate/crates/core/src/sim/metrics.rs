use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::allocation::PolicyConfig;
use crate::instances::{InstanceId, ProblemSet, UtilityKind};
use crate::preference::{TrueUtilities, ValueKind};

use super::stats::RunOutcome;
use super::RunTrace;

/// Samples taken so far per (alternative, attribute) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationCounts {
    alternatives: usize,
    attributes: usize,
    counts: Vec<u32>,
}

impl AllocationCounts {
    pub fn new(alternatives: usize, attributes: usize) -> Self {
        AllocationCounts {
            alternatives,
            attributes,
            counts: vec![0; alternatives * attributes],
        }
    }

    pub fn record(&mut self, i: usize, j: usize) {
        self.counts[i * self.attributes + j] += 1;
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.attributes + j]
    }

    /// Row-major counts.
    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn alternatives(&self) -> usize {
        self.alternatives
    }

    pub fn attributes(&self) -> usize {
        self.attributes
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn entropy(&self) -> f64 {
        allocation_entropy(self)
    }
}

/// -Σ (N_ij/t) ln(N_ij/t) with t = Σ N_ij and 0·ln 0 = 0. Zero before any sample.
pub fn allocation_entropy(counts: &AllocationCounts) -> f64 {
    let t = counts.total() as f64;
    if t == 0.0 {
        return 0.0;
    }
    -counts
        .counts
        .iter()
        .filter(|&&n| n > 0)
        .map(|&n| {
            let f = n as f64 / t;
            f * f.ln()
        })
        .sum::<f64>()
}

/// Problem set and preference model shared by a group of runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub set: ProblemSet,
    pub value: ValueKind,
    pub utility: UtilityKind,
}

impl From<InstanceId> for CellKey {
    fn from(id: InstanceId) -> Self {
        CellKey {
            set: id.set,
            value: id.value,
            utility: id.utility,
        }
    }
}

pub type PolicyKey = (CellKey, PolicyConfig);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub cell: CellKey,
    pub policy: PolicyConfig,
    pub stage: usize,
    pub runs: usize,
    pub mean_oc: f64,
    pub correct: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub cell: CellKey,
    pub policy: PolicyConfig,
    pub runs: usize,
    /// mean wall time of a whole run
    pub mean_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    /// one row per (cell, policy, stage), sorted
    pub rows: Vec<SummaryRow>,
    pub timing: Vec<TimingRow>,
}

impl Summary {
    pub fn row(&self, cell: CellKey, policy: PolicyConfig, stage: usize) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.cell == cell && r.policy == policy && r.stage == stage)
    }

    pub fn policies(&self) -> Vec<PolicyKey> {
        let mut keys: Vec<PolicyKey> = self.timing.iter().map(|t| (t.cell, t.policy)).collect();
        keys.dedup();
        keys
    }
}

/// Traces ordered by identity so folds do not depend on input order.
fn canonical_order(traces: &[RunTrace]) -> Vec<&RunTrace> {
    let mut sorted: Vec<&RunTrace> = traces.iter().collect();
    sorted.sort_by(|a, b| {
        (a.instance, a.policy, a.replication).cmp(&(b.instance, b.policy, b.replication))
    });
    sorted
}

/// Per-stage mean opportunity cost and correct-selection counts for every
/// (cell, policy), plus mean run times.
pub fn aggregate(traces: &[RunTrace]) -> Summary {
    struct Acc {
        runs: usize,
        oc: Vec<f64>,
        correct: Vec<usize>,
        ms: f64,
    }
    let mut groups: BTreeMap<PolicyKey, Acc> = BTreeMap::new();
    for t in canonical_order(traces) {
        let acc = groups
            .entry((t.instance.into(), t.policy))
            .or_insert_with(|| Acc {
                runs: 0,
                oc: vec![0.0; t.stages.len()],
                correct: vec![0; t.stages.len()],
                ms: 0.0,
            });
        acc.runs += 1;
        acc.ms += t.total_ms();
        for (n, s) in t.stages.iter().enumerate() {
            if n >= acc.oc.len() {
                acc.oc.push(0.0);
                acc.correct.push(0);
            }
            acc.oc[n] += s.opportunity_cost;
            acc.correct[n] += s.correct as usize;
        }
    }
    let mut summary = Summary::default();
    for ((cell, policy), acc) in groups {
        for (n, (oc, correct)) in acc.oc.iter().zip(&acc.correct).enumerate() {
            summary.rows.push(SummaryRow {
                cell,
                policy,
                stage: n + 1,
                runs: acc.runs,
                mean_oc: oc / acc.runs as f64,
                correct: *correct,
            });
        }
        summary.timing.push(TimingRow {
            cell,
            policy,
            runs: acc.runs,
            mean_ms: acc.ms / acc.runs as f64,
        });
    }
    summary
}

/// Final-stage outcome of every run, grouped by (cell, policy) in canonical order.
pub fn final_outcomes(traces: &[RunTrace]) -> BTreeMap<PolicyKey, Vec<RunOutcome>> {
    let mut out: BTreeMap<PolicyKey, Vec<RunOutcome>> = BTreeMap::new();
    for t in canonical_order(traces) {
        if let Some(s) = t.final_stage() {
            out.entry((t.instance.into(), t.policy))
                .or_default()
                .push(RunOutcome {
                    opportunity_cost: s.opportunity_cost,
                    correct: s.correct,
                });
        }
    }
    out
}

/// How a group of runs spread their samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingBehavior {
    pub cell: CellKey,
    pub policy: PolicyConfig,
    pub runs: usize,
    pub mean_distinct_pairs: f64,
    /// share of all samples per (alternative, attribute), row-major
    pub pair_shares: Vec<f64>,
    pub attribute_shares: Vec<f64>,
    /// share of samples given to the alternative ranked r-th by true utility;
    /// empty if any trace lacks true utilities
    pub rank_shares: Vec<f64>,
}

pub fn sampling_behavior(traces: &[RunTrace]) -> Vec<SamplingBehavior> {
    let mut groups: BTreeMap<PolicyKey, Vec<&RunTrace>> = BTreeMap::new();
    for t in canonical_order(traces) {
        groups.entry((t.instance.into(), t.policy)).or_default().push(t);
    }
    groups
        .into_iter()
        .map(|((cell, policy), runs)| {
            let m = runs[0].alternatives;
            let k = runs[0].attributes;
            let mut pair = vec![0.0; m * k];
            let mut rank = vec![0.0; m];
            let mut have_ranks = true;
            let mut distinct = 0usize;
            let mut total = 0.0;
            for t in &runs {
                let counts = t.allocation_counts();
                distinct += t.distinct_pairs();
                total += counts.total() as f64;
                for (p, &c) in pair.iter_mut().zip(counts.counts()) {
                    *p += c as f64;
                }
                if t.true_utilities.len() == m {
                    let order = TrueUtilities {
                        utilities: t.true_utilities.clone(),
                        best: 0.0,
                        best_set: vec![],
                    }
                    .ranking();
                    for (r, &i) in order.iter().enumerate() {
                        rank[r] += (0..k).map(|j| counts.get(i, j) as f64).sum::<f64>();
                    }
                } else {
                    have_ranks = false;
                }
            }
            let share = |v: f64| if total > 0.0 { v / total } else { 0.0 };
            let attribute_shares = (0..k)
                .map(|j| share((0..m).map(|i| pair[i * k + j]).sum()))
                .collect();
            SamplingBehavior {
                cell,
                policy,
                runs: runs.len(),
                mean_distinct_pairs: distinct as f64 / runs.len() as f64,
                pair_shares: pair.iter().map(|&v| share(v)).collect(),
                attribute_shares,
                rank_shares: if have_ranks {
                    rank.iter().map(|&v| share(v)).collect()
                } else {
                    vec![]
                },
            }
        })
        .collect()
}
