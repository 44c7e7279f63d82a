//! Replication harness, per-stage metrics and policy comparisons.

mod harness;
mod io;
mod metrics;
mod stats;

pub(crate) use harness::splitmix64;
pub use harness::{run_experiment, run_single, run_single_observed, run_stream_seed, RunKey};
pub use io::{
    read_trace_csv, trace_csv, trace_file_name, write_atomic, write_comparisons_csv,
    write_summary_csv, write_trace_csv, COMPARISON_HEADER, SUMMARY_HEADER, TIMING_HEADER,
    TRACE_HEADER,
};
pub use metrics::{
    aggregate, allocation_entropy, final_outcomes, sampling_behavior, AllocationCounts, CellKey,
    PolicyKey, SamplingBehavior, Summary, SummaryRow, TimingRow,
};
pub use stats::{compare, ComparisonResult, PolicyComparison, RunOutcome, Verdict, SIGNIFICANCE};

use serde::{Deserialize, Serialize};

use crate::allocation::PolicyConfig;
use crate::instances::InstanceId;

/// What happened at one stage of one run. Indices are 0-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: usize,
    pub alt: usize,
    pub attr: usize,
    pub sample: i64,
    /// alternative the run's decision rule would select after this stage
    pub selected: usize,
    pub opportunity_cost: f64,
    pub correct: bool,
    pub entropy: f64,
    /// cumulative wall time since the run started
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub instance: InstanceId,
    pub replication: u32,
    pub policy: PolicyConfig,
    pub alternatives: usize,
    pub attributes: usize,
    pub stages: Vec<StageRecord>,
    /// ξᵢ of the instance; empty when the trace was loaded without its instance
    pub true_utilities: Vec<f64>,
}

impl RunTrace {
    pub fn final_stage(&self) -> Option<&StageRecord> {
        self.stages.last()
    }

    pub fn total_ms(&self) -> f64 {
        self.final_stage().map_or(0.0, |s| s.elapsed_ms)
    }

    pub fn allocation_counts(&self) -> AllocationCounts {
        let mut c = AllocationCounts::new(self.alternatives, self.attributes);
        for s in &self.stages {
            c.record(s.alt, s.attr);
        }
        c
    }

    pub fn distinct_pairs(&self) -> usize {
        self.allocation_counts().counts().iter().filter(|&&n| n > 0).count()
    }

    /// Checks the per-run invariants: one row per budgeted stage, non-negative
    /// opportunity cost, and correct exactly when the cost is zero.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.stages.len() != self.policy.budget {
            return Err(format!(
                "{} stage rows for budget {}",
                self.stages.len(),
                self.policy.budget
            ));
        }
        for (n, s) in self.stages.iter().enumerate() {
            if s.stage != n + 1 {
                return Err(format!("row {n} has stage {}", s.stage));
            }
            if s.opportunity_cost < 0.0 {
                return Err(format!("negative opportunity cost at stage {}", s.stage));
            }
            if s.correct != (s.opportunity_cost == 0.0) {
                return Err(format!("correct flag disagrees with cost at stage {}", s.stage));
            }
        }
        Ok(())
    }
}
