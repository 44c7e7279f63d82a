use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocation::{run_policy_observed, PolicyConfig};
use crate::belief::{BeliefState, DecisionRule};
use crate::error::{Error, Result};
use crate::instances::{Instance, InstanceId};

use super::{RunTrace, StageRecord};

/// Identifies one run of the experiment grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RunKey {
    pub instance: InstanceId,
    pub replication: u32,
    pub policy: PolicyConfig,
}

impl RunKey {
    /// Every (instance, policy, replication) combination, in that nesting order.
    pub fn grid(instances: &[Instance], policies: &[PolicyConfig], replications: u32) -> Vec<RunKey> {
        let mut keys = Vec::with_capacity(instances.len() * policies.len() * replications as usize);
        for inst in instances {
            for policy in policies {
                for replication in 0..replications {
                    keys.push(RunKey {
                        instance: inst.id(),
                        replication,
                        policy: *policy,
                    });
                }
            }
        }
        keys
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the sample stream for one run. Depends only on the root seed and
/// the run's identity, never on scheduling order.
pub fn run_stream_seed(root: u64, key: &RunKey) -> u64 {
    let id = key.instance;
    let rule = match key.policy.rule {
        DecisionRule::ExpectedUtility => 1,
        DecisionRule::ProbabilityOfBest => 2,
    };
    [
        id.set as u64,
        id.value as u64,
        id.utility as u64,
        id.index as u64,
        key.replication as u64,
        key.policy.budget as u64,
        key.policy.uniform_phase as u64,
        rule,
    ]
    .iter()
    .fold(splitmix64(root), |acc, &f| splitmix64(acc ^ f))
}

/// Runs one grid cell with its derived sample stream.
pub fn run_single(instance: &Instance, key: &RunKey, root: u64) -> Result<RunTrace> {
    run_single_observed(instance, key, root, |_, _| {})
}

/// [`run_single`] with a per-stage observer (see [`run_policy_observed`]).
pub fn run_single_observed<F>(instance: &Instance, key: &RunKey, root: u64, observer: F) -> Result<RunTrace>
where
    F: FnMut(&BeliefState, &StageRecord),
{
    let mut rng = ChaCha8Rng::seed_from_u64(run_stream_seed(root, key));
    let mut trace = run_policy_observed(instance, &key.policy, &mut rng, observer)?;
    trace.replication = key.replication;
    Ok(trace)
}

/// One trace per (instance, policy, replication), in grid order. Runs execute
/// on the current rayon pool.
pub fn run_experiment(
    instances: &[Instance],
    policies: &[PolicyConfig],
    replications: u32,
    rng_root: u64,
) -> Result<Vec<RunTrace>> {
    if instances.is_empty() || policies.is_empty() || replications == 0 {
        return Err(Error::InvalidDimensions(
            "experiment needs instances, policies and replications".into(),
        ));
    }
    let by_id: std::collections::HashMap<InstanceId, &Instance> =
        instances.iter().map(|i| (i.id(), i)).collect();
    RunKey::grid(instances, policies, replications)
        .par_iter()
        .map(|key| run_single(by_id[&key.instance], key, rng_root))
        .collect()
}
