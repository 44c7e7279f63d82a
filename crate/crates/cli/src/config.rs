use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybrid_alloc::instances::{ProblemSet, ProblemSetSpec, UtilityKind};
use hybrid_alloc::{DecisionRule, PolicyConfig, ValueKind};
use serde::{Deserialize, Serialize};

/// Experiment design, read from a TOML file. Every field has a default, so an
/// empty file describes the full design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sets: Vec<ProblemSet>,
    pub value_kinds: Vec<ValueKind>,
    pub utility_kinds: Vec<UtilityKind>,
    /// instances per (set, value kind, utility kind) cell
    pub instances: u32,
    pub replications: u32,
    pub budget: usize,
    pub uniform_phases: Vec<usize>,
    pub rules: Vec<DecisionRule>,
    pub seed: Option<u64>,
    pub out: PathBuf,
    /// worker threads for `run`; 0 uses every available core
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            sets: ProblemSet::ALL.to_vec(),
            value_kinds: vec![ValueKind::A, ValueKind::B],
            utility_kinds: UtilityKind::ALL.to_vec(),
            instances: 20,
            replications: 10,
            budget: 180,
            uniform_phases: vec![0, 36, 72, 108, 144, 180],
            rules: DecisionRule::ALL.to_vec(),
            seed: None,
            out: PathBuf::from("results"),
            workers: 0,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub set: Option<ProblemSet>,
    pub smoke: bool,
}

impl ExperimentConfig {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading config {}", p.display()))?;
                toml::from_str(&text)
                    .map_err(|e| anyhow::anyhow!("{}: {}", p.display(), e.message()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(s) = overrides.seed {
            cfg.seed = Some(s);
        }
        if let Some(w) = overrides.workers {
            cfg.workers = w;
        }
        if let Some(o) = &overrides.out {
            cfg.out = o.clone();
        }
        if let Some(set) = overrides.set {
            cfg.sets = vec![set];
        }
        if overrides.smoke {
            cfg.instances = cfg.instances.min(2);
            cfg.replications = cfg.replications.min(2);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, empty) in [
            ("sets", self.sets.is_empty()),
            ("value_kinds", self.value_kinds.is_empty()),
            ("utility_kinds", self.utility_kinds.is_empty()),
            ("uniform_phases", self.uniform_phases.is_empty()),
            ("rules", self.rules.is_empty()),
        ] {
            if empty {
                bail!("config field {name} is empty");
            }
        }
        if self.budget == 0 {
            bail!("budget must be positive");
        }
        for &set in &self.sets {
            let spec = ProblemSetSpec::new(set);
            for p in self.policies() {
                p.validate(spec.alternatives, spec.attributes)
                    .with_context(|| format!("policy {p} on set {set}"))?;
            }
        }
        Ok(())
    }

    pub fn policies(&self) -> Vec<PolicyConfig> {
        let mut out = Vec::new();
        for &rule in &self.rules {
            for &h in &self.uniform_phases {
                out.push(PolicyConfig::new(self.budget, h, rule));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    pub fn instance_dir(&self) -> PathBuf {
        self.out.join("instances")
    }

    pub fn trace_dir(&self) -> PathBuf {
        self.out.join("traces")
    }

    pub fn report_dir(&self) -> PathBuf {
        self.out.join("report")
    }
}
