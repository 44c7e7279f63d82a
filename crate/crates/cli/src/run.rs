use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hybrid_alloc::sim::{read_trace_csv, run_single, trace_file_name, write_atomic, write_trace_csv, RunKey};
use hybrid_alloc::Instance;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::generate::{instance_ids, InstanceManifest, MANIFEST};

/// Written next to the traces; a resumed run must agree with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub seed: u64,
    pub instance_root_seed: u64,
    pub instance_dir: PathBuf,
    pub budget: usize,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Option<Self>> {
        let path = dir.join(MANIFEST);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path)?;
        Ok(Some(
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?,
        ))
    }
}

fn is_complete(path: &Path, key: &RunKey) -> bool {
    match read_trace_csv(path) {
        Ok(traces) => {
            traces.len() == 1
                && traces[0].instance == key.instance
                && traces[0].replication == key.replication
                && traces[0].policy == key.policy
                && traces[0].validate().is_ok()
        }
        Err(_) => false,
    }
}

pub fn cmd_run(cfg: &ExperimentConfig, instance_dir: Option<&Path>) -> Result<()> {
    let seed = cfg.seed.context("run needs --seed")?;
    let instance_dir = instance_dir.map_or_else(|| cfg.instance_dir(), Path::to_path_buf);
    let manifest = InstanceManifest::load(&instance_dir)?;
    let instances: Vec<Instance> = instance_ids(cfg)
        .into_iter()
        .map(|id| manifest.load_instance(&instance_dir, id))
        .collect::<Result<_>>()?;

    let trace_dir = cfg.trace_dir();
    fs::create_dir_all(&trace_dir).with_context(|| format!("creating {}", trace_dir.display()))?;
    let run_manifest = RunManifest {
        seed,
        instance_root_seed: manifest.root_seed,
        instance_dir: instance_dir.clone(),
        budget: cfg.budget,
    };
    if let Some(existing) = RunManifest::load(&trace_dir)? {
        if existing.seed != seed
            || existing.instance_root_seed != manifest.root_seed
            || existing.budget != cfg.budget
        {
            bail!(
                "config mismatch: traces in {} were made with seed {}, instance seed {}, budget {}",
                trace_dir.display(),
                existing.seed,
                existing.instance_root_seed,
                existing.budget
            );
        }
    }
    let mut text = serde_json::to_string_pretty(&run_manifest)?;
    text.push('\n');
    write_atomic(&trace_dir.join(MANIFEST), text.as_bytes())?;

    let keys = RunKey::grid(&instances, &cfg.policies(), cfg.replications);
    let pending: Vec<&RunKey> = keys
        .iter()
        .filter(|k| !is_complete(&trace_dir.join(trace_file_name(k)), k))
        .collect();
    let by_id: std::collections::HashMap<_, _> = instances.iter().map(|i| (i.id(), i)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .context("starting worker pool")?;
    pool.install(|| {
        pending.par_iter().try_for_each(|key| -> Result<()> {
            let trace = run_single(by_id[&key.instance], key, seed)?;
            write_trace_csv(&trace_dir.join(trace_file_name(key)), &trace)?;
            Ok(())
        })
    })?;
    println!(
        "ran {} runs ({} already complete); traces in {}",
        pending.len(),
        keys.len() - pending.len(),
        trace_dir.display()
    );
    Ok(())
}
