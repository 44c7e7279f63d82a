use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use hybrid_alloc::instances::{generate_cell, InstanceId};
use hybrid_alloc::sim::write_atomic;
use hybrid_alloc::Instance;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceManifest {
    pub root_seed: u64,
    pub instances: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: InstanceId,
    pub seed: u64,
    /// relative to the manifest's directory
    pub file: String,
}

impl InstanceManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| {
            format!("no instance manifest at {} (run `generate` first)", path.display())
        })?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn load_instance(&self, dir: &Path, id: InstanceId) -> Result<Instance> {
        let entry = self
            .instances
            .iter()
            .find(|e| e.id == id)
            .with_context(|| format!("config mismatch: instance {id} is not in the manifest"))?;
        let path = dir.join(&entry.file);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let inst = Instance::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
        if inst.id() != id || inst.seed() != entry.seed {
            anyhow::bail!("{} does not match its manifest entry", path.display());
        }
        Ok(inst)
    }
}

/// Instances of every configured cell, in (set, value, utility, index) order.
pub fn instance_ids(cfg: &ExperimentConfig) -> Vec<InstanceId> {
    let mut ids = Vec::new();
    for &set in &cfg.sets {
        for &value in &cfg.value_kinds {
            for &utility in &cfg.utility_kinds {
                for index in 0..cfg.instances {
                    ids.push(InstanceId {
                        set,
                        value,
                        utility,
                        index,
                    });
                }
            }
        }
    }
    ids
}

pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let root = cfg
        .seed
        .context("generate needs a seed (--seed or `seed` in the config)")?;
    let dir = cfg.instance_dir();
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut manifest = InstanceManifest {
        root_seed: root,
        instances: Vec::new(),
    };
    for &set in &cfg.sets {
        for &value in &cfg.value_kinds {
            for &utility in &cfg.utility_kinds {
                for inst in generate_cell(set, value, utility, cfg.instances, root) {
                    let file = format!("{}.json", inst.id());
                    write_atomic(&dir.join(&file), inst.to_json()?.as_bytes())?;
                    manifest.instances.push(ManifestEntry {
                        id: inst.id(),
                        seed: inst.seed(),
                        file,
                    });
                }
            }
        }
    }
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write_atomic(&dir.join(MANIFEST), text.as_bytes())?;
    println!("wrote {} instances to {}", manifest.instances.len(), dir.display());
    Ok(())
}
