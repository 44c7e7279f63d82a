use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use hybrid_alloc::belief::DecisionRule;
use hybrid_alloc::sim::{
    aggregate, compare, final_outcomes, read_trace_csv, sampling_behavior, write_atomic,
    write_comparisons_csv, write_summary_csv, CellKey, PolicyComparison, RunTrace, Summary,
};
use hybrid_alloc::ValueKind;

use crate::config::ExperimentConfig;
use crate::generate::InstanceManifest;
use crate::run::RunManifest;

fn cell_name(c: &CellKey) -> String {
    let v = match c.value {
        ValueKind::A => "vA",
        ValueKind::B => "vB",
    };
    format!("{}-{}-{}", c.set, v, c.utility)
}

fn cell_fields(c: &CellKey) -> String {
    format!("{},{:?},{}", c.set, c.value, c.utility)
}

fn load_traces(dir: &Path) -> Result<Vec<RunTrace>> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    let mut traces = Vec::new();
    for f in files {
        traces.extend(read_trace_csv(&f).with_context(|| format!("reading {}", f.display()))?);
    }
    if traces.is_empty() {
        bail!("no traces in {}", dir.display());
    }
    Ok(traces)
}

/// Fills in true utilities from the instances the traces were run on, when
/// they can be found.
fn attach_truth(dir: &Path, traces: &mut [RunTrace]) {
    let Ok(Some(run)) = RunManifest::load(dir) else {
        return;
    };
    let Ok(manifest) = InstanceManifest::load(&run.instance_dir) else {
        return;
    };
    let mut cache = BTreeMap::new();
    for t in traces {
        let truth = cache.entry(t.instance).or_insert_with(|| {
            manifest
                .load_instance(&run.instance_dir, t.instance)
                .ok()
                .map(|i| i.truth().utilities.clone())
        });
        if let Some(u) = truth {
            t.true_utilities = u.clone();
        }
    }
}

fn curves(summary: &Summary, dir: &Path) -> Result<usize> {
    let mut by_cell: BTreeMap<CellKey, String> = BTreeMap::new();
    for r in &summary.rows {
        let text = by_cell
            .entry(r.cell)
            .or_insert_with(|| "stage,H,rule,mean_oc,correct\n".to_string());
        writeln!(
            text,
            "{},{},{},{:.4},{}",
            r.stage, r.policy.uniform_phase, r.policy.rule, r.mean_oc, r.correct
        )?;
    }
    fs::create_dir_all(dir)?;
    for (cell, text) in &by_cell {
        write_atomic(&dir.join(format!("{}.csv", cell_name(cell))), text.as_bytes())?;
    }
    Ok(by_cell.len())
}

/// One row per (cell, rule, budget), one column per uniform-phase length.
fn wide_table<F>(summary: &Summary, value: F) -> String
where
    F: Fn(&CellKey, &hybrid_alloc::PolicyConfig) -> Option<String>,
{
    let hs: BTreeSet<usize> = summary.timing.iter().map(|t| t.policy.uniform_phase).collect();
    let mut rows: BTreeMap<(CellKey, DecisionRule, usize), BTreeMap<usize, String>> = BTreeMap::new();
    for t in &summary.timing {
        if let Some(v) = value(&t.cell, &t.policy) {
            rows.entry((t.cell, t.policy.rule, t.policy.budget))
                .or_default()
                .insert(t.policy.uniform_phase, v);
        }
    }
    let mut out = String::from("set,value,utility,rule,T");
    for h in &hs {
        let _ = write!(out, ",H{h}");
    }
    out.push('\n');
    for ((cell, rule, budget), cols) in rows {
        let _ = write!(out, "{},{rule},{budget}", cell_fields(&cell));
        for h in &hs {
            out.push(',');
            out.push_str(cols.get(h).map_or("", String::as_str));
        }
        out.push('\n');
    }
    out
}

fn comparisons(traces: &[RunTrace]) -> Vec<PolicyComparison> {
    let outcomes = final_outcomes(traces);
    let mut rows = Vec::new();
    for ((cell, policy), runs) in &outcomes {
        if policy.is_uniform() {
            continue;
        }
        let mut uniform = *policy;
        uniform.uniform_phase = uniform.budget;
        let Some(base) = outcomes.get(&(*cell, uniform)) else {
            continue;
        };
        match compare(runs, base) {
            Ok(result) => rows.push(PolicyComparison {
                cell: *cell,
                a: *policy,
                b: uniform,
                result,
            }),
            Err(e) => eprintln!("skipping {} {policy}: {e}", cell_name(cell)),
        }
    }
    rows
}

fn sampling_csv(traces: &[RunTrace]) -> Result<String> {
    let mut out = String::from(
        "set,value,utility,T,H,rule,runs,mean_distinct_pairs,best_alternative_share,attribute_shares\n",
    );
    for b in sampling_behavior(traces) {
        writeln!(
            out,
            "{},{},{},{},{},{:.2},{},{}",
            cell_fields(&b.cell),
            b.policy.budget,
            b.policy.uniform_phase,
            b.policy.rule,
            b.runs,
            b.mean_distinct_pairs,
            b.rank_shares.first().map_or(String::new(), |s| format!("{s:.4}")),
            b.attribute_shares
                .iter()
                .map(|s| format!("{s:.4}"))
                .collect::<Vec<_>>()
                .join(" ")
        )?;
    }
    Ok(out)
}

pub fn cmd_report(cfg: &ExperimentConfig, trace_dir: Option<&Path>) -> Result<()> {
    let trace_dir = trace_dir.map_or_else(|| cfg.trace_dir(), Path::to_path_buf);
    let mut traces = load_traces(&trace_dir)?;
    attach_truth(&trace_dir, &mut traces);
    let out = cfg.report_dir();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;

    let summary = aggregate(&traces);
    write_summary_csv(&out.join("summary.csv"), &summary, Some(&out.join("timing.csv")))?;
    let n_curves = curves(&summary, &out.join("curves"))?;

    let finals: BTreeMap<_, _> = summary
        .rows
        .iter()
        .filter(|r| r.stage == r.policy.budget)
        .map(|r| ((r.cell, r.policy), r))
        .collect();
    let oc = wide_table(&summary, |c, p| finals.get(&(*c, *p)).map(|r| format!("{:.4}", r.mean_oc)));
    let correct = wide_table(&summary, |c, p| finals.get(&(*c, *p)).map(|r| r.correct.to_string()));
    let timing: BTreeMap<_, _> = summary.timing.iter().map(|t| ((t.cell, t.policy), t.mean_ms)).collect();
    let time = wide_table(&summary, |c, p| timing.get(&(*c, *p)).map(|ms| format!("{:.1}", ms)));
    write_atomic(&out.join("oc_table.csv"), oc.as_bytes())?;
    write_atomic(&out.join("correct_table.csv"), correct.as_bytes())?;
    write_atomic(&out.join("time_table.csv"), time.as_bytes())?;
    write_atomic(&out.join("sampling.csv"), sampling_csv(&traces)?.as_bytes())?;

    let rows = comparisons(&traces);
    let cmp_path = out.join("comparisons.csv");
    if rows.is_empty() {
        if cmp_path.exists() {
            fs::remove_file(&cmp_path)?;
        }
    } else {
        write_comparisons_csv(&cmp_path, &rows)?;
    }
    println!(
        "report for {} runs, {} policies, {} curve files, {} comparisons in {}",
        traces.len(),
        summary.timing.len(),
        n_curves,
        rows.len(),
        out.display()
    );
    Ok(())
}
