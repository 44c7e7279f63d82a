use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::allocation::PolicyConfig;
use crate::belief::DecisionRule;
use crate::error::{Error, Result};
use crate::instances::{InstanceId, ProblemSetSpec};

use super::harness::RunKey;
use super::metrics::{CellKey, Summary};
use super::stats::PolicyComparison;
use super::{RunTrace, StageRecord};

pub const TRACE_HEADER: &str =
    "instance,replication,H,rule,stage,alt,attr,sample,selected,oc,correct,entropy,ms";
pub const SUMMARY_HEADER: &str = "set,value,utility,T,H,rule,stage,runs,mean_oc,correct";
pub const TIMING_HEADER: &str = "set,value,utility,T,H,rule,runs,mean_ms";
pub const COMPARISON_HEADER: &str = "set,value,utility,T,H_a,rule_a,H_b,rule_b,n_a,n_b,\
mean_oc_a,mean_oc_b,welch_t,welch_df,p_value,oc_verdict,correct_a,correct_b,\
proportion_difference,ci_low,ci_high,correct_verdict";

/// File name of one run's trace, e.g. `A-vB-ra-007_T180-H36-I_r03.csv`.
pub fn trace_file_name(key: &RunKey) -> String {
    format!("{}_{}_r{:02}.csv", key.instance, key.policy, key.replication)
}

/// Writes to a sibling temporary file and renames it into place, so readers
/// never see a partially written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let mut name = path
        .file_name()
        .ok_or_else(|| Error::Parse(format!("not a file path: {}", path.display())))?
        .to_os_string();
    name.push(".tmp");
    tmp.set_file_name(name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn cell_fields(cell: &CellKey) -> String {
    let v = match cell.value {
        crate::preference::ValueKind::A => "A",
        crate::preference::ValueKind::B => "B",
    };
    format!("{},{},{}", cell.set, v, cell.utility)
}

/// One CSV row per stage. Indices are written 1-based.
pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::with_capacity(64 * (trace.stages.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in &trace.stages {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{:.4}\n",
            trace.instance,
            trace.replication,
            trace.policy.uniform_phase,
            trace.policy.rule,
            s.stage,
            s.alt + 1,
            s.attr + 1,
            s.sample,
            s.selected + 1,
            s.opportunity_cost,
            s.correct as u8,
            s.entropy,
            s.elapsed_ms,
        ));
    }
    out
}

pub fn write_trace_csv(path: &Path, trace: &RunTrace) -> Result<()> {
    write_atomic(path, trace_csv(trace).as_bytes())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, n: usize, line: u64) -> Result<T> {
    let raw = rec
        .get(n)
        .ok_or_else(|| Error::Parse(format!("line {line}: missing column {n}")))?;
    raw.parse()
        .map_err(|_| Error::Parse(format!("line {line}: bad value {raw:?} in column {n}")))
}

fn index(rec: &csv::StringRecord, n: usize, line: u64) -> Result<usize> {
    let v: usize = field(rec, n, line)?;
    v.checked_sub(1)
        .ok_or_else(|| Error::Parse(format!("line {line}: index 0 in 1-based column {n}")))
}

/// Reads every run in a trace CSV. The budget of each run is its number of
/// stage rows; true utilities are not stored and come back empty.
pub fn read_trace_csv(path: &Path) -> Result<Vec<RunTrace>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<&str> = reader.headers()?.iter().collect();
    if header.join(",") != TRACE_HEADER {
        return Err(Error::Parse(format!(
            "{}: unexpected trace header",
            path.display()
        )));
    }
    let mut traces: Vec<RunTrace> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let instance: InstanceId = field(&rec, 0, line)?;
        let replication: u32 = field(&rec, 1, line)?;
        let h: usize = field(&rec, 2, line)?;
        let rule: DecisionRule = field(&rec, 3, line)?;
        let stage = StageRecord {
            stage: field(&rec, 4, line)?,
            alt: index(&rec, 5, line)?,
            attr: index(&rec, 6, line)?,
            sample: field(&rec, 7, line)?,
            selected: index(&rec, 8, line)?,
            opportunity_cost: field(&rec, 9, line)?,
            correct: field::<u8>(&rec, 10, line)? != 0,
            entropy: field(&rec, 11, line)?,
            elapsed_ms: field(&rec, 12, line)?,
        };
        let same_run = traces.last().is_some_and(|t| {
            t.instance == instance
                && t.replication == replication
                && t.policy.uniform_phase == h
                && t.policy.rule == rule
        });
        if !same_run {
            let spec = ProblemSetSpec::new(instance.set);
            traces.push(RunTrace {
                instance,
                replication,
                policy: PolicyConfig::new(0, h, rule),
                alternatives: spec.alternatives,
                attributes: spec.attributes,
                stages: Vec::new(),
                true_utilities: Vec::new(),
            });
        }
        let t = traces.last_mut().expect("pushed above");
        if stage.alt >= t.alternatives || stage.attr >= t.attributes || stage.selected >= t.alternatives {
            return Err(Error::Parse(format!("line {line}: index out of range")));
        }
        t.stages.push(stage);
    }
    for t in &mut traces {
        t.policy.budget = t.stages.len();
    }
    Ok(traces)
}

fn summary_csv(summary: &Summary) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for r in &summary.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.4},{}\n",
            cell_fields(&r.cell),
            r.policy.budget,
            r.policy.uniform_phase,
            r.policy.rule,
            r.stage,
            r.runs,
            r.mean_oc,
            r.correct
        ));
    }
    out
}

fn timing_csv(summary: &Summary) -> String {
    let mut out = String::from(TIMING_HEADER);
    out.push('\n');
    for r in &summary.timing {
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            cell_fields(&r.cell),
            r.policy.budget,
            r.policy.uniform_phase,
            r.policy.rule,
            r.runs,
            r.mean_ms
        ));
    }
    out
}

/// Per-stage summary; a timing table is written next to it when `timing` is given.
pub fn write_summary_csv(path: &Path, summary: &Summary, timing: Option<&Path>) -> Result<()> {
    write_atomic(path, summary_csv(summary).as_bytes())?;
    if let Some(t) = timing {
        write_atomic(t, timing_csv(summary).as_bytes())?;
    }
    Ok(())
}

pub fn write_comparisons_csv(path: &Path, rows: &[PolicyComparison]) -> Result<()> {
    let mut out = String::from(COMPARISON_HEADER);
    out.push('\n');
    for c in rows {
        let r = &c.result;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{:.6},{:.6},{:.4},{:.2},{:.6},{},{},{},{:.4},{:.4},{:.4},{}\n",
            cell_fields(&c.cell),
            c.a.budget,
            c.a.uniform_phase,
            c.a.rule,
            c.b.uniform_phase,
            c.b.rule,
            r.n_a,
            r.n_b,
            r.mean_oc_a,
            r.mean_oc_b,
            r.welch_t,
            r.welch_df,
            r.p_value,
            r.oc_verdict.as_str(),
            r.correct_a,
            r.correct_b,
            r.proportion_difference,
            r.ci_low,
            r.ci_high,
            r.correct_verdict.as_str(),
        ));
    }
    write_atomic(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{ProblemSet, UtilityKind};
    use crate::preference::ValueKind;
    use crate::sim::stats::{compare, RunOutcome};
    use crate::sim::{aggregate, StageRecord};

    fn sample_trace() -> RunTrace {
        let id = InstanceId {
            set: ProblemSet::B,
            value: ValueKind::B,
            utility: UtilityKind::RiskAverse,
            index: 7,
        };
        let stages = (0..5)
            .map(|n| StageRecord {
                stage: n + 1,
                alt: n % 9,
                attr: n % 4,
                sample: n as i64 * 3 - 2,
                selected: 8 - n,
                opportunity_cost: if n == 4 { 0.0 } else { 0.1 / 3.0 * n as f64 },
                correct: n == 4,
                entropy: (n as f64 + 1.0).ln(),
                elapsed_ms: 0.25 * n as f64,
            })
            .collect();
        RunTrace {
            instance: id,
            replication: 3,
            policy: PolicyConfig::new(5, 0, DecisionRule::ProbabilityOfBest),
            alternatives: 9,
            attributes: 4,
            stages,
            true_utilities: vec![],
        }
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample_trace();
        let key = RunKey {
            instance: t.instance,
            replication: t.replication,
            policy: t.policy,
        };
        let name = trace_file_name(&key);
        assert_eq!(name, "B-vB-ra-007_T5-H0-II_r03.csv");
        let path = dir.path().join(name);
        write_trace_csv(&path, &t).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(TRACE_HEADER));
        assert!(!text.contains('\r'));
        assert!(text.lines().nth(1).unwrap().starts_with("B-vB-ra-007,3,0,II,1,1,1,-2,9,"));
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(back, vec![t]);
        assert!(!dir.path().join("B-vB-ra-007_T5-H0-II_r03.csv.tmp").exists());
    }

    #[test]
    fn rejects_bad_header_and_zero_index() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        fs::write(&p, "a,b\n1,2\n").unwrap();
        assert!(read_trace_csv(&p).is_err());
        fs::write(&p, format!("{TRACE_HEADER}\nA-vA-rn-000,0,0,I,1,0,1,5,1,0,1,0,0\n")).unwrap();
        assert!(read_trace_csv(&p).is_err());
    }

    #[test]
    fn summary_and_comparison_files() {
        let dir = tempfile::tempdir().unwrap();
        let t = sample_trace();
        let summary = aggregate(std::slice::from_ref(&t));
        let s = dir.path().join("summary.csv");
        let tm = dir.path().join("timing.csv");
        write_summary_csv(&s, &summary, Some(&tm)).unwrap();
        let text = fs::read_to_string(&s).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert_eq!(text.lines().nth(2).unwrap(), "B,B,ra,5,0,II,2,1,0.0333,0");
        assert_eq!(fs::read_to_string(&tm).unwrap().lines().nth(1).unwrap(), "B,B,ra,5,0,II,1,1.000");

        let a = vec![RunOutcome { opportunity_cost: 0.0, correct: true }; 3];
        let b = vec![RunOutcome { opportunity_cost: 0.1, correct: false }; 3];
        let rows = vec![PolicyComparison {
            cell: t.instance.into(),
            a: t.policy,
            b: PolicyConfig::new(5, 5, DecisionRule::ProbabilityOfBest),
            result: compare(&a, &b).unwrap(),
        }];
        let c = dir.path().join("comparisons.csv");
        write_comparisons_csv(&c, &rows).unwrap();
        let text = fs::read_to_string(&c).unwrap();
        assert_eq!(text.lines().next().unwrap(), COMPARISON_HEADER);
        let row = text.lines().nth(1).unwrap();
        assert!(row.starts_with("B,B,ra,5,0,II,5,II,3,3,"), "{row}");
        assert!(row.ends_with(",better"));
    }
}
