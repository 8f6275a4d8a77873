//! Checkpoint persistence for the training loop.
//!
//! Layout per iteration: `iter_<k>/{planner.jsonl, grounder.jsonl,
//! dataset.jsonl, pools.jsonl, report.json, rng.json}`. Every file is
//! written atomically and `rng.json` is written last, so its presence marks
//! the checkpoint complete; discovery only trusts directories that have it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{IterationReport, LoopState};
use crate::datapool::{load_dataset, save_dataset, Pool, PlannerPool, VerifierPool};
use crate::env::Benchmark;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::policy::{load_grounder, load_planner, save_grounder, save_planner, GrounderModel, PlannerModel};

/// Identity of a run, stored with every checkpoint and checked on resume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMarker {
    pub seed: u64,
    pub completed_iteration: u32,
    pub mode: String,
    pub priors: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoolRow {
    pool: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tag: Option<u32>,
    model: serde_json::Value,
}

/// Serialize both model pools as JSONL: one row per member, reference
/// members first, then trained members in rotation order.
pub fn pools_to_jsonl(planners: &PlannerPool, verifiers: &VerifierPool) -> String {
    fn push_rows<M: Serialize>(out: &mut String, pool: &str, p: &Pool<M>) {
        for m in p.refs() {
            let row = PoolRow {
                pool: pool.to_string(),
                kind: "ref".into(),
                tag: None,
                model: serde_json::to_value(m).expect("model serializes"),
            };
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
        for (tag, m) in p.trained() {
            let row = PoolRow {
                pool: pool.to_string(),
                kind: "trained".into(),
                tag: Some(*tag),
                model: serde_json::to_value(m).expect("model serializes"),
            };
            out.push_str(&serde_json::to_string(&row).expect("row serializes"));
            out.push('\n');
        }
    }
    let mut out = String::new();
    push_rows(&mut out, "planner", planners);
    push_rows(&mut out, "verifier", verifiers);
    out
}

/// Parse a pools JSONL document back into the two pools. Errors carry
/// `origin` plus the 1-based line number of the offending row.
pub fn parse_pools(src: &str, origin: &str) -> Result<(PlannerPool, VerifierPool)> {
    let mut planner_refs: Vec<PlannerModel> = Vec::new();
    let mut planner_trained: Vec<(u32, PlannerModel)> = Vec::new();
    let mut verifier_refs: Vec<GrounderModel> = Vec::new();
    let mut verifier_trained: Vec<(u32, GrounderModel)> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: PoolRow = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, lineno, format!("invalid pool row: {e}")))?;
        let tag = match (row.kind.as_str(), row.tag) {
            ("ref", None) => None,
            ("trained", Some(t)) => Some(t),
            ("ref", Some(_)) => {
                return Err(Error::malformed(origin, lineno, "ref members must not carry a tag"))
            }
            ("trained", None) => {
                return Err(Error::malformed(origin, lineno, "trained members need a tag"))
            }
            (other, _) => {
                return Err(Error::malformed(origin, lineno, format!("unknown kind `{other}`")))
            }
        };
        match row.pool.as_str() {
            "planner" => {
                let model: PlannerModel = serde_json::from_value(row.model).map_err(|e| {
                    Error::malformed(origin, lineno, format!("bad planner model: {e}"))
                })?;
                match tag {
                    None => planner_refs.push(model),
                    Some(t) => planner_trained.push((t, model)),
                }
            }
            "verifier" => {
                let model: GrounderModel = serde_json::from_value(row.model).map_err(|e| {
                    Error::malformed(origin, lineno, format!("bad grounder model: {e}"))
                })?;
                match tag {
                    None => verifier_refs.push(model),
                    Some(t) => verifier_trained.push((t, model)),
                }
            }
            other => {
                return Err(Error::malformed(origin, lineno, format!("unknown pool `{other}`")))
            }
        }
    }
    let planners = Pool::from_parts(planner_refs, planner_trained)
        .map_err(|e| Error::malformed(origin, 1, e.to_string()))?;
    let verifiers = Pool::from_parts(verifier_refs, verifier_trained)
        .map_err(|e| Error::malformed(origin, 1, e.to_string()))?;
    Ok((planners, verifiers))
}

/// Write a complete checkpoint. The marker goes last.
pub fn save_checkpoint(
    dir: &Path,
    state: &LoopState,
    report: &IterationReport,
    marker: &RunMarker,
) -> Result<()> {
    fsutil::create_dir_all(dir)?;
    save_planner(&dir.join("planner.jsonl"), &state.planner)?;
    save_grounder(&dir.join("grounder.jsonl"), &state.grounder)?;
    save_dataset(&dir.join("dataset.jsonl"), &state.dataset)?;
    fsutil::atomic_write(
        &dir.join("pools.jsonl"),
        pools_to_jsonl(&state.planner_pool, &state.verifier_pool).as_bytes(),
    )?;
    let report_json =
        serde_json::to_string_pretty(report).expect("report serializes");
    fsutil::atomic_write(&dir.join("report.json"), report_json.as_bytes())?;
    let marker_json = serde_json::to_string_pretty(marker).expect("marker serializes");
    fsutil::atomic_write(&dir.join("rng.json"), marker_json.as_bytes())?;
    Ok(())
}

pub fn load_marker(dir: &Path) -> Result<RunMarker> {
    let path = dir.join("rng.json");
    let src = fsutil::read_to_string(&path)?;
    serde_json::from_str(&src)
        .map_err(|e| Error::malformed(&path.display().to_string(), 1, e.to_string()))
}

pub fn load_report(dir: &Path) -> Result<IterationReport> {
    let path = dir.join("report.json");
    let src = fsutil::read_to_string(&path)?;
    serde_json::from_str(&src)
        .map_err(|e| Error::malformed(&path.display().to_string(), 1, e.to_string()))
}

/// Load a checkpoint back into loop state. `buckets` must match the run's
/// state-feature hashing (checked by dataset validation).
pub fn load_checkpoint(
    dir: &Path,
    bench: &Benchmark,
    buckets: u32,
) -> Result<(LoopState, RunMarker, IterationReport)> {
    let marker = load_marker(dir)?;
    let report = load_report(dir)?;
    let planner = load_planner(&dir.join("planner.jsonl"))?;
    let grounder = load_grounder(&dir.join("grounder.jsonl"))?;
    let dataset = load_dataset(&dir.join("dataset.jsonl"), bench, buckets)?;
    let pools_path = dir.join("pools.jsonl");
    let src = fsutil::read_to_string(&pools_path)?;
    let (planner_pool, verifier_pool) = parse_pools(&src, &pools_path.display().to_string())?;
    Ok((
        LoopState {
            iteration: marker.completed_iteration,
            planner,
            grounder,
            planner_pool,
            verifier_pool,
            dataset,
        },
        marker,
        report,
    ))
}

pub fn checkpoint_dir(root: &Path, k: u32) -> PathBuf {
    root.join(format!("iter_{k}"))
}

/// Latest complete checkpoint under `root`, if any.
pub fn latest_checkpoint(root: &Path) -> Result<Option<(u32, PathBuf)>> {
    if !root.exists() {
        return Ok(None);
    }
    let mut best: Option<(u32, PathBuf)> = None;
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(k) = name
            .to_str()
            .and_then(|n| n.strip_prefix("iter_"))
            .and_then(|n| n.parse::<u32>().ok())
        else {
            continue;
        };
        let dir = entry.path();
        if !dir.join("rng.json").exists() {
            continue; // incomplete write
        }
        if best.as_ref().map_or(true, |(bk, _)| k > *bk) {
            best = Some((k, dir));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapool::tests_support::{hitter, misser, sample_dataset};
    use crate::policy::Head;

    fn fixture_state() -> (Benchmark, LoopState) {
        let (bench, dataset) = sample_dataset();
        let mut planner = PlannerModel::new(0.9);
        planner.set(Head::Plan, 7, 2, 1.5);
        let mut grounder = GrounderModel::new("phi_1");
        grounder.set_affinity("button", "button", 2.0);
        let mut planner_pool = PlannerPool::new(vec![PlannerModel::new(1.0)]);
        planner_pool.rotate(1, planner.clone());
        let mut verifier_pool = VerifierPool::new(vec![hitter(), misser()]);
        verifier_pool.rotate(1, grounder.clone());
        (
            bench,
            LoopState {
                iteration: 1,
                planner,
                grounder,
                planner_pool,
                verifier_pool,
                dataset,
            },
        )
    }

    fn fixture_report() -> IterationReport {
        IterationReport {
            k: 1,
            seed: 5,
            mode: "cdrem".into(),
            metrics: Default::default(),
            stats: crate::datapool::DataStats {
                iter: 1,
                generated: 4,
                retained: 3,
                purity: 0.75,
                diversity: 1.5,
            },
            grpo_log: vec![],
            wall_clock_s: 0.25,
        }
    }

    #[test]
    fn checkpoint_round_trip_restores_everything() {
        let (bench, state) = fixture_state();
        let marker = RunMarker {
            seed: 5,
            completed_iteration: 1,
            mode: "cdrem".into(),
            priors: "1:1:2".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        let ckpt = checkpoint_dir(dir.path(), 1);
        save_checkpoint(&ckpt, &state, &fixture_report(), &marker).unwrap();
        let (loaded, loaded_marker, loaded_report) =
            load_checkpoint(&ckpt, &bench, 1024).unwrap();
        assert_eq!(loaded_marker, marker);
        assert_eq!(loaded.planner, state.planner);
        assert_eq!(loaded.grounder, state.grounder);
        assert_eq!(loaded.dataset, state.dataset);
        assert_eq!(loaded.planner_pool, state.planner_pool);
        assert_eq!(loaded.verifier_pool, state.verifier_pool);
        assert_eq!(loaded.iteration, 1);
        assert_eq!(loaded_report, fixture_report());
    }

    #[test]
    fn latest_checkpoint_skips_incomplete_directories() {
        let (_, state) = fixture_state();
        let marker = RunMarker {
            seed: 5,
            completed_iteration: 0,
            mode: "cdrem".into(),
            priors: "1:1:2".into(),
        };
        let dir = tempfile::tempdir().unwrap();
        save_checkpoint(&checkpoint_dir(dir.path(), 0), &state, &fixture_report(), &marker)
            .unwrap();
        save_checkpoint(&checkpoint_dir(dir.path(), 1), &state, &fixture_report(), &marker)
            .unwrap();
        // a torn iter_2: files but no rng.json
        let torn = checkpoint_dir(dir.path(), 2);
        std::fs::create_dir_all(&torn).unwrap();
        std::fs::write(torn.join("planner.jsonl"), b"junk").unwrap();
        let (k, path) = latest_checkpoint(dir.path()).unwrap().unwrap();
        assert_eq!(k, 1);
        assert!(path.ends_with("iter_1"));
        assert_eq!(latest_checkpoint(&dir.path().join("nope")).unwrap(), None);
    }

    #[test]
    fn corrupt_pool_rows_name_the_line() {
        let err = parse_pools("{\"pool\":\"planner\"}", "pools.jsonl").unwrap_err();
        assert!(err.to_string().starts_with("pools.jsonl:1"), "{err}");

        let row = r#"{"pool":"planner","kind":"trained","tag":1,"model":{"temperature":1.0,"plan":{},"types":{},"values":{}}}"#;
        let text = format!("{row}\n{row}\n");
        // duplicate tags collapse into non-consecutive parts? no — same tag
        // twice is rejected by the pool invariant check
        let err = parse_pools(&text, "pools.jsonl").unwrap_err();
        assert!(err.to_string().contains("consecutive"), "{err}");

        let bad_kind = r#"{"pool":"verifier","kind":"mystery","model":{}}"#;
        assert!(parse_pools(bad_kind, "pools.jsonl").is_err());
    }
}
