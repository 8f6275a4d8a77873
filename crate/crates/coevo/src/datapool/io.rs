//! Dataset persistence: one JSON record per line, order-preserving.
//!
//! Parsing happens in two layers. [`parse_dataset_records`] checks shape
//! only (valid JSON, known fields, parseable tokens) and needs no benchmark;
//! [`load_dataset`] additionally validates every record against the world it
//! claims to describe — ranges, candidate membership, the ground-truth box,
//! and the recomputed state feature — and rejects duplicates.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetRecord, Provenance};
use crate::env::{enumerate_plan_candidates, ActionType, BBox, Benchmark};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::policy::state_feature;

/// The serialized shape of one dataset record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDatasetRecord {
    pub task: u32,
    pub step: u32,
    pub state_feature: u64,
    pub plan: Vec<String>,
    #[serde(rename = "type")]
    pub action: String,
    pub value: Vec<String>,
    pub bbox: [f64; 4],
    pub provenance: String,
    pub iter: u32,
}

impl RawDatasetRecord {
    fn from_record(r: &DatasetRecord) -> RawDatasetRecord {
        RawDatasetRecord {
            task: r.task_id,
            step: r.step_index,
            state_feature: r.state_feature,
            plan: r.plan.clone(),
            action: r.action.token().to_string(),
            value: r.value.clone(),
            bbox: r.gt_bbox.to_array(),
            provenance: r.provenance.label().to_string(),
            iter: r.provenance.iter(),
        }
    }
}

/// Serialize records in the given order.
pub fn dataset_to_jsonl(records: &[DatasetRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let raw = RawDatasetRecord::from_record(r);
        out.push_str(&serde_json::to_string(&raw).expect("record serializes"));
        out.push('\n');
    }
    out
}

/// Shape-only parse: per-line JSON with known fields, a parseable action
/// token, a known provenance label, a non-empty plan, and a well-formed,
/// finite box. Returns records with their 1-based line numbers. Never needs
/// a benchmark and never panics on hostile input.
pub fn parse_dataset_records(src: &str, origin: &str) -> Result<Vec<(usize, RawDatasetRecord)>> {
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawDatasetRecord = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, lineno, format!("invalid record: {e}")))?;
        if raw.plan.is_empty() {
            return Err(Error::malformed(origin, lineno, "plan has no tokens"));
        }
        if ActionType::from_token(&raw.action).is_none() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("unknown action type `{}`", raw.action),
            ));
        }
        if Provenance::from_parts(&raw.provenance, raw.iter).is_none() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("unknown provenance `{}` (iter {})", raw.provenance, raw.iter),
            ));
        }
        let bbox = BBox::from_array(raw.bbox);
        if !bbox.is_well_formed() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("bbox {:?} is not a well-formed box", raw.bbox),
            ));
        }
        out.push((lineno, raw));
    }
    Ok(out)
}

/// Full load: parse, then validate every record against the benchmark.
/// `buckets` must match the state-feature hashing used when the dataset was
/// written; the recomputed feature is compared to the stored one.
pub fn load_dataset(path: &Path, bench: &Benchmark, buckets: u32) -> Result<Vec<DatasetRecord>> {
    let src = fsutil::read_to_string(path)?;
    let origin = path.display().to_string();
    let raw = parse_dataset_records(&src, &origin)?;
    let mut out = Vec::with_capacity(raw.len());
    let mut seen: BTreeSet<(u32, u32, Vec<String>, usize, Vec<String>)> = BTreeSet::new();
    for (lineno, rec) in raw {
        let task = bench
            .tasks
            .get(rec.task as usize)
            .filter(|t| t.id == rec.task)
            .ok_or_else(|| {
                Error::malformed(&origin, lineno, format!("unknown task {}", rec.task))
            })?;
        let step = task.steps.get(rec.step as usize).ok_or_else(|| {
            Error::malformed(
                &origin,
                lineno,
                format!("task {} has no step {}", rec.task, rec.step),
            )
        })?;
        let action = ActionType::from_token(&rec.action).expect("checked during parse");
        if action != step.action {
            return Err(Error::malformed(
                &origin,
                lineno,
                format!(
                    "action {} disagrees with the step's ground truth {}",
                    rec.action,
                    step.action.token()
                ),
            ));
        }
        if bench.value_pool.index_of(&rec.value).is_none() {
            return Err(Error::malformed(
                &origin,
                lineno,
                format!("value {:?} is not in the benchmark value pool", rec.value),
            ));
        }
        let screen = bench
            .screen(step.screen_id)
            .map_err(|e| Error::malformed(&origin, lineno, e.to_string()))?;
        let cands = enumerate_plan_candidates(screen, None);
        if !cands.iter().any(|c| c.tokens == rec.plan) {
            return Err(Error::malformed(
                &origin,
                lineno,
                format!("plan {:?} is not a candidate on screen {}", rec.plan, step.screen_id),
            ));
        }
        let gt_bbox = screen.elements[step.target as usize].bbox;
        if gt_bbox.to_array() != rec.bbox {
            return Err(Error::malformed(
                &origin,
                lineno,
                format!(
                    "bbox {:?} does not match the target's box {:?}",
                    rec.bbox,
                    gt_bbox.to_array()
                ),
            ));
        }
        let expect_state = state_feature(
            task.q_feature,
            step.screen_id,
            rec.step as usize,
            rec.step as usize,
            buckets,
        );
        if rec.state_feature != expect_state {
            return Err(Error::malformed(
                &origin,
                lineno,
                format!(
                    "state feature {} does not match recomputed {expect_state} \
                     (wrong benchmark or bucket count?)",
                    rec.state_feature
                ),
            ));
        }
        let record = DatasetRecord {
            task_id: rec.task,
            step_index: rec.step,
            state_feature: rec.state_feature,
            screen_id: step.screen_id,
            history_digest: bench.history_digest(task, rec.step as usize)?,
            plan: rec.plan,
            action,
            value: rec.value,
            gt_bbox,
            provenance: Provenance::from_parts(&rec.provenance, rec.iter)
                .expect("checked during parse"),
        };
        if !seen.insert(record.key()) {
            return Err(Error::malformed(
                &origin,
                lineno,
                "duplicate record (same task, step, plan, type, value)",
            ));
        }
        out.push(record);
    }
    Ok(out)
}

pub fn save_dataset(path: &Path, records: &[DatasetRecord]) -> Result<()> {
    fsutil::atomic_write(path, dataset_to_jsonl(records).as_bytes())
}
