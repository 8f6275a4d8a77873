//! Benchmark persistence: JSON Lines, screens first, then tasks.
//!
//! Loading is strict: every record must parse, ids must be contiguous and
//! ascending, and every cross-reference (screens, targets, affordances) must
//! resolve. Failures carry the 1-based line number of the offending record.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{ActionType, BBox, Benchmark, Element, Screen, Split, Task, TaskStep};
use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElementRec {
    id: u32,
    bbox: [f64; 4],
    attrs: Vec<String>,
    affordances: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScreenRec {
    screen_id: u32,
    elements: Vec<ElementRec>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepRec {
    screen_id: u32,
    target: u32,
    #[serde(rename = "type")]
    action: String,
    value: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskRec {
    task_id: u32,
    q_feature: u32,
    split: String,
    steps: Vec<StepRec>,
}

/// Serialize the benchmark to its canonical JSONL form.
pub fn benchmark_to_jsonl(bench: &Benchmark) -> String {
    let mut out = String::new();
    for screen in &bench.screens {
        let rec = ScreenRec {
            screen_id: screen.id,
            elements: screen
                .elements
                .iter()
                .map(|e| ElementRec {
                    id: e.id,
                    bbox: e.bbox.to_array(),
                    attrs: e.attrs.clone(),
                    affordances: e.affordances.iter().map(|a| a.token().to_string()).collect(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("screen record serializes"));
        out.push('\n');
    }
    for task in &bench.tasks {
        let rec = TaskRec {
            task_id: task.id,
            q_feature: task.q_feature,
            split: task.split.as_str().to_string(),
            steps: task
                .steps
                .iter()
                .map(|s| StepRec {
                    screen_id: s.screen_id,
                    target: s.target,
                    action: s.action.token().to_string(),
                    value: s.value.clone(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("task record serializes"));
        out.push('\n');
    }
    out
}

pub fn save_benchmark(bench: &Benchmark, path: &Path) -> Result<()> {
    fsutil::atomic_write(path, benchmark_to_jsonl(bench).as_bytes())
}

/// Parse a benchmark from JSONL text. `origin` names the source in errors.
pub fn parse_benchmark(src: &str, origin: &str) -> Result<Benchmark> {
    let mut screens: Vec<Screen> = Vec::new();
    let mut tasks: Vec<(usize, Task)> = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, lineno, format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::malformed(origin, lineno, "record is not a JSON object"))?;
        if obj.contains_key("elements") {
            let rec: ScreenRec = serde_json::from_value(value.clone())
                .map_err(|e| Error::malformed(origin, lineno, format!("bad screen record: {e}")))?;
            screens.push(screen_from_rec(rec, origin, lineno, screens.len() as u32)?);
        } else if obj.contains_key("steps") {
            let rec: TaskRec = serde_json::from_value(value.clone())
                .map_err(|e| Error::malformed(origin, lineno, format!("bad task record: {e}")))?;
            tasks.push((lineno, task_from_rec(rec, origin, lineno, tasks.len() as u32)?));
        } else {
            return Err(Error::malformed(
                origin,
                lineno,
                "record is neither a screen (`elements`) nor a task (`steps`)",
            ));
        }
    }
    if screens.is_empty() {
        return Err(Error::malformed(origin, 1, "benchmark has no screen records"));
    }
    if tasks.is_empty() {
        return Err(Error::malformed(origin, 1, "benchmark has no task records"));
    }
    // Cross-references.
    for (lineno, task) in &tasks {
        for (si, step) in task.steps.iter().enumerate() {
            let screen = screens.get(step.screen_id as usize).ok_or_else(|| {
                Error::malformed(
                    origin,
                    *lineno,
                    format!("step {si} references unknown screen {}", step.screen_id),
                )
            })?;
            let target = screen.elements.get(step.target as usize).ok_or_else(|| {
                Error::malformed(
                    origin,
                    *lineno,
                    format!(
                        "step {si} targets element {} but screen {} has {}",
                        step.target,
                        step.screen_id,
                        screen.elements.len()
                    ),
                )
            })?;
            if !target.affordances.contains(&step.action) {
                return Err(Error::malformed(
                    origin,
                    *lineno,
                    format!(
                        "step {si} uses {} on element {} which affords only {:?}",
                        step.action.token(),
                        step.target,
                        target
                            .affordances
                            .iter()
                            .map(|a| a.token())
                            .collect::<Vec<_>>()
                    ),
                ));
            }
        }
    }
    Ok(Benchmark::from_parts(
        screens,
        tasks.into_iter().map(|(_, t)| t).collect(),
    ))
}

fn screen_from_rec(rec: ScreenRec, origin: &str, lineno: usize, expect_id: u32) -> Result<Screen> {
    if rec.screen_id != expect_id {
        return Err(Error::malformed(
            origin,
            lineno,
            format!(
                "screen ids must be contiguous ascending: expected {expect_id}, got {}",
                rec.screen_id
            ),
        ));
    }
    if rec.elements.is_empty() {
        return Err(Error::malformed(origin, lineno, "screen has no elements"));
    }
    let mut elements = Vec::with_capacity(rec.elements.len());
    for (j, e) in rec.elements.into_iter().enumerate() {
        if e.id != j as u32 {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("element ids must be contiguous ascending: expected {j}, got {}", e.id),
            ));
        }
        let bbox = BBox::from_array(e.bbox);
        if !bbox.is_well_formed() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("element {j} has a malformed bbox {:?}", e.bbox),
            ));
        }
        if e.attrs.is_empty() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("element {j} has no attributes (needs at least a role)"),
            ));
        }
        if e.affordances.is_empty() {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("element {j} has no affordances"),
            ));
        }
        let mut affordances = Vec::with_capacity(e.affordances.len());
        for a in &e.affordances {
            let at = ActionType::from_token(a).ok_or_else(|| {
                Error::malformed(origin, lineno, format!("unknown affordance `{a}`"))
            })?;
            if affordances.contains(&at) {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("duplicate affordance `{a}` on element {j}"),
                ));
            }
            affordances.push(at);
        }
        elements.push(Element {
            id: j as u32,
            bbox,
            attrs: e.attrs,
            affordances,
        });
    }
    Ok(Screen {
        id: expect_id,
        elements,
    })
}

fn task_from_rec(rec: TaskRec, origin: &str, lineno: usize, expect_id: u32) -> Result<Task> {
    if rec.task_id != expect_id {
        return Err(Error::malformed(
            origin,
            lineno,
            format!(
                "task ids must be contiguous ascending: expected {expect_id}, got {}",
                rec.task_id
            ),
        ));
    }
    let split = Split::from_str(&rec.split).ok_or_else(|| {
        Error::malformed(origin, lineno, format!("unknown split `{}`", rec.split))
    })?;
    if rec.steps.is_empty() {
        return Err(Error::malformed(origin, lineno, "task has no steps"));
    }
    let mut steps = Vec::with_capacity(rec.steps.len());
    for (si, s) in rec.steps.into_iter().enumerate() {
        let action = ActionType::from_token(&s.action).ok_or_else(|| {
            Error::malformed(
                origin,
                lineno,
                format!("step {si} has unknown action type `{}`", s.action),
            )
        })?;
        steps.push(TaskStep {
            screen_id: s.screen_id,
            target: s.target,
            action,
            value: s.value,
        });
    }
    Ok(Task {
        id: expect_id,
        q_feature: rec.q_feature,
        split,
        steps,
    })
}

pub fn load_benchmark(path: &Path) -> Result<Benchmark> {
    let src = fsutil::read_to_string(path)?;
    parse_benchmark(&src, &path.display().to_string())
}
