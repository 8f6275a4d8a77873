//! Model persistence: planners and grounders as line-delimited JSON.
//!
//! Each file starts with a header record naming the format and version,
//! followed by one record per stored table row. Floats round-trip through
//! shortest-representation printing, so save → load reproduces the model
//! bit for bit.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GrounderModel, Head, PlannerModel};
use crate::error::{Error, Result};
use crate::fsutil;

const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerHeader {
    format: String,
    version: u32,
    temperature: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlannerRow {
    table: String,
    state: u64,
    slots: Vec<(u32, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrounderHeader {
    format: String,
    version: u32,
    model_tag: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GrounderRow {
    table: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    token: Option<String>,
    weights: Vec<(String, f64)>,
}

fn head_for(table: &str) -> Option<Head> {
    Head::ALL.iter().copied().find(|h| h.name() == table)
}

/// Serialize a planner to its line-delimited form.
pub fn planner_to_jsonl(model: &PlannerModel) -> String {
    let mut out = String::new();
    let header = PlannerHeader {
        format: "planner".into(),
        version: VERSION,
        temperature: model.temperature,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for head in Head::ALL {
        for (state, row) in model.rows(head) {
            if row.is_empty() {
                continue;
            }
            let rec = PlannerRow {
                table: head.name().to_string(),
                state,
                slots: row.iter().map(|(&s, &w)| (s, w)).collect(),
            };
            out.push_str(&serde_json::to_string(&rec).expect("row serializes"));
            out.push('\n');
        }
    }
    out
}

/// Parse a planner from its line-delimited form. `origin` names the source
/// for error messages.
pub fn parse_planner(src: &str, origin: &str) -> Result<PlannerModel> {
    let mut model: Option<PlannerModel> = None;
    let mut seen: BTreeSet<(&'static str, u64)> = BTreeSet::new();
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(model) = model.as_mut() else {
            let header: PlannerHeader = serde_json::from_str(line)
                .map_err(|e| Error::malformed(origin, lineno, format!("invalid header: {e}")))?;
            if header.format != "planner" {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("expected format `planner`, found `{}`", header.format),
                ));
            }
            if header.version != VERSION {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("unsupported planner version {}", header.version),
                ));
            }
            if !header.temperature.is_finite() || header.temperature <= 0.0 {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("temperature must be finite and > 0 (got {})", header.temperature),
                ));
            }
            model = Some(PlannerModel::new(header.temperature));
            continue;
        };
        let row: PlannerRow = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, lineno, format!("invalid row: {e}")))?;
        let head = head_for(&row.table).ok_or_else(|| {
            Error::malformed(origin, lineno, format!("unknown table `{}`", row.table))
        })?;
        if !seen.insert((head.name(), row.state)) {
            return Err(Error::malformed(
                origin,
                lineno,
                format!("duplicate row for table `{}`, state {}", row.table, row.state),
            ));
        }
        if row.slots.is_empty() {
            return Err(Error::malformed(origin, lineno, "row has no slots"));
        }
        let mut slot_seen = BTreeSet::new();
        for (slot, w) in row.slots {
            if !slot_seen.insert(slot) {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("duplicate slot {slot} in one row"),
                ));
            }
            if !w.is_finite() {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("non-finite logit at slot {slot}"),
                ));
            }
            model.set(head, row.state, slot, w);
        }
    }
    model.ok_or_else(|| Error::malformed(origin, 1, "missing planner header"))
}

pub fn save_planner(path: &Path, model: &PlannerModel) -> Result<()> {
    fsutil::atomic_write(path, planner_to_jsonl(model).as_bytes())
}

pub fn load_planner(path: &Path) -> Result<PlannerModel> {
    let src = fsutil::read_to_string(path)?;
    parse_planner(&src, &path.display().to_string())
}

/// Serialize a grounder to its line-delimited form.
pub fn grounder_to_jsonl(model: &GrounderModel) -> String {
    let mut out = String::new();
    let header = GrounderHeader {
        format: "grounder".into(),
        version: VERSION,
        model_tag: model.model_tag.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for (token, row) in model.affinity_rows() {
        if row.is_empty() {
            continue;
        }
        let rec = GrounderRow {
            table: "affinity".into(),
            token: Some(token.clone()),
            weights: row.iter().map(|(a, &w)| (a.clone(), w)).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("row serializes"));
        out.push('\n');
    }
    if !model.bias_row().is_empty() {
        let rec = GrounderRow {
            table: "bias".into(),
            token: None,
            weights: model.bias_row().iter().map(|(r, &w)| (r.clone(), w)).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("row serializes"));
        out.push('\n');
    }
    out
}

/// Parse a grounder from its line-delimited form.
pub fn parse_grounder(src: &str, origin: &str) -> Result<GrounderModel> {
    let mut model: Option<GrounderModel> = None;
    let mut seen_tokens: BTreeSet<String> = BTreeSet::new();
    let mut seen_bias = false;
    for (i, line) in src.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let Some(model) = model.as_mut() else {
            let header: GrounderHeader = serde_json::from_str(line)
                .map_err(|e| Error::malformed(origin, lineno, format!("invalid header: {e}")))?;
            if header.format != "grounder" {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("expected format `grounder`, found `{}`", header.format),
                ));
            }
            if header.version != VERSION {
                return Err(Error::malformed(
                    origin,
                    lineno,
                    format!("unsupported grounder version {}", header.version),
                ));
            }
            model = Some(GrounderModel::new(header.model_tag));
            continue;
        };
        let row: GrounderRow = serde_json::from_str(line)
            .map_err(|e| Error::malformed(origin, lineno, format!("invalid row: {e}")))?;
        match row.table.as_str() {
            "affinity" => {
                let token = row.token.ok_or_else(|| {
                    Error::malformed(origin, lineno, "affinity row is missing `token`")
                })?;
                if !seen_tokens.insert(token.clone()) {
                    return Err(Error::malformed(
                        origin,
                        lineno,
                        format!("duplicate affinity row for token `{token}`"),
                    ));
                }
                if row.weights.is_empty() {
                    return Err(Error::malformed(origin, lineno, "row has no weights"));
                }
                let mut attr_seen = BTreeSet::new();
                for (attr, w) in row.weights {
                    if !attr_seen.insert(attr.clone()) {
                        return Err(Error::malformed(
                            origin,
                            lineno,
                            format!("duplicate attribute `{attr}` in one row"),
                        ));
                    }
                    if !w.is_finite() {
                        return Err(Error::malformed(
                            origin,
                            lineno,
                            format!("non-finite weight for attribute `{attr}`"),
                        ));
                    }
                    model.set_affinity(&token, &attr, w);
                }
            }
            "bias" => {
                if row.token.is_some() {
                    return Err(Error::malformed(origin, lineno, "bias row must not carry a token"));
                }
                if seen_bias {
                    return Err(Error::malformed(origin, lineno, "duplicate bias row"));
                }
                seen_bias = true;
                let mut role_seen = BTreeSet::new();
                for (role, w) in row.weights {
                    if !role_seen.insert(role.clone()) {
                        return Err(Error::malformed(
                            origin,
                            lineno,
                            format!("duplicate role `{role}` in bias row"),
                        ));
                    }
                    if !w.is_finite() {
                        return Err(Error::malformed(
                            origin,
                            lineno,
                            format!("non-finite bias for role `{role}`"),
                        ));
                    }
                    model.set_bias(&role, w);
                }
            }
            other => {
                return Err(Error::malformed(origin, lineno, format!("unknown table `{other}`")));
            }
        }
    }
    model.ok_or_else(|| Error::malformed(origin, 1, "missing grounder header"))
}

pub fn save_grounder(path: &Path, model: &GrounderModel) -> Result<()> {
    fsutil::atomic_write(path, grounder_to_jsonl(model).as_bytes())
}

pub fn load_grounder(path: &Path) -> Result<GrounderModel> {
    let src = fsutil::read_to_string(path)?;
    parse_grounder(&src, &path.display().to_string())
}
