//! Supervised fine-tuning for both policies.
//!
//! Both trainers run full-batch gradient ascent on the *summed*
//! log-likelihood of the dataset — summed, not averaged, so a plan that
//! appears twice pulls twice as hard. (Averaging quietly rescales the
//! learning rate with dataset size, which stalls small early-iteration
//! datasets; keeping sum semantics makes iteration-over-iteration
//! comparisons meaningful.) Gradients for one epoch are accumulated over
//! all records, then applied once.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::datapool::DatasetRecord;
use crate::env::{enumerate_plan_candidates, Benchmark};
use crate::error::{Error, Result};
use crate::policy::{softmax, GrounderModel, Head, PlannerModel};

/// Learning rate and epoch count for one SFT phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SftConfig {
    pub learning_rate: f64,
    pub epochs: u32,
}

impl Default for SftConfig {
    /// Planner-phase defaults; the grounder phase uses
    /// [`SftConfig::grounder_default`].
    fn default() -> Self {
        SftConfig {
            learning_rate: 0.5,
            epochs: 30,
        }
    }
}

impl SftConfig {
    pub fn grounder_default() -> Self {
        SftConfig {
            learning_rate: 0.03,
            epochs: 10,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "sft learning_rate must be a finite non-negative number (got {})",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

struct ResolvedExample {
    state: u64,
    plan_slot: usize,
    n_candidates: usize,
    type_slot: usize,
    value_slot: usize,
}

fn resolve_examples(records: &[DatasetRecord], bench: &Benchmark) -> Result<Vec<ResolvedExample>> {
    let mut cand_cache: BTreeMap<u32, Vec<crate::env::PlanCandidate>> = BTreeMap::new();
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        if !cand_cache.contains_key(&rec.screen_id) {
            let screen = bench.screen(rec.screen_id)?;
            cand_cache.insert(rec.screen_id, enumerate_plan_candidates(screen, None));
        }
        let cands = &cand_cache[&rec.screen_id];
        let plan_slot = cands
            .iter()
            .position(|c| c.tokens == rec.plan)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "record plan {:?} is not a candidate on screen {}",
                    rec.plan, rec.screen_id
                ))
            })?;
        let value_slot = bench.value_pool.index_of(&rec.value).ok_or_else(|| {
            Error::Invalid(format!(
                "record value {:?} is not in the benchmark value pool",
                rec.value
            ))
        })?;
        out.push(ResolvedExample {
            state: rec.state_feature,
            plan_slot,
            n_candidates: cands.len(),
            type_slot: rec.action.index(),
            value_slot,
        });
    }
    Ok(out)
}

/// Fit the planner to the dataset: cross-entropy on all three heads.
/// The input model is untouched; the trained copy is returned.
pub fn sft_planner(
    model: &PlannerModel,
    records: &[DatasetRecord],
    bench: &Benchmark,
    cfg: &SftConfig,
) -> Result<PlannerModel> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyDataset("planner fine-tuning received no records".into()));
    }
    let examples = resolve_examples(records, bench)?;
    let n_values = bench.value_pool.len();
    let mut out = model.clone();
    for _ in 0..cfg.epochs {
        let mut grads: [BTreeMap<(u64, u32), f64>; 3] =
            [BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
        for ex in &examples {
            let targets = [
                (Head::Plan, ex.plan_slot, ex.n_candidates),
                (Head::Type, ex.type_slot, crate::env::ActionType::COUNT),
                (Head::Value, ex.value_slot, n_values),
            ];
            for (hi, (head, target, n)) in targets.into_iter().enumerate() {
                let probs = softmax(&out.logits(head, ex.state, n), 1.0);
                for j in 0..n {
                    let ind = if j == target { 1.0 } else { 0.0 };
                    *grads[hi].entry((ex.state, j as u32)).or_insert(0.0) += ind - probs[j];
                }
            }
        }
        for (hi, head) in Head::ALL.iter().enumerate() {
            for (&(state, slot), &g) in &grads[hi] {
                out.bump(*head, state, slot, cfg.learning_rate * g);
            }
        }
    }
    Ok(out)
}

/// Fit the grounder to the dataset: cross-entropy over each record's screen
/// elements, with gradients on every (plan token × attribute) affinity and
/// on the per-role biases. The input model is untouched.
pub fn sft_grounder(
    model: &GrounderModel,
    records: &[DatasetRecord],
    bench: &Benchmark,
    cfg: &SftConfig,
) -> Result<GrounderModel> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::EmptyDataset("grounder fine-tuning received no records".into()));
    }
    // resolve screens and targets once
    let mut resolved = Vec::with_capacity(records.len());
    for rec in records {
        let task = bench.task(rec.task_id)?;
        let step = task.steps.get(rec.step_index as usize).ok_or_else(|| {
            Error::Invalid(format!(
                "record step {} out of range for task {}",
                rec.step_index, rec.task_id
            ))
        })?;
        let screen = bench.screen(rec.screen_id)?;
        resolved.push((screen, step.target as usize, &rec.plan));
    }
    let mut out = model.clone();
    for _ in 0..cfg.epochs {
        let mut ga: BTreeMap<(&str, &str), f64> = BTreeMap::new();
        let mut gb: BTreeMap<&str, f64> = BTreeMap::new();
        for (screen, target, plan) in &resolved {
            let scores: Vec<f64> = screen.elements.iter().map(|e| out.score(e, plan)).collect();
            let probs = softmax(&scores, 1.0);
            for (j, e) in screen.elements.iter().enumerate() {
                let coef = (if j == *target { 1.0 } else { 0.0 }) - probs[j];
                for t in plan.iter() {
                    for a in &e.attrs {
                        *ga.entry((t.as_str(), a.as_str())).or_insert(0.0) += coef;
                    }
                }
                *gb.entry(e.role()).or_insert(0.0) += coef;
            }
        }
        for ((t, a), g) in ga {
            out.bump_affinity(t, a, cfg.learning_rate * g);
        }
        for (r, g) in gb {
            out.bump_bias(r, cfg.learning_rate * g);
        }
    }
    Ok(out)
}
