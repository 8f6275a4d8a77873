//! Tabular policies: the planner (three softmax heads over hashed state
//! features) and the grounder (token-affinity scoring over screen elements).
//!
//! The planner decides *what* to do — it picks a plan candidate, an action
//! type, and a value bag — while the grounder decides *where*, resolving the
//! plan's tokens to a concrete element. The two are trained separately and
//! communicate only through plan tokens, so either side can be swapped,
//! pooled, or used to check the other.

mod io;
mod reference;
mod sft;

pub use io::{
    grounder_to_jsonl, load_grounder, load_planner, parse_grounder, parse_planner,
    planner_to_jsonl, save_grounder, save_planner,
};
pub use reference::{oracle_models, reference_grounder, ReferenceKind, ReferenceSpec};
pub use sft::{sft_grounder, sft_planner, SftConfig};

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Element, Observation, Screen};
use crate::error::{Error, Result};
use crate::rng;

/// Softmax with temperature, max-subtracted for stability. Non-positive
/// temperatures are clamped to an epsilon (effectively one-hot).
pub fn softmax(logits: &[f64], temperature: f64) -> Vec<f64> {
    let t = if temperature > 0.0 { temperature } else { 1e-12 };
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ex: Vec<f64> = logits.iter().map(|&l| ((l - m) / t).exp()).collect();
    let sum: f64 = ex.iter().sum();
    ex.into_iter().map(|e| e / sum).collect()
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Hash-bucketed state feature for one observed step. Tasks that share the
/// feature, screen, and step position collide on purpose: that collision is
/// the transfer channel between train and held-out journeys.
pub fn state_feature(
    q_feature: u32,
    screen_id: u32,
    step_index: usize,
    history_len: usize,
    buckets: u32,
) -> u64 {
    let h = rng::mix(&[
        rng::tag("sf"),
        u64::from(q_feature),
        u64::from(screen_id),
        step_index as u64,
        history_len as u64,
    ]);
    h % u64::from(buckets.max(1))
}

/// State feature of an observation.
pub fn observation_feature(o: &Observation<'_>, buckets: u32) -> u64 {
    state_feature(o.q_feature, o.screen.id, o.step_index, o.history_len, buckets)
}

/// The planner's three decision heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Plan,
    Type,
    Value,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Plan, Head::Type, Head::Value];

    pub fn name(self) -> &'static str {
        match self {
            Head::Plan => "plan",
            Head::Type => "type",
            Head::Value => "value",
        }
    }
}

/// How to decode a head: greedy argmax or tempered sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DecodeMode {
    /// Argmax with lowest-index tie-break; the reported log-probability is
    /// taken from the temperature-1 softmax.
    Greedy,
    /// Draw from `softmax(logits / t)`; the log-probability is from that same
    /// tempered distribution.
    Sample(f64),
}

/// One decoded head: chosen index plus its log-probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadChoice {
    pub index: usize,
    pub logprob: f64,
}

/// A full planner decision for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerOutput {
    pub state: u64,
    pub plan: HeadChoice,
    pub action_type: HeadChoice,
    pub value: HeadChoice,
}

/// Tabular planner. Rows are stored sparsely per state bucket; absent
/// entries read as zero, so a fresh model is uniform everywhere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerModel {
    pub temperature: f64,
    plan: BTreeMap<u64, BTreeMap<u32, f64>>,
    types: BTreeMap<u64, BTreeMap<u32, f64>>,
    values: BTreeMap<u64, BTreeMap<u32, f64>>,
}

impl PlannerModel {
    pub fn new(temperature: f64) -> Self {
        PlannerModel {
            temperature,
            plan: BTreeMap::new(),
            types: BTreeMap::new(),
            values: BTreeMap::new(),
        }
    }

    fn table(&self, head: Head) -> &BTreeMap<u64, BTreeMap<u32, f64>> {
        match head {
            Head::Plan => &self.plan,
            Head::Type => &self.types,
            Head::Value => &self.values,
        }
    }

    fn table_mut(&mut self, head: Head) -> &mut BTreeMap<u64, BTreeMap<u32, f64>> {
        match head {
            Head::Plan => &mut self.plan,
            Head::Type => &mut self.types,
            Head::Value => &mut self.values,
        }
    }

    /// Dense logit row for a state, materialized to `n` slots.
    pub fn logits(&self, head: Head, state: u64, n: usize) -> Vec<f64> {
        let row = self.table(head).get(&state);
        (0..n as u32)
            .map(|i| row.and_then(|r| r.get(&i)).copied().unwrap_or(0.0))
            .collect()
    }

    pub fn get(&self, head: Head, state: u64, slot: u32) -> f64 {
        self.table(head)
            .get(&state)
            .and_then(|r| r.get(&slot))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn set(&mut self, head: Head, state: u64, slot: u32, value: f64) {
        *self
            .table_mut(head)
            .entry(state)
            .or_default()
            .entry(slot)
            .or_insert(0.0) = value;
    }

    /// Add `delta` to one logit. A zero delta is a no-op, so updates never
    /// materialize entries that would read as zero anyway.
    pub fn bump(&mut self, head: Head, state: u64, slot: u32, delta: f64) {
        if delta == 0.0 {
            return;
        }
        *self
            .table_mut(head)
            .entry(state)
            .or_default()
            .entry(slot)
            .or_insert(0.0) += delta;
    }

    /// Iterate stored rows of one head, sorted by state.
    pub fn rows(&self, head: Head) -> impl Iterator<Item = (u64, &BTreeMap<u32, f64>)> {
        self.table(head).iter().map(|(s, r)| (*s, r))
    }

    /// States with any stored entry, across all heads.
    pub fn touched_states(&self) -> std::collections::BTreeSet<u64> {
        Head::ALL
            .iter()
            .flat_map(|h| self.table(*h).keys().copied())
            .collect()
    }

    fn decode(&self, head: Head, state: u64, n: usize, mode: DecodeMode, rng: &mut impl Rng) -> HeadChoice {
        let logits = self.logits(head, state, n);
        match mode {
            DecodeMode::Greedy => {
                let probs = softmax(&logits, 1.0);
                let index = argmax(&logits);
                HeadChoice {
                    index,
                    logprob: probs[index].ln(),
                }
            }
            DecodeMode::Sample(t) => {
                let probs = softmax(&logits, t);
                let index = rng::sample_index(&probs, rng);
                HeadChoice {
                    index,
                    logprob: probs[index].ln(),
                }
            }
        }
    }

    /// Decode all three heads for one state. `n_candidates` and `n_values`
    /// give the head widths at this observation. Greedy decoding ignores the
    /// rng and never draws from it.
    pub fn plan_step(
        &self,
        state: u64,
        n_candidates: usize,
        n_values: usize,
        mode: DecodeMode,
        rng: &mut impl Rng,
    ) -> PlannerOutput {
        PlannerOutput {
            state,
            plan: self.decode(Head::Plan, state, n_candidates, mode, rng),
            action_type: self.decode(Head::Type, state, crate::env::ActionType::COUNT, mode, rng),
            value: self.decode(Head::Value, state, n_values, mode, rng),
        }
    }
}

/// A grounder's resolution of a plan on a screen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grounding {
    pub element_index: usize,
    pub coor: (f64, f64),
    /// Log-probability of the chosen element under the temperature-1 softmax
    /// over element scores.
    pub confidence: f64,
}

/// Token-affinity grounder: scores each element by summed plan-token ×
/// attribute-token affinities plus a per-role bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrounderModel {
    pub model_tag: String,
    affinity: BTreeMap<String, BTreeMap<String, f64>>,
    bias: BTreeMap<String, f64>,
}

impl GrounderModel {
    pub fn new(model_tag: impl Into<String>) -> Self {
        GrounderModel {
            model_tag: model_tag.into(),
            affinity: BTreeMap::new(),
            bias: BTreeMap::new(),
        }
    }

    pub fn affinity(&self, plan_token: &str, attr_token: &str) -> f64 {
        self.affinity
            .get(plan_token)
            .and_then(|r| r.get(attr_token))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn bias(&self, role: &str) -> f64 {
        self.bias.get(role).copied().unwrap_or(0.0)
    }

    pub fn set_affinity(&mut self, plan_token: &str, attr_token: &str, w: f64) {
        *self
            .affinity
            .entry(plan_token.to_string())
            .or_default()
            .entry(attr_token.to_string())
            .or_insert(0.0) = w;
    }

    pub fn bump_affinity(&mut self, plan_token: &str, attr_token: &str, delta: f64) {
        if delta == 0.0 {
            return;
        }
        *self
            .affinity
            .entry(plan_token.to_string())
            .or_default()
            .entry(attr_token.to_string())
            .or_insert(0.0) += delta;
    }

    pub fn set_bias(&mut self, role: &str, w: f64) {
        *self.bias.entry(role.to_string()).or_insert(0.0) = w;
    }

    pub fn bump_bias(&mut self, role: &str, delta: f64) {
        if delta == 0.0 {
            return;
        }
        *self.bias.entry(role.to_string()).or_insert(0.0) += delta;
    }

    pub fn affinity_rows(&self) -> impl Iterator<Item = (&String, &BTreeMap<String, f64>)> {
        self.affinity.iter()
    }

    pub fn bias_row(&self) -> &BTreeMap<String, f64> {
        &self.bias
    }

    pub fn score(&self, element: &Element, plan: &[String]) -> f64 {
        let mut s = self.bias(element.role());
        for t in plan {
            for a in &element.attrs {
                s += self.affinity(t, a);
            }
        }
        s
    }

    /// Resolve a plan to an element: argmax score (lowest index on ties),
    /// click point at the element's center, confidence from the softmax over
    /// scores.
    pub fn ground_step(&self, screen: &Screen, plan: &[String]) -> Result<Grounding> {
        if screen.elements.is_empty() {
            return Err(Error::Invalid(format!(
                "cannot ground on screen {} with no elements",
                screen.id
            )));
        }
        let scores: Vec<f64> = screen
            .elements
            .iter()
            .map(|e| self.score(e, plan))
            .collect();
        let probs = softmax(&scores, 1.0);
        let element_index = argmax(&scores);
        Ok(Grounding {
            element_index,
            coor: screen.elements[element_index].bbox.center(),
            confidence: probs[element_index].ln(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionType, BBox};
    use crate::rng::stream;

    fn strs(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn softmax_is_shift_invariant_and_normalized() {
        let a = softmax(&[1.0, 2.0, 3.0], 1.0);
        let b = softmax(&[101.0, 102.0, 103.0], 1.0);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn higher_temperature_flattens_the_distribution() {
        let logits = [0.0, 1.5, -0.5];
        let entropy = |p: &[f64]| -> f64 { p.iter().map(|&x| -x * x.ln()).sum() };
        let cold = entropy(&softmax(&logits, 0.5));
        let warm = entropy(&softmax(&logits, 1.0));
        let hot = entropy(&softmax(&logits, 2.0));
        assert!(cold < warm && warm < hot);
    }

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[2.0, 2.0, 2.0]), 0);
        assert_eq!(argmax(&[0.0, 3.0, 1.0]), 1);
    }

    #[test]
    fn greedy_logprob_comes_from_temperature_one_softmax() {
        let mut m = PlannerModel::new(0.9);
        let st = 42u64;
        m.set(Head::Plan, st, 1, 3.0);
        m.set(Head::Plan, st, 2, 1.0);
        let mut rng = stream(0, "unused", &[]);
        let out = m.plan_step(st, 3, 1, DecodeMode::Greedy, &mut rng);
        assert_eq!(out.plan.index, 1);
        // logits (0, 3, 1): log softmax at index 1 = 3 - ln(e^0 + e^3 + e^1)
        let expected = 3.0 - (1.0 + 3f64.exp() + 1f64.exp()).ln();
        assert!((out.plan.logprob - expected).abs() < 1e-12);
        assert!((-0.1699..=-0.1698).contains(&out.plan.logprob));
    }

    #[test]
    fn uniform_two_way_head_reports_log_half() {
        let m = PlannerModel::new(0.9);
        let mut rng = stream(0, "unused", &[]);
        let out = m.plan_step(7, 2, 2, DecodeMode::Greedy, &mut rng);
        assert_eq!(out.plan.index, 0); // tie -> lowest index
        assert!((out.plan.logprob - 0.5f64.ln()).abs() < 1e-12);
        assert!((out.value.logprob - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn sampled_logprob_matches_recomputed_tempered_softmax() {
        let mut m = PlannerModel::new(0.9);
        let st = 9u64;
        for (i, l) in [0.3, -1.2, 2.0, 0.0, 0.7].iter().enumerate() {
            m.set(Head::Plan, st, i as u32, *l);
        }
        m.set(Head::Type, st, 2, 1.1);
        m.set(Head::Value, st, 3, -0.4);
        let temp = 0.9;
        for draw in 0..50u64 {
            let mut rng = stream(5, "sample", &[draw]);
            let out = m.plan_step(st, 5, 6, DecodeMode::Sample(temp), &mut rng);
            for (head, n, choice) in [
                (Head::Plan, 5, out.plan),
                (Head::Type, ActionType::COUNT, out.action_type),
                (Head::Value, 6, out.value),
            ] {
                let probs = softmax(&m.logits(head, st, n), temp);
                assert!(choice.index < n);
                assert!((choice.logprob - probs[choice.index].ln()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_given_the_stream() {
        let mut m = PlannerModel::new(0.9);
        m.set(Head::Plan, 3, 0, 0.5);
        let a = m.plan_step(3, 4, 5, DecodeMode::Sample(0.9), &mut stream(1, "s", &[2]));
        let b = m.plan_step(3, 4, 5, DecodeMode::Sample(0.9), &mut stream(1, "s", &[2]));
        assert_eq!(a, b);
    }

    #[test]
    fn state_feature_is_stable_in_range_and_sensitive() {
        let a = state_feature(1, 2, 0, 0, 1024);
        assert_eq!(a, state_feature(1, 2, 0, 0, 1024));
        assert!(a < 1024);
        let others = [
            state_feature(2, 2, 0, 0, 1024),
            state_feature(1, 3, 0, 0, 1024),
            state_feature(1, 2, 1, 1, 1024),
        ];
        assert!(others.iter().any(|&o| o != a));
    }

    fn two_element_screen() -> Screen {
        Screen {
            id: 0,
            elements: vec![
                Element {
                    id: 0,
                    bbox: BBox::new(0.0, 0.0, 0.4, 1.0),
                    attrs: strs(&["button", "search"]),
                    affordances: vec![ActionType::Click],
                },
                Element {
                    id: 1,
                    bbox: BBox::new(0.6, 0.0, 1.0, 1.0),
                    attrs: strs(&["button", "cancel"]),
                    affordances: vec![ActionType::Click],
                },
            ],
        }
    }

    #[test]
    fn grounder_resolves_by_affinity_and_reports_confidence() {
        let screen = two_element_screen();
        let mut g = GrounderModel::new("test");
        g.set_affinity("cancel", "cancel", 2.0);
        let out = g.ground_step(&screen, &strs(&["button", "cancel"])).unwrap();
        assert_eq!(out.element_index, 1);
        assert_eq!(out.coor, (0.8, 0.5));
        let probs = softmax(&[0.0, 2.0], 1.0);
        assert!((out.confidence - probs[1].ln()).abs() < 1e-12);
    }

    #[test]
    fn tied_scores_ground_to_the_first_element_at_log_half() {
        let screen = two_element_screen();
        let g = GrounderModel::new("uniform");
        let out = g.ground_step(&screen, &strs(&["button"])).unwrap();
        assert_eq!(out.element_index, 0);
        assert!((out.confidence - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn grounding_is_invariant_to_uniform_bias_shifts() {
        let screen = two_element_screen();
        let mut g = GrounderModel::new("shift");
        g.set_affinity("search", "search", 1.3);
        g.set_affinity("button", "cancel", -0.4);
        let before = g.ground_step(&screen, &strs(&["button", "search"])).unwrap();
        g.bump_bias("button", 7.0); // both elements share the role
        let after = g.ground_step(&screen, &strs(&["button", "search"])).unwrap();
        assert_eq!(before.element_index, after.element_index);
        assert!((before.confidence - after.confidence).abs() < 1e-12);
    }

    #[test]
    fn grounding_an_empty_screen_errors() {
        let g = GrounderModel::new("x");
        let empty = Screen {
            id: 0,
            elements: vec![],
        };
        assert!(g.ground_step(&empty, &strs(&["button"])).is_err());
    }
}
