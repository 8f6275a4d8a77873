//! Synthetic GUI world: screens of attributed elements, multi-step tasks with
//! ground-truth actions, observations, and a teacher-forced step transition.
//!
//! The world is an episodic POMDP. An observation exposes the current
//! screen's element list (attributes and affordances, not ground truth); an
//! action is a triple of click/typing coordinates, an action type, and a
//! value-token bag. Steps are verified teacher-forced: after each step the
//! episode advances along the task's ground-truth journey regardless of what
//! the policy did, so per-step credit is exact.

mod build;
mod candidates;
mod io;

pub use build::{build_benchmark, BenchmarkSpec, SplitFractions};
pub use candidates::{enumerate_plan_candidates, PlanCandidate};
pub use io::{benchmark_to_jsonl, load_benchmark, parse_benchmark, save_benchmark};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Axis-aligned box in normalized screen coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl BBox {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BBox { x0, y0, x1, y1 }
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x0 + self.x1) / 2.0, (self.y0 + self.y1) / 2.0)
    }

    /// Edge-inclusive containment test.
    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.x0 <= x && x <= self.x1 && self.y0 <= y && y <= self.y1
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        BBox::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_well_formed(&self) -> bool {
        self.x0.is_finite()
            && self.y0.is_finite()
            && self.x1.is_finite()
            && self.y1.is_finite()
            && self.x0 <= self.x1
            && self.y0 <= self.y1
    }
}

/// The three GUI action types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ActionType {
    Click,
    Type,
    Select,
}

impl ActionType {
    pub const ALL: [ActionType; 3] = [ActionType::Click, ActionType::Type, ActionType::Select];
    pub const COUNT: usize = 3;

    pub fn token(self) -> &'static str {
        match self {
            ActionType::Click => "CLICK",
            ActionType::Type => "TYPE",
            ActionType::Select => "SELECT",
        }
    }

    pub fn index(self) -> usize {
        match self {
            ActionType::Click => 0,
            ActionType::Type => 1,
            ActionType::Select => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<ActionType> {
        Self::ALL.get(i).copied()
    }

    pub fn from_token(s: &str) -> Option<ActionType> {
        match s {
            "CLICK" => Some(ActionType::Click),
            "TYPE" => Some(ActionType::Type),
            "SELECT" => Some(ActionType::Select),
            _ => None,
        }
    }
}

impl std::fmt::Display for ActionType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// One interactive element. `attrs[0]` is the role token; the rest are
/// label tokens. Plans reference elements purely through these tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub id: u32,
    pub bbox: BBox,
    pub attrs: Vec<String>,
    pub affordances: Vec<ActionType>,
}

impl Element {
    pub fn role(&self) -> &str {
        &self.attrs[0]
    }

    pub fn labels(&self) -> &[String] {
        &self.attrs[1..]
    }

    pub fn has_attrs(&self, tokens: &[String]) -> bool {
        tokens.iter().all(|t| self.attrs.iter().any(|a| a == t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Screen {
    pub id: u32,
    pub elements: Vec<Element>,
}

/// Benchmark splits. `Train` drives every learning phase; the three held-out
/// splits vary what is novel: the task journey, the screens, or the task
/// feature (domain) itself.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    HeldOutTask,
    HeldOutScreen,
    HeldOutDomain,
}

impl Split {
    pub const ALL: [Split; 4] = [
        Split::Train,
        Split::HeldOutTask,
        Split::HeldOutScreen,
        Split::HeldOutDomain,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::HeldOutTask => "held_out_task",
            Split::HeldOutScreen => "held_out_screen",
            Split::HeldOutDomain => "held_out_domain",
        }
    }

    pub fn from_str(s: &str) -> Option<Split> {
        Split::ALL.iter().copied().find(|x| x.as_str() == s)
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ground truth for one task step.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskStep {
    pub screen_id: u32,
    pub target: u32,
    pub action: ActionType,
    pub value: Vec<String>,
}

/// A multi-step task: a feature id (the "what the user wants" slot of the
/// instruction) plus a journey of screens with one ground-truth step each.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: u32,
    pub q_feature: u32,
    pub split: Split,
    pub steps: Vec<TaskStep>,
}

/// Finite value vocabulary the planner's value head selects from: the empty
/// bag first, then every distinct ground-truth bag, then leftover single
/// tokens. Derived deterministically from the task set.
#[derive(Debug, Clone, PartialEq)]
pub struct ValuePool {
    entries: Vec<Vec<String>>,
}

impl ValuePool {
    pub fn from_tasks(tasks: &[Task]) -> ValuePool {
        use std::collections::BTreeSet;
        let bags: BTreeSet<Vec<String>> = tasks
            .iter()
            .flat_map(|t| t.steps.iter())
            .filter(|s| !s.value.is_empty())
            .map(|s| s.value.clone())
            .collect();
        let singles: BTreeSet<Vec<String>> = bags
            .iter()
            .flat_map(|bag| bag.iter())
            .map(|tok| vec![tok.clone()])
            .filter(|single| !bags.contains(single))
            .collect();
        let mut entries = vec![Vec::new()];
        entries.extend(bags);
        entries.extend(singles);
        ValuePool { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<&[String]> {
        self.entries.get(i).map(|v| v.as_slice())
    }

    pub fn index_of(&self, value: &[String]) -> Option<usize> {
        self.entries.iter().position(|e| e == value)
    }

    pub fn entries(&self) -> &[Vec<String>] {
        &self.entries
    }
}

/// What a policy sees at one step of a task.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub task_id: u32,
    pub q_feature: u32,
    pub screen: &'a Screen,
    pub step_index: usize,
    /// Number of actions already taken this episode (equals `step_index`
    /// under teacher forcing).
    pub history_len: usize,
}

/// A fully grounded action: where to act, how, and with what value tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct Action {
    pub coor: (f64, f64),
    pub action: ActionType,
    pub value: Vec<String>,
}

/// Step verdict under teacher forcing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub element_hit: bool,
    pub type_hit: bool,
    pub value_hit: bool,
    pub step_success: bool,
}

/// Multiset F1 between two token bags. Two empty bags count as a perfect
/// match; exactly one empty bag scores zero.
pub fn token_f1(a: &[String], b: &[String]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    use std::collections::BTreeMap;
    let mut ca: BTreeMap<&str, usize> = BTreeMap::new();
    for t in a {
        *ca.entry(t.as_str()).or_insert(0) += 1;
    }
    let mut overlap = 0usize;
    for t in b {
        if let Some(c) = ca.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / a.len() as f64;
    let r = overlap as f64 / b.len() as f64;
    2.0 * p * r / (p + r)
}

/// Binary value-correctness criterion: bag F1 strictly above one half.
pub fn value_matches(pred: &[String], gt: &[String]) -> bool {
    token_f1(pred, gt) > 0.5
}

/// The full world: screens, tasks, and the derived value vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub screens: Vec<Screen>,
    pub tasks: Vec<Task>,
    pub value_pool: ValuePool,
}

impl Benchmark {
    /// Assemble from parts, recomputing the value pool.
    pub fn from_parts(screens: Vec<Screen>, tasks: Vec<Task>) -> Benchmark {
        let value_pool = ValuePool::from_tasks(&tasks);
        Benchmark {
            screens,
            tasks,
            value_pool,
        }
    }

    pub fn screen(&self, id: u32) -> Result<&Screen> {
        self.screens
            .get(id as usize)
            .ok_or_else(|| Error::Invalid(format!("screen id {id} out of range")))
    }

    pub fn task(&self, id: u32) -> Result<&Task> {
        self.tasks
            .get(id as usize)
            .ok_or_else(|| Error::Invalid(format!("task id {id} out of range")))
    }

    pub fn tasks_in(&self, split: Split) -> impl Iterator<Item = &Task> {
        self.tasks.iter().filter(move |t| t.split == split)
    }

    /// Observation for one step of a task.
    pub fn observe(&self, task: &Task, step_index: usize) -> Result<Observation<'_>> {
        let step = task.steps.get(step_index).ok_or_else(|| {
            Error::Invalid(format!(
                "step index {step_index} out of range for task {} ({} steps)",
                task.id,
                task.steps.len()
            ))
        })?;
        Ok(Observation {
            task_id: task.id,
            q_feature: task.q_feature,
            screen: self.screen(step.screen_id)?,
            step_index,
            history_len: step_index,
        })
    }

    /// Judge an action against the step's ground truth. Teacher-forced: the
    /// episode advances along the ground-truth journey either way.
    pub fn transition(&self, task: &Task, step_index: usize, action: &Action) -> Result<StepOutcome> {
        let step = task.steps.get(step_index).ok_or_else(|| {
            Error::Invalid(format!(
                "step index {step_index} out of range for task {} ({} steps)",
                task.id,
                task.steps.len()
            ))
        })?;
        let screen = self.screen(step.screen_id)?;
        let target = screen.elements.get(step.target as usize).ok_or_else(|| {
            Error::Invalid(format!(
                "target element {} missing on screen {}",
                step.target, step.screen_id
            ))
        })?;
        let element_hit = target.bbox.contains(action.coor.0, action.coor.1);
        let type_hit = action.action == step.action;
        let value_hit = value_matches(&action.value, &step.value);
        Ok(StepOutcome {
            element_hit,
            type_hit,
            value_hit,
            step_success: element_hit && type_hit && value_hit,
        })
    }

    /// The ground-truth action for a step: click/typing point at the target
    /// element's center with the annotated type and value.
    pub fn gt_action(&self, step: &TaskStep) -> Result<Action> {
        let screen = self.screen(step.screen_id)?;
        let target = screen.elements.get(step.target as usize).ok_or_else(|| {
            Error::Invalid(format!(
                "target element {} missing on screen {}",
                step.target, step.screen_id
            ))
        })?;
        Ok(Action {
            coor: target.bbox.center(),
            action: step.action,
            value: step.value.clone(),
        })
    }

    /// Digest of the teacher-forced action history before `step_index`.
    pub fn history_digest(&self, task: &Task, step_index: usize) -> Result<String> {
        let mut canon = String::new();
        for step in task.steps.iter().take(step_index) {
            let a = self.gt_action(step)?;
            canon.push_str(&format!(
                "({},{})|{}|{};",
                a.coor.0,
                a.coor.1,
                a.action.token(),
                a.value.join(",")
            ));
        }
        Ok(rng::digest_hex(&canon))
    }
}
