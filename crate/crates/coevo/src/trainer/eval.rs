//! Greedy, teacher-forced evaluation of a planner/grounder pair.
//!
//! Each step is judged against its own ground truth with history taken from
//! ground-truth actions, so step k's score never depends on earlier
//! mistakes. Three metrics per split: element accuracy (did the grounded
//! click land in the target box), operation F1 (bag F1 over the action type
//! token plus value tokens), and step success rate (element, type, and value
//! all correct at once).

use serde::{Deserialize, Serialize};

use crate::env::{enumerate_plan_candidates, token_f1, value_matches, ActionType, Benchmark, Split};
use crate::error::{Error, Result};
use crate::policy::{observation_feature, DecodeMode, GrounderModel, PlannerModel};
use crate::reward::acc_plan;
use crate::rng::stream;

/// Aggregate metrics for one split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ele_acc: f64,
    pub op_f1: f64,
    pub step_sr: f64,
    pub steps: usize,
}

/// One evaluated step; aggregates are recomputable from these rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepEval {
    pub task_id: u32,
    pub step_index: u32,
    pub element_hit: bool,
    pub type_hit: bool,
    pub value_hit: bool,
    pub op_f1: f64,
}

impl StepEval {
    pub fn success(&self) -> bool {
        self.element_hit && self.type_hit && self.value_hit
    }
}

/// Mean the per-step rows into split metrics.
pub fn aggregate(rows: &[StepEval]) -> Metrics {
    let n = rows.len().max(1) as f64;
    Metrics {
        ele_acc: rows.iter().filter(|r| r.element_hit).count() as f64 / n,
        op_f1: rows.iter().map(|r| r.op_f1).sum::<f64>() / n,
        step_sr: rows.iter().filter(|r| r.success()).count() as f64 / n,
        steps: rows.len(),
    }
}

/// Evaluate every step of a split, greedy decoding on both policies.
pub fn evaluate_detailed(
    planner: &PlannerModel,
    grounder: &GrounderModel,
    bench: &Benchmark,
    split: Split,
    buckets: u32,
) -> Result<Vec<StepEval>> {
    let tasks: Vec<_> = bench.tasks_in(split).collect();
    if tasks.is_empty() {
        return Err(Error::Invalid(format!(
            "split `{}` has no tasks to evaluate",
            split.as_str()
        )));
    }
    let mut rng = stream(0, "eval", &[]); // greedy decoding never draws
    let mut rows = Vec::new();
    for task in tasks {
        for (si, step) in task.steps.iter().enumerate() {
            let obs = bench.observe(task, si)?;
            let cands = enumerate_plan_candidates(obs.screen, None);
            let state = observation_feature(&obs, buckets);
            let out = planner.plan_step(
                state,
                cands.len(),
                bench.value_pool.len(),
                DecodeMode::Greedy,
                &mut rng,
            );
            let plan = &cands[out.plan.index].tokens;
            let pred_type = ActionType::from_index(out.action_type.index)
                .expect("type head width is fixed");
            let pred_value = bench
                .value_pool
                .get(out.value.index)
                .expect("value head width matches the pool");
            let grounding = grounder.ground_step(obs.screen, plan)?;
            let gt_bbox = &obs.screen.elements[step.target as usize].bbox;

            let mut pred_bag: Vec<String> = vec![pred_type.token().to_string()];
            pred_bag.extend(pred_value.iter().cloned());
            let mut gt_bag: Vec<String> = vec![step.action.token().to_string()];
            gt_bag.extend(step.value.iter().cloned());

            rows.push(StepEval {
                task_id: task.id,
                step_index: si as u32,
                element_hit: acc_plan(gt_bbox, grounding.coor) == 1.0,
                type_hit: pred_type == step.action,
                value_hit: value_matches(pred_value, &step.value),
                op_f1: token_f1(&pred_bag, &gt_bag),
            });
        }
    }
    Ok(rows)
}

/// Split metrics for a planner/grounder pair.
pub fn evaluate(
    planner: &PlannerModel,
    grounder: &GrounderModel,
    bench: &Benchmark,
    split: Split,
    buckets: u32,
) -> Result<Metrics> {
    Ok(aggregate(&evaluate_detailed(planner, grounder, bench, split, buckets)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapool::tests_support::tiny_benchmark;
    use crate::policy::oracle_models;

    #[test]
    fn oracle_pair_scores_one_on_every_metric() {
        let bench = tiny_benchmark();
        let (planner, grounder) = oracle_models(&bench, 1024).unwrap();
        let m = evaluate(&planner, &grounder, &bench, Split::Train, 1024).unwrap();
        assert_eq!(m.ele_acc, 1.0);
        assert_eq!(m.op_f1, 1.0);
        assert_eq!(m.step_sr, 1.0);
        assert_eq!(m.steps, 2);
    }

    #[test]
    fn hopeless_grounding_zeroes_elements_but_not_op_f1() {
        let bench = tiny_benchmark();
        let (planner, _) = oracle_models(&bench, 1024).unwrap();
        // a grounder that always lands on the top-left element, whose box is
        // away from every target in the fixture
        let mut bad = GrounderModel::new("bad");
        bad.set_bias("menu", 100.0);
        let m = evaluate(&planner, &bad, &bench, Split::Train, 1024).unwrap();
        assert_eq!(m.ele_acc, 0.0);
        assert_eq!(m.step_sr, 0.0);
        assert_eq!(m.op_f1, 1.0, "operation F1 never looks at grounding");
    }

    #[test]
    fn aggregates_match_per_step_rows() {
        let bench = tiny_benchmark();
        let (planner, grounder) = oracle_models(&bench, 1024).unwrap();
        let rows = evaluate_detailed(&planner, &grounder, &bench, Split::Train, 1024).unwrap();
        let direct = evaluate(&planner, &grounder, &bench, Split::Train, 1024).unwrap();
        assert_eq!(aggregate(&rows), direct);
        assert_eq!(rows.len(), direct.steps);
    }

    #[test]
    fn success_requires_every_component() {
        let row = StepEval {
            task_id: 0,
            step_index: 0,
            element_hit: true,
            type_hit: true,
            value_hit: false,
            op_f1: 0.5,
        };
        assert!(!row.success());
        let m = aggregate(&[row.clone(), StepEval { value_hit: true, ..row }]);
        assert_eq!(m.step_sr, 0.5);
        assert_eq!(m.ele_acc, 1.0);
        assert!(m.step_sr <= m.ele_acc);
    }

    #[test]
    fn empty_splits_error() {
        // the tiny fixture only populates the train split
        let bench = tiny_benchmark();
        let (planner, grounder) = oracle_models(&bench, 1024).unwrap();
        assert!(evaluate(&planner, &grounder, &bench, Split::HeldOutTask, 1024).is_err());
    }

    #[test]
    fn mistyped_actions_lower_op_f1_without_touching_elements() {
        let bench = tiny_benchmark();
        let (mut planner, grounder) = oracle_models(&bench, 1024).unwrap();
        // flip the type head of the first step's state to a wrong action
        let task = &bench.tasks[0];
        let obs = bench.observe(task, 0).unwrap();
        let state = observation_feature(&obs, 1024);
        planner.set(crate::policy::Head::Type, state, ActionType::Select.index() as u32, 20.0);
        let m = evaluate(&planner, &grounder, &bench, Split::Train, 1024).unwrap();
        assert_eq!(m.ele_acc, 1.0);
        assert!(m.step_sr < 1.0);
        assert!(m.op_f1 < 1.0);
        // the gt bag for a CLICK step is just the type token, so a wrong
        // type on one of two steps costs exactly half
        assert!((m.op_f1 - 0.5).abs() < 1e-12, "{}", m.op_f1);
    }
}
