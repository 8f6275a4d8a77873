//! Group-relative policy optimization for the tabular planner.
//!
//! For each train step we draw `G` rollouts, score them with the reward
//! ensemble, and normalize rewards within the group to advantages. The
//! objective per group is the mean over rollouts and heads of the clipped
//! importance-weighted surrogate minus a KL penalty against the phase-start
//! reference policy:
//!
//! ```text
//! J = 1/(3G) Σ_i Σ_head [ min(ρ A_i, clip(ρ, 1−ε, 1+ε) A_i) − β KL(π‖π_ref) ]
//! ```
//!
//! with `ρ = exp(logprob_now − logprob_at_sampling)` per head and the KL
//! taken exactly between the categorical head distributions at the rollout
//! temperature. Because the policy is tabular, gradients are computed
//! analytically and can be verified against central finite differences.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datapool::{DatasetRecord, Provenance};
use crate::env::{enumerate_plan_candidates, ActionType, Benchmark, Task};
use crate::error::{Error, Result};
use crate::policy::{
    observation_feature, softmax, DecodeMode, Head, PlannerModel, PlannerOutput,
};
use crate::reward::{score_rollout, EnsembleMember, EnsembleMode, RewardBreakdown};
use crate::rng::stream;

/// Optimization constants. `learning_rate` is sized for tabular logits
/// (LVLM-scale rates would be inert here); the clip/KL/group constants are
/// the usual GRPO values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrpoConfig {
    pub group_size: u32,
    pub clip_eps: f64,
    pub kl_beta: f64,
    pub learning_rate: f64,
    pub temperature: f64,
    pub epochs: u32,
    /// Degenerate-group guard: reward std below this yields zero advantages.
    pub eps_std: f64,
}

impl Default for GrpoConfig {
    fn default() -> Self {
        GrpoConfig {
            group_size: 7,
            clip_eps: 0.2,
            kl_beta: 0.01,
            learning_rate: 0.3,
            temperature: 0.9,
            epochs: 3,
            eps_std: 1e-8,
        }
    }
}

impl GrpoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::Config(format!(
                "grpo.group_size must be ≥ 2 (got {})",
                self.group_size
            )));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!(
                "grpo.clip_eps must lie in (0, 1) (got {})",
                self.clip_eps
            )));
        }
        if self.kl_beta < 0.0 {
            return Err(Error::Config(format!(
                "grpo.kl_beta must be ≥ 0 (got {})",
                self.kl_beta
            )));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!(
                "grpo.temperature must be > 0 (got {})",
                self.temperature
            )));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "grpo.learning_rate must be a finite non-negative number (got {})",
                self.learning_rate
            )));
        }
        if !(self.eps_std > 0.0) {
            return Err(Error::Config(format!(
                "grpo.eps_std must be > 0 (got {})",
                self.eps_std
            )));
        }
        Ok(())
    }
}

/// One sampled generation with its reward decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub planner_output: PlannerOutput,
    pub breakdown: RewardBreakdown,
    pub state_feature: u64,
    pub candidate_count: usize,
    pub value_count: usize,
}

/// A group of rollouts drawn at the same state, with normalized advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutGroup {
    pub rollouts: Vec<Rollout>,
    pub advantages: Vec<f64>,
}

impl RolloutGroup {
    /// Build a group from rollouts, normalizing final rewards to advantages.
    pub fn new(rollouts: Vec<Rollout>, eps_std: f64) -> Result<RolloutGroup> {
        let rewards: Vec<f64> = rollouts.iter().map(|r| r.breakdown.r_final).collect();
        let advantages = group_advantages(&rewards, eps_std)?;
        Self::from_parts(rollouts, advantages)
    }

    /// Assemble a group with explicit advantages (tests and gradient checks).
    pub fn from_parts(rollouts: Vec<Rollout>, advantages: Vec<f64>) -> Result<RolloutGroup> {
        if rollouts.len() != advantages.len() {
            return Err(Error::Invalid(format!(
                "group has {} rollouts but {} advantages",
                rollouts.len(),
                advantages.len()
            )));
        }
        let first = rollouts.first().ok_or_else(|| {
            Error::Invalid("rollout group is empty".into())
        })?;
        for r in &rollouts {
            if r.state_feature != first.state_feature
                || r.candidate_count != first.candidate_count
                || r.value_count != first.value_count
            {
                return Err(Error::Invalid(format!(
                    "mismatched state features within a rollout group: \
                     ({}, {}, {}) vs ({}, {}, {})",
                    r.state_feature,
                    r.candidate_count,
                    r.value_count,
                    first.state_feature,
                    first.candidate_count,
                    first.value_count
                )));
            }
        }
        Ok(RolloutGroup {
            rollouts,
            advantages,
        })
    }

    pub fn state_feature(&self) -> u64 {
        self.rollouts[0].state_feature
    }

    fn head_width(&self, head: Head) -> usize {
        match head {
            Head::Plan => self.rollouts[0].candidate_count,
            Head::Type => ActionType::COUNT,
            Head::Value => self.rollouts[0].value_count,
        }
    }
}

/// Normalize rewards within a group: `(r − mean) / std` with population std
/// (divisor G). Degenerate groups (std < `eps_std`) yield all zeros.
pub fn group_advantages(rewards: &[f64], eps_std: f64) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::Invalid(format!(
            "advantage normalization needs a group of at least 2 rollouts (got {g})"
        )));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    if std < eps_std {
        return Ok(vec![0.0; g]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

fn head_choice(o: &PlannerOutput, head: Head) -> crate::policy::HeadChoice {
    match head {
        Head::Plan => o.plan,
        Head::Type => o.action_type,
        Head::Value => o.value,
    }
}

type Grads = BTreeMap<(u64, u32), f64>;

struct GroupTerms {
    objective: f64,
    grads: [Grads; 3],
    kl_sum: f64,
    clip_count: usize,
    term_count: usize,
}

/// Objective, analytic gradient, and diagnostics for one group, all from the
/// same pass so they can never disagree.
fn group_terms(
    policy: &PlannerModel,
    reference: &PlannerModel,
    group: &RolloutGroup,
    cfg: &GrpoConfig,
) -> Result<GroupTerms> {
    let g = group.rollouts.len();
    let state = group.state_feature();
    let tau = cfg.temperature;
    let scale = 1.0 / (3.0 * g as f64);
    let mut objective = 0.0;
    let mut grads: [Grads; 3] = [BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
    let mut kl_sum = 0.0;
    let mut clip_count = 0usize;
    let mut term_count = 0usize;

    for (rollout, &adv) in group.rollouts.iter().zip(group.advantages.iter()) {
        for (hi, head) in Head::ALL.iter().enumerate() {
            let n = group.head_width(*head);
            let choice = head_choice(&rollout.planner_output, *head);
            if choice.index >= n {
                return Err(Error::Invalid(format!(
                    "rollout chose slot {} on a {}-wide {} head",
                    choice.index,
                    n,
                    head.name()
                )));
            }
            let probs = softmax(&policy.logits(*head, state, n), tau);
            let lp_now = probs[choice.index].ln();
            let rho = (lp_now - choice.logprob).exp();
            let clipped_rho = rho.clamp(1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
            objective += scale * (rho * adv).min(clipped_rho * adv);
            // the clipped branch is active where the surrogate gradient dies
            let clip_active = (adv > 0.0 && rho > 1.0 + cfg.clip_eps)
                || (adv < 0.0 && rho < 1.0 - cfg.clip_eps);
            if clip_active {
                clip_count += 1;
            } else {
                for j in 0..n {
                    let ind = if j == choice.index { 1.0 } else { 0.0 };
                    *grads[hi].entry((state, j as u32)).or_insert(0.0) +=
                        scale * rho * adv * (ind - probs[j]) / tau;
                }
            }
            if cfg.kl_beta > 0.0 {
                let q = softmax(&reference.logits(*head, state, n), tau);
                let kl: f64 = probs
                    .iter()
                    .zip(q.iter())
                    .map(|(p, qq)| p * (p.ln() - qq.ln()))
                    .sum();
                objective -= scale * cfg.kl_beta * kl;
                kl_sum += kl;
                for j in 0..n {
                    *grads[hi].entry((state, j as u32)).or_insert(0.0) -=
                        scale * cfg.kl_beta * (probs[j] / tau) * ((probs[j].ln() - q[j].ln()) - kl);
                }
            }
            term_count += 1;
        }
    }
    Ok(GroupTerms {
        objective,
        grads,
        kl_sum,
        clip_count,
        term_count,
    })
}

/// The scalar GRPO objective for one group (higher is better).
pub fn grpo_objective(
    policy: &PlannerModel,
    reference: &PlannerModel,
    group: &RolloutGroup,
    cfg: &GrpoConfig,
) -> Result<f64> {
    Ok(group_terms(policy, reference, group, cfg)?.objective)
}

/// Diagnostics aggregated over groups at the current policy (pre-update).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrpoDiagnostics {
    pub mean_reward: f64,
    pub mean_advantage_abs: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

pub fn grpo_diagnostics(
    policy: &PlannerModel,
    reference: &PlannerModel,
    groups: &[RolloutGroup],
    cfg: &GrpoConfig,
) -> Result<GrpoDiagnostics> {
    let mut reward_sum = 0.0;
    let mut adv_sum = 0.0;
    let mut n_rollouts = 0usize;
    let mut kl_sum = 0.0;
    let mut clip_count = 0usize;
    let mut term_count = 0usize;
    for group in groups {
        let terms = group_terms(policy, reference, group, cfg)?;
        kl_sum += terms.kl_sum;
        clip_count += terms.clip_count;
        term_count += terms.term_count;
        for r in &group.rollouts {
            reward_sum += r.breakdown.r_final;
            n_rollouts += 1;
        }
        for a in &group.advantages {
            adv_sum += a.abs();
        }
    }
    let nr = n_rollouts.max(1) as f64;
    let nt = term_count.max(1) as f64;
    Ok(GrpoDiagnostics {
        mean_reward: reward_sum / nr,
        mean_advantage_abs: adv_sum / nr,
        kl: kl_sum / nt,
        clip_fraction: clip_count as f64 / nt,
    })
}

/// One exact gradient-ascent step on the summed per-group objectives.
/// Groups live at disjoint (or colliding-by-design) states; their gradients
/// are accumulated and applied once. Deterministic given inputs.
pub fn grpo_step(
    policy: &PlannerModel,
    reference: &PlannerModel,
    groups: &[RolloutGroup],
    cfg: &GrpoConfig,
) -> Result<PlannerModel> {
    if groups.is_empty() {
        return Err(Error::Invalid("grpo_step needs at least one rollout group".into()));
    }
    let mut total: [Grads; 3] = [BTreeMap::new(), BTreeMap::new(), BTreeMap::new()];
    for group in groups {
        let terms = group_terms(policy, reference, group, cfg)?;
        for (acc, g) in total.iter_mut().zip(terms.grads.into_iter()) {
            for (key, v) in g {
                *acc.entry(key).or_insert(0.0) += v;
            }
        }
    }
    let mut out = policy.clone();
    for (hi, head) in Head::ALL.iter().enumerate() {
        for (&(state, slot), &g) in &total[hi] {
            out.bump(*head, state, slot, cfg.learning_rate * g);
        }
    }
    Ok(out)
}

/// Result of verifying analytic gradients against central finite differences.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_err: f64,
    pub checked: usize,
    pub pass: bool,
    /// (head, state, slot) of the worst-deviating logit, if any was checked.
    pub worst: Option<(&'static str, u64, u32)>,
}

/// Compare the analytic gradient of `grpo_objective` for one group against
/// central finite differences over every logit the group touches. The error
/// is relative with an absolute floor of 1e-5 so identically-zero gradients
/// compare clean.
pub fn finite_diff_check(
    policy: &PlannerModel,
    reference: &PlannerModel,
    group: &RolloutGroup,
    cfg: &GrpoConfig,
    h: f64,
    tol: f64,
) -> Result<FiniteDiffReport> {
    if !(h > 0.0) {
        return Err(Error::Invalid(format!("finite difference step must be > 0 (got {h})")));
    }
    let terms = group_terms(policy, reference, group, cfg)?;
    let state = group.state_feature();
    let mut max_rel_err: f64 = 0.0;
    let mut worst = None;
    let mut checked = 0usize;
    for (hi, head) in Head::ALL.iter().enumerate() {
        let n = group.head_width(*head);
        for slot in 0..n as u32 {
            let orig = policy.get(*head, state, slot);
            let mut plus = policy.clone();
            plus.set(*head, state, slot, orig + h);
            let mut minus = policy.clone();
            minus.set(*head, state, slot, orig - h);
            let j_plus = grpo_objective(&plus, reference, group, cfg)?;
            let j_minus = grpo_objective(&minus, reference, group, cfg)?;
            let fd = (j_plus - j_minus) / (2.0 * h);
            let an = terms.grads[hi].get(&(state, slot)).copied().unwrap_or(0.0);
            let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(1e-5);
            checked += 1;
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = Some((head.name(), state, slot));
            }
        }
    }
    Ok(FiniteDiffReport {
        max_rel_err,
        checked,
        pass: max_rel_err <= tol,
        worst,
    })
}

/// Per-epoch training log row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpochLog {
    pub epoch: u32,
    pub mean_reward: f64,
    pub mean_advantage_abs: f64,
    pub kl: f64,
    pub clip_fraction: f64,
}

/// Output of one collaborative optimization phase.
#[derive(Debug, Clone)]
pub struct GrpoOutcome {
    pub planner: PlannerModel,
    pub distilled: Vec<DatasetRecord>,
    pub log: Vec<EpochLog>,
}

/// Run the full rollout/score/step phase over the train split.
///
/// Each epoch re-draws `G` rollouts per train step from the *current* policy
/// (streams keyed by `(seed, iteration, epoch, task, step)`), scores them
/// with the ensemble, and applies one `grpo_step` over all groups. The
/// reference policy for the KL term is snapshotted once at phase start.
/// Rollouts whose final reward is exactly 1 are distilled into dataset
/// records (deduplicated per `(state, plan, type, value)`), even when
/// `cfg.epochs == 0`, in which case a single rollout pass runs and the
/// planner is returned unchanged.
#[allow(clippy::too_many_arguments)]
pub fn collaborative_grpo(
    planner: &PlannerModel,
    members: &[EnsembleMember],
    mode: EnsembleMode,
    single_index: usize,
    bench: &Benchmark,
    state_buckets: u32,
    cfg: &GrpoConfig,
    seed: u64,
    iteration: u32,
) -> Result<GrpoOutcome> {
    cfg.validate()?;
    if members.is_empty() {
        return Err(Error::EmptyPool("reward ensemble has no members".into()));
    }
    let train: Vec<&Task> = bench.tasks_in(crate::env::Split::Train).collect();
    if train.is_empty() {
        return Err(Error::Invalid("train split has no tasks to roll out on".into()));
    }
    let steps: Vec<(&Task, usize)> = train
        .iter()
        .flat_map(|t| (0..t.steps.len()).map(move |si| (*t, si)))
        .collect();

    let reference = planner.clone();
    let mut policy = planner.clone();
    let mut distilled: BTreeMap<(u64, Vec<String>, u8, Vec<String>), DatasetRecord> =
        BTreeMap::new();
    let mut log = Vec::new();

    type StepYield = (RolloutGroup, Vec<((u64, Vec<String>, u8, Vec<String>), DatasetRecord)>);

    for epoch in 0..cfg.epochs.max(1) {
        let current = &policy;
        let results: Vec<StepYield> = steps
            .par_iter()
            .map(|&(task, si)| -> Result<StepYield> {
                let step = &task.steps[si];
                let obs = bench.observe(task, si)?;
                let cands = enumerate_plan_candidates(obs.screen, None);
                let n_cands = cands.len();
                let n_values = bench.value_pool.len();
                let state = observation_feature(&obs, state_buckets);
                let mut rng = stream(
                    seed,
                    "roll",
                    &[u64::from(iteration), u64::from(epoch), u64::from(task.id), si as u64],
                );
                let mut rollouts = Vec::with_capacity(cfg.group_size as usize);
                let mut found = Vec::new();
                for _ in 0..cfg.group_size {
                    let out = current.plan_step(
                        state,
                        n_cands,
                        n_values,
                        DecodeMode::Sample(cfg.temperature),
                        &mut rng,
                    );
                    let plan = cands[out.plan.index].tokens.clone();
                    let pred_type = ActionType::from_index(out.action_type.index)
                        .expect("type head width is fixed");
                    let pred_value = bench
                        .value_pool
                        .get(out.value.index)
                        .expect("value head width matches the pool")
                        .to_vec();
                    let breakdown: RewardBreakdown = score_rollout(
                        members,
                        mode,
                        single_index,
                        obs.screen,
                        &plan,
                        pred_type,
                        &pred_value,
                        step,
                    )?;
                    if breakdown.r_final == 1.0 {
                        let key = (state, plan.clone(), pred_type.index() as u8, pred_value.clone());
                        let record = DatasetRecord {
                            task_id: task.id,
                            step_index: si as u32,
                            state_feature: state,
                            screen_id: step.screen_id,
                            history_digest: bench.history_digest(task, si)?,
                            plan: plan.clone(),
                            action: pred_type,
                            value: pred_value.clone(),
                            gt_bbox: obs.screen.elements[step.target as usize].bbox,
                            provenance: Provenance::GrpoDistilled { iter: iteration },
                        };
                        found.push((key, record));
                    }
                    rollouts.push(Rollout {
                        planner_output: out,
                        breakdown,
                        state_feature: state,
                        candidate_count: n_cands,
                        value_count: n_values,
                    });
                }
                Ok((RolloutGroup::new(rollouts, cfg.eps_std)?, found))
            })
            .collect::<Result<_>>()?;

        let mut groups = Vec::with_capacity(results.len());
        for (group, found) in results {
            for (key, record) in found {
                distilled.entry(key).or_insert(record);
            }
            groups.push(group);
        }

        let diag = grpo_diagnostics(&policy, &reference, &groups, cfg)?;
        log.push(EpochLog {
            epoch,
            mean_reward: diag.mean_reward,
            mean_advantage_abs: diag.mean_advantage_abs,
            kl: diag.kl,
            clip_fraction: diag.clip_fraction,
        });
        if cfg.epochs > 0 {
            policy = grpo_step(&policy, &reference, &groups, cfg)?;
        }
    }

    Ok(GrpoOutcome {
        planner: policy,
        distilled: distilled.into_values().collect(),
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::HeadChoice;
    use crate::reward::RewardBreakdown;

    fn breakdown(r_final: f64) -> RewardBreakdown {
        RewardBreakdown {
            r_plan: r_final,
            r_type: 1.0,
            r_value: 1.0,
            r_final,
            member_acc: vec![r_final],
            member_conf: vec![-0.1],
            weights: vec![1.0],
        }
    }

    /// A rollout whose sampling log-probs are taken from `policy` itself.
    fn rollout_from(
        policy: &PlannerModel,
        state: u64,
        n_cands: usize,
        n_values: usize,
        idx: (usize, usize, usize),
        temp: f64,
        r_final: f64,
    ) -> Rollout {
        let lp = |head: Head, n: usize, i: usize| -> f64 {
            softmax(&policy.logits(head, state, n), temp)[i].ln()
        };
        Rollout {
            planner_output: PlannerOutput {
                state,
                plan: HeadChoice {
                    index: idx.0,
                    logprob: lp(Head::Plan, n_cands, idx.0),
                },
                action_type: HeadChoice {
                    index: idx.1,
                    logprob: lp(Head::Type, ActionType::COUNT, idx.1),
                },
                value: HeadChoice {
                    index: idx.2,
                    logprob: lp(Head::Value, n_values, idx.2),
                },
            },
            breakdown: breakdown(r_final),
            state_feature: state,
            candidate_count: n_cands,
            value_count: n_values,
        }
    }

    #[test]
    fn advantages_oracle_four() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 1.0], 1e-8).unwrap();
        assert_eq!(a, vec![1.0, -1.0, -1.0, 1.0]);
    }

    #[test]
    fn advantages_oracle_seven() {
        let a = group_advantages(&[1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0], 1e-8).unwrap();
        for (i, &r) in [1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0].iter().enumerate() {
            let expected = if r == 1.0 { 1.154701 } else { -0.866025 };
            assert!((a[i] - expected).abs() < 1e-6, "a[{i}] = {}", a[i]);
        }
    }

    #[test]
    fn advantages_normalize_mean_and_std() {
        let a = group_advantages(&[0.3, 0.9, 0.1, 0.5, 0.7], 1e-8).unwrap();
        let mean = a.iter().sum::<f64>() / a.len() as f64;
        let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / a.len() as f64;
        assert!(mean.abs() <= 1e-9);
        assert!((var.sqrt() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn degenerate_groups_yield_zero_advantages() {
        assert_eq!(group_advantages(&[0.4; 6], 1e-8).unwrap(), vec![0.0; 6]);
        assert_eq!(group_advantages(&[0.0, 0.0], 1e-8).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn advantages_are_shift_and_scale_invariant() {
        let base = [1.0, 0.0, 0.0, 1.0, 1.0];
        let a = group_advantages(&base, 1e-8).unwrap();
        let shifted: Vec<f64> = base.iter().map(|r| r + 3.7).collect();
        let scaled: Vec<f64> = base.iter().map(|r| r * 2.5).collect();
        let b = group_advantages(&shifted, 1e-8).unwrap();
        let c = group_advantages(&scaled, 1e-8).unwrap();
        for i in 0..base.len() {
            assert!((a[i] - b[i]).abs() < 1e-9);
            assert!((a[i] - c[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn groups_smaller_than_two_error() {
        assert!(group_advantages(&[1.0], 1e-8).is_err());
        assert!(group_advantages(&[], 1e-8).is_err());
    }

    #[test]
    fn objective_is_zero_at_the_sampling_policy() {
        let mut policy = PlannerModel::new(0.9);
        policy.set(Head::Plan, 5, 0, 0.8);
        policy.set(Head::Plan, 5, 2, -0.3);
        policy.set(Head::Value, 5, 1, 0.5);
        let cfg = GrpoConfig::default();
        let rollouts = vec![
            rollout_from(&policy, 5, 4, 3, (0, 1, 2), cfg.temperature, 1.0),
            rollout_from(&policy, 5, 4, 3, (2, 0, 1), cfg.temperature, 0.0),
            rollout_from(&policy, 5, 4, 3, (1, 2, 0), cfg.temperature, 0.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        // ρ = 1 everywhere, ref = policy ⇒ KL = 0 ⇒ J = mean(A) = 0
        let j = grpo_objective(&policy, &policy, &group, &cfg).unwrap();
        assert!(j.abs() < 1e-12, "J = {j}");
    }

    #[test]
    fn objective_zero_for_zero_advantages_without_kl() {
        let policy = PlannerModel::new(0.9);
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        let rollouts = vec![
            rollout_from(&policy, 3, 5, 4, (0, 0, 0), cfg.temperature, 0.5),
            rollout_from(&policy, 3, 5, 4, (1, 1, 1), cfg.temperature, 0.5),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        assert_eq!(grpo_objective(&policy, &policy, &group, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn clip_arithmetic_oracle() {
        // Two rollouts; the first has ρ = 2 on every head and A = +1, the
        // second has A = −1 with ρ = 1 (gradient-neutral for this check).
        // Per-head contribution of rollout 1: min(2·1, 1.2·1) = 1.2.
        let policy = PlannerModel::new(0.9);
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        let mut hot = rollout_from(&policy, 9, 4, 4, (0, 0, 0), cfg.temperature, 1.0);
        // shift stored sampling logprobs so ρ = exp(lp_now − lp_old) = 2
        hot.planner_output.plan.logprob -= 2f64.ln();
        hot.planner_output.action_type.logprob -= 2f64.ln();
        hot.planner_output.value.logprob -= 2f64.ln();
        let cold = rollout_from(&policy, 9, 4, 4, (1, 1, 1), cfg.temperature, 0.0);
        let group = RolloutGroup::from_parts(vec![hot, cold], vec![1.0, -1.0]).unwrap();
        // J = 1/(3·2) · [3 heads · 1.2 + 3 heads · min(1·(−1), 1·(−1))]
        let j = grpo_objective(&policy, &policy, &group, &cfg).unwrap();
        let expected = (3.0 * 1.2 + 3.0 * -1.0) / 6.0;
        assert!((j - expected).abs() < 1e-12, "J = {j}, expected {expected}");
    }

    #[test]
    fn mismatched_states_in_group_error() {
        let policy = PlannerModel::new(0.9);
        let a = rollout_from(&policy, 1, 3, 3, (0, 0, 0), 0.9, 1.0);
        let b = rollout_from(&policy, 2, 3, 3, (0, 0, 0), 0.9, 0.0);
        let err = RolloutGroup::new(vec![a, b], 1e-8).unwrap_err();
        assert!(err.to_string().contains("mismatched state features"), "{err}");
    }

    #[test]
    fn step_with_zero_advantages_and_no_kl_is_identity() {
        let mut policy = PlannerModel::new(0.9);
        policy.set(Head::Plan, 7, 1, 0.4);
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        let rollouts = vec![
            rollout_from(&policy, 7, 3, 2, (0, 0, 0), cfg.temperature, 1.0),
            rollout_from(&policy, 7, 3, 2, (1, 1, 1), cfg.temperature, 1.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let stepped = grpo_step(&policy, &policy, &[group], &cfg).unwrap();
        assert_eq!(stepped, policy);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let policy = PlannerModel::new(0.9);
        let cfg = GrpoConfig {
            learning_rate: 0.0,
            ..GrpoConfig::default()
        };
        let rollouts = vec![
            rollout_from(&policy, 7, 3, 2, (0, 0, 0), cfg.temperature, 1.0),
            rollout_from(&policy, 7, 3, 2, (1, 1, 1), cfg.temperature, 0.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let stepped = grpo_step(&policy, &policy, &[group], &cfg).unwrap();
        assert_eq!(stepped, policy);
    }

    #[test]
    fn rewarded_choice_gains_probability_after_one_step() {
        let policy = PlannerModel::new(0.9);
        let cfg = GrpoConfig::default();
        let state = 11u64;
        let n = 5;
        // slot 2 always wins; others lose
        let rollouts = vec![
            rollout_from(&policy, state, n, 3, (2, 0, 0), cfg.temperature, 1.0),
            rollout_from(&policy, state, n, 3, (0, 0, 0), cfg.temperature, 0.0),
            rollout_from(&policy, state, n, 3, (2, 0, 0), cfg.temperature, 1.0),
            rollout_from(&policy, state, n, 3, (4, 0, 0), cfg.temperature, 0.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let before = softmax(&policy.logits(Head::Plan, state, n), cfg.temperature)[2];
        let stepped = grpo_step(&policy, &policy, &[group], &cfg).unwrap();
        let after = softmax(&stepped.logits(Head::Plan, state, n), cfg.temperature)[2];
        assert!(after > before, "p(slot 2): {before} -> {after}");
    }

    #[test]
    fn step_is_deterministic() {
        let mut policy = PlannerModel::new(0.9);
        policy.set(Head::Plan, 4, 0, 0.3);
        let cfg = GrpoConfig::default();
        let rollouts = vec![
            rollout_from(&policy, 4, 4, 3, (0, 1, 2), cfg.temperature, 1.0),
            rollout_from(&policy, 4, 4, 3, (3, 0, 0), cfg.temperature, 0.0),
            rollout_from(&policy, 4, 4, 3, (1, 2, 1), cfg.temperature, 0.5),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let a = grpo_step(&policy, &policy, &[group.clone()], &cfg).unwrap();
        let b = grpo_step(&policy, &policy, &[group], &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn finite_diff_agrees_within_clip_region_without_kl() {
        let mut policy = PlannerModel::new(0.9);
        let state = 13u64;
        for (slot, l) in [0.4, -0.6, 0.1, 0.9].iter().enumerate() {
            policy.set(Head::Plan, state, slot as u32, *l);
        }
        policy.set(Head::Type, state, 1, 0.7);
        policy.set(Head::Value, state, 2, -0.5);
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        // sampling logprobs from the same policy ⇒ ρ = 1, inside the clip band
        let rollouts = vec![
            rollout_from(&policy, state, 4, 4, (0, 1, 2), cfg.temperature, 1.0),
            rollout_from(&policy, state, 4, 4, (3, 0, 1), cfg.temperature, 0.0),
            rollout_from(&policy, state, 4, 4, (1, 1, 3), cfg.temperature, 0.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let report = finite_diff_check(&policy, &policy, &group, &cfg, 1e-5, 1e-4).unwrap();
        assert!(report.pass, "max rel err {} at {:?}", report.max_rel_err, report.worst);
        assert_eq!(report.checked, 4 + 3 + 4);
    }

    #[test]
    fn finite_diff_zero_advantage_case_is_identically_zero() {
        let policy = PlannerModel::new(0.9);
        let cfg = GrpoConfig {
            kl_beta: 0.0,
            ..GrpoConfig::default()
        };
        let rollouts = vec![
            rollout_from(&policy, 2, 3, 3, (0, 0, 0), cfg.temperature, 1.0),
            rollout_from(&policy, 2, 3, 3, (1, 1, 1), cfg.temperature, 1.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let report = finite_diff_check(&policy, &policy, &group, &cfg, 1e-5, 1e-4).unwrap();
        assert!(report.pass);
        assert!(report.max_rel_err < 1e-6, "{}", report.max_rel_err);
    }

    #[test]
    fn finite_diff_with_kl_at_reference_passes() {
        let mut policy = PlannerModel::new(0.9);
        policy.set(Head::Plan, 6, 0, 0.3);
        policy.set(Head::Plan, 6, 1, -0.2);
        let cfg = GrpoConfig::default(); // β = 0.01
        let rollouts = vec![
            rollout_from(&policy, 6, 3, 2, (0, 1, 0), cfg.temperature, 1.0),
            rollout_from(&policy, 6, 3, 2, (2, 0, 1), cfg.temperature, 0.0),
        ];
        let group = RolloutGroup::new(rollouts, cfg.eps_std).unwrap();
        let report = finite_diff_check(&policy, &policy, &group, &cfg, 1e-5, 1e-4).unwrap();
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn config_validation_rejects_bad_values() {
        let ok = GrpoConfig::default();
        assert!(ok.validate().is_ok());
        assert!(GrpoConfig { group_size: 1, ..ok }.validate().is_err());
        assert!(GrpoConfig { clip_eps: 0.0, ..ok }.validate().is_err());
        assert!(GrpoConfig { clip_eps: 1.0, ..ok }.validate().is_err());
        assert!(GrpoConfig { kl_beta: -0.1, ..ok }.validate().is_err());
        assert!(GrpoConfig { temperature: 0.0, ..ok }.validate().is_err());
        assert!(GrpoConfig { eps_std: 0.0, ..ok }.validate().is_err());
    }
}
