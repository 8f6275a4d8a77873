//! Confidence-weighted reward ensemble for plan grounding, plus the gated
//! per-step reward used during policy optimization.
//!
//! A rollout's plan is grounded independently by every ensemble member; the
//! members' hit/miss outcomes are blended by weights that depend on the
//! weighting mode. The headline mode weights members by
//! `softmax(prior_j * confidence_j)` where confidence is the member's own
//! log-probability for its chosen element. Note the deliberate consequence
//! for log-probability confidences (always ≤ 0): at equal confidence a
//! *larger* prior produces a *smaller* weight. The formula is implemented
//! exactly as designed rather than silently corrected.
//!
//! The final step reward gates the (dense) grounding reward by the two exact
//! checks: wrong action type or wrong value zeroes the step.

use serde::{Deserialize, Serialize};

pub use crate::env::token_f1;

use crate::env::{value_matches, ActionType, BBox, Screen, TaskStep};
use crate::error::{Error, Result};
use crate::policy::{softmax, GrounderModel};

/// How member opinions are blended into the grounding reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMode {
    /// Confidence-weighted: `softmax(prior_j * confidence_j)`.
    Cdrem,
    /// Prior-weighted only: `softmax(prior_j)`, confidences ignored.
    PriorOnly,
    /// Uniform `1/N`.
    Average,
    /// One designated member gets weight 1.
    Single,
}

impl EnsembleMode {
    pub const ALL: [EnsembleMode; 4] = [
        EnsembleMode::Cdrem,
        EnsembleMode::PriorOnly,
        EnsembleMode::Average,
        EnsembleMode::Single,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EnsembleMode::Cdrem => "cdrem",
            EnsembleMode::PriorOnly => "prior_only",
            EnsembleMode::Average => "average",
            EnsembleMode::Single => "single",
        }
    }

    pub fn from_str(s: &str) -> Option<EnsembleMode> {
        Self::ALL.iter().copied().find(|m| m.as_str() == s)
    }
}

impl std::fmt::Display for EnsembleMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One grounding model plus its prior scale.
#[derive(Debug, Clone)]
pub struct EnsembleMember {
    pub grounder: GrounderModel,
    pub prior: f64,
}

impl EnsembleMember {
    pub fn new(grounder: GrounderModel, prior: f64) -> Self {
        EnsembleMember { grounder, prior }
    }
}

/// Full reward decomposition for one rollout. Member diagnostics are
/// populated even when the gate zeroes the final reward.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardBreakdown {
    pub r_plan: f64,
    pub r_type: f64,
    pub r_value: f64,
    pub r_final: f64,
    pub member_acc: Vec<f64>,
    pub member_conf: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Confidence-weighted member weights: `w_j = softmax_j(prior_j * conf_j)`,
/// computed max-subtracted.
pub fn ensemble_weights(priors: &[f64], confidences: &[f64]) -> Result<Vec<f64>> {
    if priors.len() != confidences.len() {
        return Err(Error::Invalid(format!(
            "ensemble_weights: {} priors vs {} confidences",
            priors.len(),
            confidences.len()
        )));
    }
    if priors.is_empty() {
        return Err(Error::EmptyPool("ensemble_weights needs at least one member".into()));
    }
    let products: Vec<f64> = priors
        .iter()
        .zip(confidences.iter())
        .map(|(p, c)| p * c)
        .collect();
    Ok(softmax(&products, 1.0))
}

/// Member weights for a given mode.
pub fn mode_weights(
    mode: EnsembleMode,
    priors: &[f64],
    confidences: &[f64],
    single_index: usize,
) -> Result<Vec<f64>> {
    if priors.is_empty() {
        return Err(Error::EmptyPool("reward ensemble has no members".into()));
    }
    match mode {
        EnsembleMode::Cdrem => ensemble_weights(priors, confidences),
        EnsembleMode::PriorOnly => Ok(softmax(priors, 1.0)),
        EnsembleMode::Average => Ok(vec![1.0 / priors.len() as f64; priors.len()]),
        EnsembleMode::Single => {
            if single_index >= priors.len() {
                return Err(Error::Invalid(format!(
                    "single-member index {single_index} out of range for {} members",
                    priors.len()
                )));
            }
            let mut w = vec![0.0; priors.len()];
            w[single_index] = 1.0;
            Ok(w)
        }
    }
}

/// Edge-inclusive hit indicator for a grounded point.
pub fn acc_plan(gt_bbox: &BBox, coor: (f64, f64)) -> f64 {
    if gt_bbox.contains(coor.0, coor.1) {
        1.0
    } else {
        0.0
    }
}

/// Binary value reward: bag F1 strictly above one half.
pub fn value_reward(pred: &[String], gt: &[String]) -> f64 {
    if value_matches(pred, gt) {
        1.0
    } else {
        0.0
    }
}

/// Gate the grounding reward by the exact type/value checks.
pub fn final_reward(r_plan: f64, r_type: f64, r_value: f64) -> f64 {
    if r_type == 0.0 || r_value == 0.0 {
        0.0
    } else {
        r_plan
    }
}

/// Per-member grounding outcome plus blended reward.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanReward {
    pub r_plan: f64,
    pub member_acc: Vec<f64>,
    pub member_conf: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Ground a plan with every member (greedily, independently) and blend the
/// hit indicators with mode weights.
pub fn plan_reward(
    members: &[EnsembleMember],
    mode: EnsembleMode,
    single_index: usize,
    screen: &Screen,
    plan: &[String],
    gt_bbox: &BBox,
) -> Result<PlanReward> {
    if members.is_empty() {
        return Err(Error::EmptyPool("reward ensemble has no members".into()));
    }
    // Member groundings are independent; gather first, then weigh, so the
    // result cannot depend on evaluation order.
    let groundings: Vec<crate::policy::Grounding> = members
        .iter()
        .map(|m| m.grounder.ground_step(screen, plan))
        .collect::<Result<_>>()?;
    let member_acc: Vec<f64> = groundings.iter().map(|g| acc_plan(gt_bbox, g.coor)).collect();
    let member_conf: Vec<f64> = groundings.iter().map(|g| g.confidence).collect();
    let priors: Vec<f64> = members.iter().map(|m| m.prior).collect();
    let weights = mode_weights(mode, &priors, &member_conf, single_index)?;
    let r_plan = weights
        .iter()
        .zip(member_acc.iter())
        .map(|(w, a)| w * a)
        .sum();
    Ok(PlanReward {
        r_plan,
        member_acc,
        member_conf,
        weights,
    })
}

/// Score one full rollout (plan tokens + predicted type + predicted value)
/// against a step's ground truth.
pub fn score_rollout(
    members: &[EnsembleMember],
    mode: EnsembleMode,
    single_index: usize,
    screen: &Screen,
    plan: &[String],
    pred_type: ActionType,
    pred_value: &[String],
    gt: &TaskStep,
) -> Result<RewardBreakdown> {
    let target = screen.elements.get(gt.target as usize).ok_or_else(|| {
        Error::Invalid(format!(
            "ground-truth target {} missing on screen {}",
            gt.target, screen.id
        ))
    })?;
    let pr = plan_reward(members, mode, single_index, screen, plan, &target.bbox)?;
    let r_type = if pred_type == gt.action { 1.0 } else { 0.0 };
    let r_value = value_reward(pred_value, &gt.value);
    let r_final = final_reward(pr.r_plan, r_type, r_value);
    Ok(RewardBreakdown {
        r_plan: pr.r_plan,
        r_type,
        r_value,
        r_final,
        member_acc: pr.member_acc,
        member_conf: pr.member_conf,
        weights: pr.weights,
    })
}
