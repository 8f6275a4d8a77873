//! The data-enhancement half of the loop: proposer and verifier pools,
//! plan proposal and verification, dataset construction, and the
//! purity/diversity bookkeeping that tracks dataset quality over iterations.
//!
//! Proposers sample plan candidates per train step; each proposal is paired
//! with the step's ground-truth type and value (those labels exist in the
//! benchmark — the open question is *which element*, which is what
//! verification settles). Verifiers ground each proposed plan greedily and a
//! quorum rule decides acceptance. Retained records are merged with the
//! previous dataset under a canonical ordering, deduplicated per
//! `(task, step, plan, type, value)`.

mod io;

pub use io::{dataset_to_jsonl, load_dataset, parse_dataset_records, save_dataset, RawDatasetRecord};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{enumerate_plan_candidates, ActionType, BBox, Benchmark, Screen, Split, Task};
use crate::error::{Error, Result};
use crate::policy::{observation_feature, DecodeMode, GrounderModel, PlannerModel};
use crate::reward::acc_plan;
use crate::rng::stream;

/// Where a dataset record came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Provenance {
    /// Seed generator proposals that built the initial dataset.
    SeedPool,
    /// Proposed by the trained planner tagged with this iteration.
    PlannerIter { iter: u32 },
    /// Distilled from a perfect-reward rollout during optimization.
    GrpoDistilled { iter: u32 },
}

impl Provenance {
    pub fn label(self) -> &'static str {
        match self {
            Provenance::SeedPool => "seed_pool",
            Provenance::PlannerIter { .. } => "planner_iter",
            Provenance::GrpoDistilled { .. } => "grpo_distilled",
        }
    }

    pub fn iter(self) -> u32 {
        match self {
            Provenance::SeedPool => 0,
            Provenance::PlannerIter { iter } | Provenance::GrpoDistilled { iter } => iter,
        }
    }

    pub fn from_parts(label: &str, iter: u32) -> Option<Provenance> {
        match label {
            "seed_pool" if iter == 0 => Some(Provenance::SeedPool),
            "planner_iter" => Some(Provenance::PlannerIter { iter }),
            "grpo_distilled" => Some(Provenance::GrpoDistilled { iter }),
            _ => None,
        }
    }
}

/// One verified training example: a plan for a step, paired with the step's
/// action type and value, plus enough context to train both policies.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRecord {
    pub task_id: u32,
    pub step_index: u32,
    pub state_feature: u64,
    pub screen_id: u32,
    pub history_digest: String,
    pub plan: Vec<String>,
    pub action: ActionType,
    pub value: Vec<String>,
    pub gt_bbox: BBox,
    pub provenance: Provenance,
}

impl DatasetRecord {
    /// Dedup and canonical-ordering key.
    pub fn key(&self) -> (u32, u32, Vec<String>, usize, Vec<String>) {
        (
            self.task_id,
            self.step_index,
            self.plan.clone(),
            self.action.index(),
            self.value.clone(),
        )
    }
}

/// How many verifier hits a plan needs to be retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyRule {
    All,
    Majority,
    Any,
}

impl VerifyRule {
    pub fn as_str(self) -> &'static str {
        match self {
            VerifyRule::All => "all",
            VerifyRule::Majority => "majority",
            VerifyRule::Any => "any",
        }
    }
}

impl std::str::FromStr for VerifyRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<VerifyRule> {
        match s {
            "all" => Ok(VerifyRule::All),
            "majority" => Ok(VerifyRule::Majority),
            "any" => Ok(VerifyRule::Any),
            other => Err(Error::Config(format!(
                "unknown verification rule `{other}` (expected all, majority, or any)"
            ))),
        }
    }
}

/// A model pool with fixed (never-evicted) members plus up to two trained
/// members whose tags are consecutive iteration indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Pool<M> {
    refs: Vec<M>,
    trained: Vec<(u32, M)>,
}

pub type PlannerPool = Pool<PlannerModel>;
pub type VerifierPool = Pool<GrounderModel>;

impl<M> Pool<M> {
    pub fn new(refs: Vec<M>) -> Pool<M> {
        Pool {
            refs,
            trained: Vec::new(),
        }
    }

    /// Rebuild a pool from persisted parts, re-checking the invariants.
    pub fn from_parts(refs: Vec<M>, trained: Vec<(u32, M)>) -> Result<Pool<M>> {
        if trained.len() > 2 {
            return Err(Error::Invalid(format!(
                "pool holds {} trained members (capacity 2)",
                trained.len()
            )));
        }
        for pair in trained.windows(2) {
            if pair[1].0 != pair[0].0 + 1 {
                return Err(Error::Invalid(format!(
                    "trained member tags must be consecutive and ascending (found {} then {})",
                    pair[0].0, pair[1].0
                )));
            }
        }
        Ok(Pool { refs, trained })
    }

    /// Add a trained member tagged with iteration `tag`. A member with the
    /// same tag is replaced; members older than `tag − 1` are evicted. The
    /// fixed members are untouched.
    pub fn rotate(&mut self, tag: u32, model: M) {
        self.trained.retain(|(t, _)| *t != tag);
        self.trained.push((tag, model));
        self.trained.sort_by_key(|(t, _)| *t);
        let newest = self.trained.last().map(|(t, _)| *t).unwrap_or(0);
        self.trained.retain(|(t, _)| *t + 1 >= newest);
    }

    pub fn refs(&self) -> &[M] {
        &self.refs
    }

    pub fn trained(&self) -> &[(u32, M)] {
        &self.trained
    }

    /// All members, fixed first, then trained in ascending tag order.
    pub fn members(&self) -> impl Iterator<Item = &M> {
        self.refs.iter().chain(self.trained.iter().map(|(_, m)| m))
    }

    pub fn len(&self) -> usize {
        self.refs.len() + self.trained.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Quality metrics for one data-construction round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataStats {
    pub iter: u32,
    /// Proposals generated this round (pre-dedup, new only).
    pub generated: u64,
    /// Proposals that passed verification this round (pre-dedup).
    pub retained: u64,
    pub purity: f64,
    pub diversity: f64,
}

/// Knobs for proposal and verification rounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnhanceConfig {
    /// Plans proposed per member per train step (m).
    pub plans_per_step: u32,
    pub rule: VerifyRule,
    pub propose_temperature: f64,
    /// Re-verify the previous dataset under the current verifier pool.
    pub recheck_previous: bool,
    /// Diversity denominator: all train steps instead of only steps that
    /// retained at least one plan.
    pub diversity_over_all_steps: bool,
    pub state_buckets: u32,
}

impl Default for EnhanceConfig {
    fn default() -> Self {
        EnhanceConfig {
            plans_per_step: 1,
            rule: VerifyRule::Majority,
            propose_temperature: 0.5,
            recheck_previous: true,
            diversity_over_all_steps: false,
            state_buckets: 1024,
        }
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.plans_per_step < 1 {
            return Err(Error::Config("plans_per_step must be ≥ 1".into()));
        }
        if !(self.propose_temperature > 0.0) {
            return Err(Error::Config(format!(
                "propose_temperature must be > 0 (got {})",
                self.propose_temperature
            )));
        }
        if self.state_buckets < 1 {
            return Err(Error::Config("state_buckets must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Ground a plan with every verifier and aggregate hits under `rule`.
/// A verifier hits iff its greedily chosen element's center lies in the
/// ground-truth box. Majority accepts iff hits ≥ ⌈|Φ|/2⌉.
pub fn verify_plan(
    verifiers: &VerifierPool,
    screen: &Screen,
    plan: &[String],
    gt_bbox: &BBox,
    rule: VerifyRule,
) -> Result<bool> {
    if verifiers.is_empty() {
        return Err(Error::EmptyPool("verifier pool has no members".into()));
    }
    let mut hits = 0usize;
    let mut total = 0usize;
    for v in verifiers.members() {
        let g = v.ground_step(screen, plan)?;
        if acc_plan(gt_bbox, g.coor) == 1.0 {
            hits += 1;
        }
        total += 1;
    }
    Ok(match rule {
        VerifyRule::All => hits == total,
        VerifyRule::Majority => 2 * hits >= total, // hits ≥ ⌈total/2⌉
        VerifyRule::Any => hits > 0,
    })
}

struct Proposal {
    record: DatasetRecord,
    accepted: bool,
}

/// Propose `m` plans for one step from one proposer and verify each.
fn propose_step(
    proposer: &PlannerModel,
    provenance: Provenance,
    verifiers: &VerifierPool,
    bench: &Benchmark,
    task: &Task,
    step_index: usize,
    cfg: &EnhanceConfig,
    seed: u64,
    iteration: u32,
    proposer_index: usize,
) -> Result<Vec<Proposal>> {
    let step = &task.steps[step_index];
    let obs = bench.observe(task, step_index)?;
    let cands = enumerate_plan_candidates(obs.screen, None);
    let state = observation_feature(&obs, cfg.state_buckets);
    let gt_bbox = obs.screen.elements[step.target as usize].bbox;
    let digest = bench.history_digest(task, step_index)?;
    let mut rng = stream(
        seed,
        "prop",
        &[
            u64::from(iteration),
            proposer_index as u64,
            u64::from(task.id),
            step_index as u64,
        ],
    );
    let mut out = Vec::with_capacity(cfg.plans_per_step as usize);
    for _ in 0..cfg.plans_per_step {
        let decoded = proposer.plan_step(
            state,
            cands.len(),
            bench.value_pool.len(),
            DecodeMode::Sample(cfg.propose_temperature),
            &mut rng,
        );
        let plan = cands[decoded.plan.index].tokens.clone();
        let accepted = verify_plan(verifiers, obs.screen, &plan, &gt_bbox, cfg.rule)?;
        out.push(Proposal {
            record: DatasetRecord {
                task_id: task.id,
                step_index: step_index as u32,
                state_feature: state,
                screen_id: step.screen_id,
                history_digest: digest.clone(),
                plan,
                action: step.action,
                value: step.value.clone(),
                gt_bbox,
                provenance,
            },
            accepted,
        });
    }
    Ok(out)
}

type Merged = BTreeMap<(u32, u32, Vec<String>, usize, Vec<String>), DatasetRecord>;

fn train_steps(bench: &Benchmark) -> Vec<(&Task, usize)> {
    bench
        .tasks_in(Split::Train)
        .flat_map(|t| (0..t.steps.len()).map(move |si| (t, si)))
        .collect()
}

fn compute_stats(
    records: &Merged,
    bench: &Benchmark,
    iter: u32,
    generated: u64,
    retained: u64,
    over_all_steps: bool,
) -> DataStats {
    let purity = if generated > 0 {
        retained as f64 / generated as f64
    } else {
        0.0
    };
    let denom = if over_all_steps {
        train_steps(bench).len()
    } else {
        let covered: std::collections::BTreeSet<(u32, u32)> = records
            .values()
            .map(|r| (r.task_id, r.step_index))
            .collect();
        covered.len()
    };
    let diversity = if denom > 0 {
        records.len() as f64 / denom as f64
    } else {
        0.0
    };
    DataStats {
        iter,
        generated,
        retained,
        purity,
        diversity,
    }
}

/// Run one proposal round over the train split: each listed proposer offers
/// `m` plans per step, each is verified, survivors are merged (first writer
/// wins per dedup key).
fn proposal_round(
    proposers: &[(&PlannerModel, Provenance)],
    verifiers: &VerifierPool,
    bench: &Benchmark,
    cfg: &EnhanceConfig,
    seed: u64,
    iteration: u32,
    merged: &mut Merged,
) -> Result<(u64, u64)> {
    let steps = train_steps(bench);
    let mut generated = 0u64;
    let mut retained = 0u64;
    for (pi, (proposer, provenance)) in proposers.iter().enumerate() {
        let batches: Vec<Vec<Proposal>> = steps
            .par_iter()
            .map(|&(task, si)| {
                propose_step(
                    proposer, *provenance, verifiers, bench, task, si, cfg, seed, iteration, pi,
                )
            })
            .collect::<Result<_>>()?;
        for batch in batches {
            for p in batch {
                generated += 1;
                if p.accepted {
                    retained += 1;
                    merged.entry(p.record.key()).or_insert(p.record);
                }
            }
        }
    }
    Ok((generated, retained))
}

/// Build the initial dataset: the seed generator proposes `m` plans per
/// train step, verification filters them. An empty result is reported via
/// the stats, not an error.
pub fn seed_dataset(
    bench: &Benchmark,
    seed_planner: &PlannerModel,
    verifiers: &VerifierPool,
    cfg: &EnhanceConfig,
    seed: u64,
) -> Result<(Vec<DatasetRecord>, DataStats)> {
    cfg.validate()?;
    let mut merged = Merged::new();
    let (generated, retained) = proposal_round(
        &[(seed_planner, Provenance::SeedPool)],
        verifiers,
        bench,
        cfg,
        seed,
        0,
        &mut merged,
    )?;
    let stats = compute_stats(&merged, bench, 0, generated, retained, cfg.diversity_over_all_steps);
    Ok((merged.into_values().collect(), stats))
}

/// Build the iteration-`k` dataset: every pool member (fixed seed generator
/// plus trained planners) proposes, proposals are verified under the current
/// verifier pool, and survivors are merged with the previous dataset.
/// Previous records are re-verified first when `cfg.recheck_previous` holds.
pub fn enhance_dataset(
    d_prev: &[DatasetRecord],
    planners: &PlannerPool,
    verifiers: &VerifierPool,
    bench: &Benchmark,
    cfg: &EnhanceConfig,
    seed: u64,
    iteration: u32,
) -> Result<(Vec<DatasetRecord>, DataStats)> {
    cfg.validate()?;
    if planners.is_empty() {
        return Err(Error::EmptyPool("planner pool has no members".into()));
    }
    let mut merged = Merged::new();
    if cfg.recheck_previous {
        let keep: Vec<bool> = d_prev
            .par_iter()
            .map(|r| {
                let screen = bench.screen(r.screen_id)?;
                verify_plan(verifiers, screen, &r.plan, &r.gt_bbox, cfg.rule)
            })
            .collect::<Result<_>>()?;
        for (r, keep) in d_prev.iter().zip(keep) {
            if keep {
                merged.entry(r.key()).or_insert_with(|| r.clone());
            }
        }
    } else {
        for r in d_prev {
            merged.entry(r.key()).or_insert_with(|| r.clone());
        }
    }

    let mut proposers: Vec<(&PlannerModel, Provenance)> = Vec::new();
    for m in planners.refs() {
        proposers.push((m, Provenance::SeedPool));
    }
    for (tag, m) in planners.trained() {
        proposers.push((m, Provenance::PlannerIter { iter: *tag }));
    }
    let (generated, retained) =
        proposal_round(&proposers, verifiers, bench, cfg, seed, iteration, &mut merged)?;
    let stats = compute_stats(
        &merged,
        bench,
        iteration,
        generated,
        retained,
        cfg.diversity_over_all_steps,
    );
    Ok((merged.into_values().collect(), stats))
}


#[cfg(test)]
mod tests {
    use super::tests_support::{hitter, misser, strs, tiny_benchmark};
    use super::*;

    #[test]
    fn rotation_follows_the_keep_last_two_rule() {
        let mut pool: Pool<&'static str> = Pool::new(vec!["ref"]);
        pool.rotate(1, "m1");
        assert_eq!(pool.trained(), &[(1, "m1")]);
        pool.rotate(2, "m2");
        assert_eq!(pool.trained(), &[(1, "m1"), (2, "m2")]);
        pool.rotate(3, "m3");
        assert_eq!(pool.trained(), &[(2, "m2"), (3, "m3")]);
        // same tag replaces rather than duplicating
        pool.rotate(3, "m3b");
        assert_eq!(pool.trained(), &[(2, "m2"), (3, "m3b")]);
        assert_eq!(pool.refs(), &["ref"]);
        assert_eq!(pool.len(), 3);
    }

    #[test]
    fn pool_from_parts_rejects_broken_invariants() {
        assert!(Pool::from_parts(vec!["r"], vec![(1, "a"), (2, "b")]).is_ok());
        assert!(Pool::from_parts(vec!["r"], vec![(1, "a"), (3, "b")]).is_err());
        assert!(Pool::from_parts(vec!["r"], vec![(1, "a"), (2, "b"), (3, "c")]).is_err());
        assert!(Pool::from_parts(vec!["r"], vec![(2, "b"), (1, "a")]).is_err());
    }

    #[test]
    fn verification_quorum_rules() {
        let bench = tiny_benchmark();
        let screen = bench.screen(0).unwrap();
        let gt = screen.elements[1].bbox;
        let plan = strs(&["button"]);
        let mk = |models: Vec<GrounderModel>| {
            let mut p = VerifierPool::new(models);
            p.rotate(0, hitter()); // ensure ≥1 member regardless
            p
        };
        // 3 verifiers, hits (1,1,0): majority accepts
        let pool = mk(vec![hitter(), misser()]);
        assert!(verify_plan(&pool, screen, &plan, &gt, VerifyRule::Majority).unwrap());
        // 3 verifiers, hits (0,0,1): majority rejects
        let pool = mk(vec![misser(), misser()]);
        assert!(!verify_plan(&pool, screen, &plan, &gt, VerifyRule::Majority).unwrap());
        // all-rule rejects on any miss; any-rule accepts on one hit
        let pool = mk(vec![hitter(), misser()]);
        assert!(!verify_plan(&pool, screen, &plan, &gt, VerifyRule::All).unwrap());
        assert!(verify_plan(&pool, screen, &plan, &gt, VerifyRule::Any).unwrap());
        // two members, one hit: 2·1 ≥ 2 so majority (round-up) accepts
        let pool = VerifierPool::new(vec![hitter(), misser()]);
        assert!(verify_plan(&pool, screen, &plan, &gt, VerifyRule::Majority).unwrap());
    }

    #[test]
    fn empty_verifier_pool_is_an_error() {
        let bench = tiny_benchmark();
        let screen = bench.screen(0).unwrap();
        let pool: VerifierPool = Pool::new(vec![]);
        let err =
            verify_plan(&pool, screen, &strs(&["button"]), &screen.elements[1].bbox, VerifyRule::Any)
                .unwrap_err();
        assert!(matches!(err, Error::EmptyPool(_)));
    }

    #[test]
    fn perfect_verifiers_yield_full_purity() {
        let bench = tiny_benchmark();
        let seed_planner = PlannerModel::new(1.0);
        let verifiers = VerifierPool::new(vec![hitter()]);
        let cfg = EnhanceConfig::default();
        // the uniform seed planner proposes one plan per step; the hitter
        // grounds everything to the target, so all proposals are retained
        let (records, stats) = seed_dataset(&bench, &seed_planner, &verifiers, &cfg, 7).unwrap();
        assert!(!records.is_empty());
        assert_eq!(stats.generated, 2);
        assert_eq!(stats.retained, 2);
        assert_eq!(stats.purity, 1.0);
        assert!(records.iter().all(|r| r.provenance == Provenance::SeedPool));
        assert!(records.iter().all(|r| r.action == ActionType::Click && r.value.is_empty()));
    }

    #[test]
    fn hopeless_verifiers_yield_an_empty_dataset() {
        let bench = tiny_benchmark();
        let seed_planner = PlannerModel::new(1.0);
        let verifiers = VerifierPool::new(vec![misser()]);
        let cfg = EnhanceConfig::default();
        let (records, stats) = seed_dataset(&bench, &seed_planner, &verifiers, &cfg, 7).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats.purity, 0.0);
        assert_eq!(stats.retained, 0);
        assert_eq!(stats.diversity, 0.0);
    }

    #[test]
    fn diversity_is_records_per_covered_step() {
        let bench = tiny_benchmark();
        let mut merged = Merged::new();
        // 3 distinct records on step 0, 1 on step 1 → 4 records / 2 steps
        for (si, plan) in [(0u32, vec!["button"]), (0, vec!["menu"]), (0, vec!["beta"]), (1, vec!["button"])] {
            let r = DatasetRecord {
                task_id: 0,
                step_index: si,
                state_feature: 0,
                screen_id: si,
                history_digest: String::new(),
                plan: strs(&plan),
                action: ActionType::Click,
                value: vec![],
                gt_bbox: BBox::new(0.6, 0.6, 1.0, 1.0),
                provenance: Provenance::SeedPool,
            };
            merged.insert(r.key(), r);
        }
        let stats = compute_stats(&merged, &bench, 1, 10, 4, false);
        assert_eq!(stats.diversity, 2.0);
        assert_eq!(stats.purity, 0.4);
        // all-steps denominator: tiny bench has 2 train steps
        let stats = compute_stats(&merged, &bench, 1, 10, 4, true);
        assert_eq!(stats.diversity, 2.0);
    }

    #[test]
    fn enhancement_with_identical_inputs_reproduces_the_seed_dataset() {
        let bench = tiny_benchmark();
        let seed_planner = PlannerModel::new(1.0);
        let verifiers = VerifierPool::new(vec![hitter()]);
        let cfg = EnhanceConfig::default();
        let (d0, _) = seed_dataset(&bench, &seed_planner, &verifiers, &cfg, 7).unwrap();
        let planners = PlannerPool::new(vec![seed_planner]);
        // same seed and iteration 0 → identical proposal streams → dedup
        // collapses everything back onto d0
        let (d1, _) = enhance_dataset(&d0, &planners, &verifiers, &bench, &cfg, 7, 0).unwrap();
        assert_eq!(d1, d0);
        let (d2, stats2) = enhance_dataset(&d0, &planners, &verifiers, &bench, &cfg, 7, 0).unwrap();
        assert_eq!(d2, d1);
        assert_eq!(stats2.generated, 2);
    }

    #[test]
    fn rechecking_drops_records_the_new_verifiers_reject() {
        let bench = tiny_benchmark();
        let seed_planner = PlannerModel::new(1.0);
        let good = VerifierPool::new(vec![hitter()]);
        let cfg = EnhanceConfig::default();
        let (d0, _) = seed_dataset(&bench, &seed_planner, &good, &cfg, 7).unwrap();
        assert!(!d0.is_empty());
        let planners = PlannerPool::new(vec![seed_planner]);
        let bad = VerifierPool::new(vec![misser()]);
        let (dk, _) = enhance_dataset(&d0, &planners, &bad, &bench, &cfg, 7, 1).unwrap();
        assert!(dk.is_empty(), "rechecked records should all be dropped");
        let keep_cfg = EnhanceConfig {
            recheck_previous: false,
            ..cfg
        };
        let (dk, _) = enhance_dataset(&d0, &planners, &bad, &bench, &keep_cfg, 7, 1).unwrap();
        assert_eq!(dk, d0, "previous records survive when rechecking is off");
    }

    #[test]
    fn empty_planner_pool_is_an_error() {
        let bench = tiny_benchmark();
        let verifiers = VerifierPool::new(vec![hitter()]);
        let planners: PlannerPool = Pool::new(vec![]);
        let err = enhance_dataset(&[], &planners, &verifiers, &bench, &EnhanceConfig::default(), 7, 1)
            .unwrap_err();
        assert!(matches!(err, Error::EmptyPool(_)));
    }

    #[test]
    fn trained_proposers_are_tagged_in_provenance() {
        let bench = tiny_benchmark();
        let verifiers = VerifierPool::new(vec![hitter()]);
        let mut planners = PlannerPool::new(vec![]);
        planners.rotate(2, PlannerModel::new(1.0));
        let (dk, stats) =
            enhance_dataset(&[], &planners, &verifiers, &bench, &EnhanceConfig::default(), 7, 2)
                .unwrap();
        assert!(!dk.is_empty());
        assert!(dk
            .iter()
            .all(|r| r.provenance == Provenance::PlannerIter { iter: 2 }));
        assert_eq!(stats.iter, 2);
    }

    #[test]
    fn provenance_labels_round_trip() {
        for p in [
            Provenance::SeedPool,
            Provenance::PlannerIter { iter: 3 },
            Provenance::GrpoDistilled { iter: 1 },
        ] {
            assert_eq!(Provenance::from_parts(p.label(), p.iter()), Some(p));
        }
        assert_eq!(Provenance::from_parts("seed_pool", 2), None);
        assert_eq!(Provenance::from_parts("mystery", 0), None);
    }
}
