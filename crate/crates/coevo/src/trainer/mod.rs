//! The co-training loop: alternate supervised fine-tuning of both policies,
//! collaborative policy optimization of the planner against the grounding
//! ensemble, pool rotation, and dataset enhancement — checkpointed per
//! iteration so interrupted runs resume exactly where they stopped.

mod checkpoint;
pub mod eval;

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use checkpoint::{
    checkpoint_dir, latest_checkpoint, load_checkpoint, parse_pools, pools_to_jsonl,
    save_checkpoint, RunMarker,
};
pub use eval::{aggregate, evaluate, evaluate_detailed, Metrics, StepEval};

use crate::datapool::{
    enhance_dataset, seed_dataset, DataStats, DatasetRecord, EnhanceConfig, PlannerPool,
    VerifierPool,
};
use crate::env::{Benchmark, Split};
use crate::error::{Error, Result};
use crate::fsutil;
use crate::grpo::{collaborative_grpo, EpochLog, GrpoConfig};
use crate::policy::{
    reference_grounder, sft_grounder, sft_planner, GrounderModel, PlannerModel, ReferenceKind,
    ReferenceSpec, SftConfig,
};
use crate::reward::{EnsembleMember, EnsembleMode};

/// Which experimental arm a run belongs to. The first four select a reward
/// ensemble mode; `NoGrpo` keeps the ensemble (rewards are still scored for
/// distillation) but applies zero policy-optimization epochs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmMode {
    Cdrem,
    PriorOnly,
    Average,
    Single,
    NoGrpo,
}

impl ArmMode {
    pub const ALL: [ArmMode; 5] = [
        ArmMode::Cdrem,
        ArmMode::PriorOnly,
        ArmMode::Average,
        ArmMode::Single,
        ArmMode::NoGrpo,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ArmMode::Cdrem => "cdrem",
            ArmMode::PriorOnly => "prior_only",
            ArmMode::Average => "average",
            ArmMode::Single => "single",
            ArmMode::NoGrpo => "no_grpo",
        }
    }

    pub fn from_str(s: &str) -> Option<ArmMode> {
        Self::ALL.iter().copied().find(|m| m.as_str() == s)
    }

    /// Reward-weighting mode used when scoring rollouts under this arm.
    pub fn ensemble_mode(self) -> EnsembleMode {
        match self {
            ArmMode::Cdrem | ArmMode::NoGrpo => EnsembleMode::Cdrem,
            ArmMode::PriorOnly => EnsembleMode::PriorOnly,
            ArmMode::Average => EnsembleMode::Average,
            ArmMode::Single => EnsembleMode::Single,
        }
    }
}

impl std::fmt::Display for ArmMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything one training run needs besides the benchmark and seed.
#[derive(Debug, Clone)]
pub struct LoopConfig {
    /// Number of co-training iterations, `K`.
    pub iterations: u32,
    pub mode: ArmMode,
    /// Ensemble member picked under [`ArmMode::Single`]. Members are ordered
    /// strong reference, noisy reference, current trained grounder.
    pub single_index: usize,
    /// Prior scales in the same member order.
    pub priors: [f64; 3],
    pub enhance: EnhanceConfig,
    pub sft_planner: SftConfig,
    pub sft_grounder: SftConfig,
    pub grpo: GrpoConfig,
    pub reference: ReferenceSpec,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            iterations: 3,
            mode: ArmMode::Cdrem,
            single_index: 2,
            priors: [1.0, 1.0, 2.0],
            enhance: EnhanceConfig::default(),
            sft_planner: SftConfig::default(),
            sft_grounder: SftConfig::grounder_default(),
            grpo: GrpoConfig::default(),
            reference: ReferenceSpec::default(),
        }
    }
}

impl LoopConfig {
    pub fn validate(&self) -> Result<()> {
        if self.priors.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::Invalid(format!(
                "ensemble priors must be positive and finite, got {:?}",
                self.priors
            )));
        }
        if self.single_index >= 3 {
            return Err(Error::Invalid(format!(
                "single_index {} out of range for a 3-member ensemble",
                self.single_index
            )));
        }
        self.enhance.validate()?;
        self.sft_planner.validate()?;
        self.sft_grounder.validate()?;
        self.grpo.validate()?;
        self.reference.validate()?;
        Ok(())
    }

    fn priors_label(&self) -> String {
        format!("{}:{}:{}", self.priors[0], self.priors[1], self.priors[2])
    }
}

/// Mutable state carried between iterations (and through checkpoints).
#[derive(Debug, Clone)]
pub struct LoopState {
    /// Last completed iteration (0 right after bootstrap).
    pub iteration: u32,
    pub planner: PlannerModel,
    pub grounder: GrounderModel,
    pub planner_pool: PlannerPool,
    pub verifier_pool: VerifierPool,
    pub dataset: Vec<DatasetRecord>,
}

/// Everything measured during one iteration. Serialized as `report.json`
/// inside the iteration's checkpoint; CSV summaries are rebuilt from these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationReport {
    pub k: u32,
    pub seed: u64,
    pub mode: String,
    /// Split name → metrics; splits with no tasks are omitted.
    pub metrics: BTreeMap<String, Metrics>,
    pub stats: DataStats,
    pub grpo_log: Vec<EpochLog>,
    pub wall_clock_s: f64,
}

fn ensemble_members(
    refs: &[GrounderModel],
    trained: &GrounderModel,
    priors: &[f64; 3],
) -> Vec<EnsembleMember> {
    let mut members: Vec<EnsembleMember> = refs
        .iter()
        .enumerate()
        .map(|(i, g)| EnsembleMember::new(g.clone(), priors.get(i).copied().unwrap_or(1.0)))
        .collect();
    members.push(EnsembleMember::new(
        trained.clone(),
        priors.get(refs.len()).copied().unwrap_or(1.0),
    ));
    members
}

/// Run iteration `k`, mutating `state` in place.
///
/// Phases, in order: planner fine-tuning on the current dataset, grounder
/// fine-tuning, collaborative policy optimization (rewards from the two
/// reference grounders plus the freshly tuned one), grounder distillation on
/// reward-verified rollouts, pool rotation, dataset enhancement, evaluation.
/// Errors are tagged with the phase that raised them.
pub fn run_iteration(
    state: &mut LoopState,
    bench: &Benchmark,
    cfg: &LoopConfig,
    seed: u64,
    k: u32,
) -> Result<IterationReport> {
    let t0 = Instant::now();
    let buckets = cfg.enhance.state_buckets;

    let planner_k = sft_planner(&state.planner, &state.dataset, bench, &cfg.sft_planner)
        .map_err(|e| Error::phase("sft_planner", k, e))?;

    let mut grounder_k = sft_grounder(&state.grounder, &state.dataset, bench, &cfg.sft_grounder)
        .map_err(|e| Error::phase("sft_grounder", k, e))?;
    grounder_k.model_tag = format!("phi_{k}");

    let members = ensemble_members(state.verifier_pool.refs(), &grounder_k, &cfg.priors);
    let mut grpo_cfg = cfg.grpo.clone();
    if cfg.mode == ArmMode::NoGrpo {
        grpo_cfg.epochs = 0;
    }
    let outcome = collaborative_grpo(
        &planner_k,
        &members,
        cfg.mode.ensemble_mode(),
        cfg.single_index,
        bench,
        buckets,
        &grpo_cfg,
        seed,
        k,
    )
    .map_err(|e| Error::phase("grpo", k, e))?;

    let grounder_final = if outcome.distilled.is_empty() {
        grounder_k
    } else {
        let mut g = sft_grounder(&grounder_k, &outcome.distilled, bench, &cfg.sft_grounder)
            .map_err(|e| Error::phase("sft_grounder_distill", k, e))?;
        g.model_tag = format!("phi_{k}");
        g
    };

    state.planner_pool.rotate(k, outcome.planner.clone());
    state.verifier_pool.rotate(k, grounder_final.clone());

    let (next_dataset, stats) = enhance_dataset(
        &state.dataset,
        &state.planner_pool,
        &state.verifier_pool,
        bench,
        &cfg.enhance,
        seed,
        k,
    )
    .map_err(|e| Error::phase("enhance", k, e))?;

    let mut metrics = BTreeMap::new();
    for split in Split::ALL {
        if bench.tasks_in(split).next().is_none() {
            continue;
        }
        let m = evaluate(&outcome.planner, &grounder_final, bench, split, buckets)
            .map_err(|e| Error::phase("evaluate", k, e))?;
        metrics.insert(split.as_str().to_string(), m);
    }

    state.planner = outcome.planner;
    state.grounder = grounder_final;
    state.dataset = next_dataset;
    state.iteration = k;

    Ok(IterationReport {
        k,
        seed,
        mode: cfg.mode.as_str().to_string(),
        metrics,
        stats,
        grpo_log: outcome.log,
        wall_clock_s: t0.elapsed().as_secs_f64(),
    })
}

fn seed_dir(out_dir: &Path, seed: u64) -> std::path::PathBuf {
    out_dir.join(format!("seed_{seed}"))
}

fn bootstrap(
    bench: &Benchmark,
    cfg: &LoopConfig,
    seed: u64,
) -> Result<(LoopState, IterationReport)> {
    let strong = reference_grounder(ReferenceKind::Strong, seed, &cfg.reference, bench);
    let noisy = reference_grounder(ReferenceKind::Noisy, seed, &cfg.reference, bench);
    let planner = PlannerModel::new(1.0);
    let grounder = GrounderModel::new("phi_0");
    let planner_pool = PlannerPool::new(vec![planner.clone()]);
    let verifier_pool = VerifierPool::new(vec![strong, noisy]);
    let (dataset, stats) = seed_dataset(bench, &planner, &verifier_pool, &cfg.enhance, seed)
        .map_err(|e| Error::phase("seed_dataset", 0, e))?;
    if dataset.is_empty() && cfg.iterations >= 1 {
        return Err(Error::phase(
            "seed_dataset",
            0,
            Error::EmptyDataset(
                "no seed proposals survived verification; raise plans_per_step or relax the verify rule"
                    .into(),
            ),
        ));
    }
    let report = IterationReport {
        k: 0,
        seed,
        mode: cfg.mode.as_str().to_string(),
        metrics: BTreeMap::new(),
        stats,
        grpo_log: Vec::new(),
        wall_clock_s: 0.0,
    };
    Ok((
        LoopState {
            iteration: 0,
            planner,
            grounder,
            planner_pool,
            verifier_pool,
            dataset,
        },
        report,
    ))
}

/// Run (or resume) the full loop for one seed under `out_dir/seed_<seed>/`.
///
/// Returns the reports for iterations `1..=K`; with `iterations == 0` only
/// the bootstrap checkpoint (seed models, reference pools, initial dataset)
/// is written and the list is empty. Resuming picks up after the latest
/// complete checkpoint and yields byte-identical artifacts to an
/// uninterrupted run.
pub fn run_loop(
    bench: &Benchmark,
    cfg: &LoopConfig,
    seed: u64,
    out_dir: &Path,
    resume: bool,
) -> Result<Vec<IterationReport>> {
    cfg.validate()?;
    let seed_dir = seed_dir(out_dir, seed);
    let ckpt_root = seed_dir.join("checkpoints");
    let mode = cfg.mode.as_str().to_string();
    let priors = cfg.priors_label();

    let mut reports: Vec<IterationReport> = Vec::new();
    let (mut state, start_k) = match latest_checkpoint(&ckpt_root)? {
        Some((k, dir)) if resume => {
            let (state, marker, _) = load_checkpoint(&dir, bench, cfg.enhance.state_buckets)?;
            if marker.seed != seed || marker.mode != mode || marker.priors != priors {
                return Err(Error::Config(format!(
                    "checkpoint {} belongs to a different run (seed {}, mode {}, priors {}); \
                     refusing to resume",
                    dir.display(),
                    marker.seed,
                    marker.mode,
                    marker.priors
                )));
            }
            for i in 1..=k {
                reports.push(checkpoint::load_report(&checkpoint_dir(&ckpt_root, i))?);
            }
            (state, k + 1)
        }
        _ => {
            let (state, report) = bootstrap(bench, cfg, seed)?;
            let marker = RunMarker {
                seed,
                completed_iteration: 0,
                mode: mode.clone(),
                priors: priors.clone(),
            };
            save_checkpoint(&checkpoint_dir(&ckpt_root, 0), &state, &report, &marker)?;
            (state, 1)
        }
    };

    for k in start_k..=cfg.iterations {
        let report = run_iteration(&mut state, bench, cfg, seed, k)?;
        let marker = RunMarker {
            seed,
            completed_iteration: k,
            mode: mode.clone(),
            priors: priors.clone(),
        };
        save_checkpoint(&checkpoint_dir(&ckpt_root, k), &state, &report, &marker)?;
        reports.push(report);
        fsutil::atomic_write(&seed_dir.join("stats.csv"), stats_csv(&reports).as_bytes())?;
        fsutil::atomic_write(
            &seed_dir.join("training_log.csv"),
            training_log_csv(&reports).as_bytes(),
        )?;
    }
    Ok(reports)
}

/// Run several labeled configurations over the same seeds, writing
/// `comparison.csv` (final held-out step success, wide over iterations) and
/// `long.csv` (every per-split row, ready for plotting) under `out_dir`.
pub fn ablation_run(
    bench: &Benchmark,
    arms: &[(String, LoopConfig)],
    seeds: &[u64],
    out_dir: &Path,
    resume: bool,
) -> Result<Vec<(String, u64, Vec<IterationReport>)>> {
    if arms.is_empty() {
        return Err(Error::Invalid("ablation needs at least one arm".into()));
    }
    let mut all = Vec::new();
    for (label, cfg) in arms {
        for &seed in seeds {
            let reports = run_loop(bench, cfg, seed, &out_dir.join(label), resume)?;
            all.push((label.clone(), seed, reports));
        }
    }
    fsutil::atomic_write(
        &out_dir.join("comparison.csv"),
        comparison_csv(&all).as_bytes(),
    )?;
    fsutil::atomic_write(&out_dir.join("long.csv"), long_csv(&all).as_bytes())?;
    Ok(all)
}

/// Long-format summary: one row per iteration and split, floats printed with
/// Rust's shortest round-trip formatting so reruns are byte-identical.
pub fn reports_csv(reports: &[IterationReport]) -> String {
    let mut out = String::from("k,split,ele_acc,op_f1,step_sr,purity,diversity,mode,seed\n");
    for r in reports {
        for split in Split::ALL {
            let Some(m) = r.metrics.get(split.as_str()) else {
                continue;
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.k,
                split.as_str(),
                m.ele_acc,
                m.op_f1,
                m.step_sr,
                r.stats.purity,
                r.stats.diversity,
                r.mode,
                r.seed
            ));
        }
    }
    out
}

/// Dataset-enhancement counters per iteration.
pub fn stats_csv(reports: &[IterationReport]) -> String {
    let mut out = String::from("k,generated,retained,purity,diversity\n");
    for r in reports {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.k, r.stats.generated, r.stats.retained, r.stats.purity, r.stats.diversity
        ));
    }
    out
}

/// Per-epoch optimization diagnostics across iterations.
pub fn training_log_csv(reports: &[IterationReport]) -> String {
    let mut out = String::from("k,epoch,mean_reward,mean_advantage_abs,kl,clip_fraction\n");
    for r in reports {
        for e in &r.grpo_log {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.k, e.epoch, e.mean_reward, e.mean_advantage_abs, e.kl, e.clip_fraction
            ));
        }
    }
    out
}

fn comparison_csv(all: &[(String, u64, Vec<IterationReport>)]) -> String {
    let max_k = all
        .iter()
        .flat_map(|(_, _, rs)| rs.iter().map(|r| r.k))
        .max()
        .unwrap_or(0);
    let mut out = String::from("arm,seed");
    for k in 1..=max_k {
        out.push_str(&format!(",step_sr_k{k}"));
    }
    out.push('\n');
    for (arm, seed, reports) in all {
        out.push_str(&format!("{arm},{seed}"));
        for k in 1..=max_k {
            out.push(',');
            let cell = reports
                .iter()
                .find(|r| r.k == k)
                .and_then(|r| r.metrics.get(Split::HeldOutTask.as_str()))
                .map(|m| format!("{}", m.step_sr));
            if let Some(cell) = cell {
                out.push_str(&cell);
            }
        }
        out.push('\n');
    }
    out
}

fn long_csv(all: &[(String, u64, Vec<IterationReport>)]) -> String {
    let mut out = String::from("arm,k,split,ele_acc,op_f1,step_sr,purity,diversity,mode,seed\n");
    for (arm, _, reports) in all {
        let body = reports_csv(reports);
        for line in body.lines().skip(1) {
            out.push_str(&format!("{arm},{line}\n"));
        }
    }
    out
}
