//! Command-line driver: generate benchmarks, run the co-training loop,
//! sweep the ablation arms, and evaluate checkpoints.
//!
//! Exit codes: 0 on success, 2 for usage problems (bad flags, bad config
//! files, corrupt inputs), 1 for everything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use coevo::config::{parse_priors, RunConfig};
use coevo::env::{build_benchmark, load_benchmark, save_benchmark, Benchmark, Split};
use coevo::trainer::{
    ablation_run, evaluate_detailed, latest_checkpoint, load_checkpoint, reports_csv, run_loop,
    ArmMode, IterationReport,
};
use coevo::{Error, Result};

#[derive(Parser)]
#[command(name = "coevo", version, about = "Co-training of a GUI planner and grounder on a synthetic benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic benchmark and write it under --out.
    GenBenchmark(GenArgs),
    /// Run the co-training loop for every configured seed.
    Run(RunArgs),
    /// Run all ablation arms (reward modes and no-optimization) on shared seeds.
    Ablate(AblateArgs),
    /// Evaluate a saved checkpoint on one split.
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenArgs {
    /// TOML configuration; the [benchmark] table sizes the world.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark seed (overrides `benchmark_seed` from the config).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; receives benchmark.jsonl and config_resolved.toml.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; defaults cover a desk-scale run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long)]
    out: PathBuf,
    /// Continue from the latest complete checkpoints under --out.
    #[arg(long)]
    resume: bool,
    /// Reward ensemble arm: cdrem, prior_only, average, single, or no_grpo.
    #[arg(long)]
    mode: Option<String>,
    /// Ensemble prior scales as strong:noisy:trained, e.g. 1:1:2.
    #[arg(long)]
    priors: Option<String>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Train only this seed instead of the configured list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; each arm gets a subdirectory.
    #[arg(long)]
    out: PathBuf,
    /// Continue arms from their latest complete checkpoints.
    #[arg(long)]
    resume: bool,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint directory (an iter_<k> directory) or a run's seed
    /// directory, in which case the latest checkpoint is used.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Benchmark JSONL the checkpoint was trained on.
    #[arg(long)]
    benchmark: PathBuf,
    /// Split to evaluate: train, held_out_task, held_out_screen, held_out_domain.
    #[arg(long, default_value = "held_out_task")]
    split: String,
    /// Config used for the run (needed when state_buckets was overridden).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional directory for the per-step CSV log.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenBenchmark(args) => cmd_gen(args),
        Command::Run(args) => cmd_run(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Eval(args) => cmd_eval(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let src = std::fs::read_to_string(p).map_err(|e| {
                Error::Config(format!("cannot read config {}: {e}", p.display()))
            })?;
            RunConfig::from_toml_str(&src)
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn configure_jobs(jobs: usize) -> Result<()> {
    if jobs == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build_global()
        .map_err(|e| Error::Invalid(format!("cannot size the worker pool: {e}")))
}

/// Load the run's benchmark from `out/benchmark.jsonl`, generating and
/// saving it first if missing.
fn obtain_benchmark(cfg: &RunConfig, out: &Path, resume: bool) -> Result<Benchmark> {
    let path = out.join("benchmark.jsonl");
    if path.exists() {
        return load_benchmark(&path);
    }
    if resume {
        return Err(Error::Config(format!(
            "--resume given but {} does not exist; nothing to resume",
            path.display()
        )));
    }
    let bench = build_benchmark(cfg.benchmark_seed, &cfg.benchmark)?;
    save_benchmark(&bench, &path)?;
    Ok(bench)
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    if let Some(seed) = args.seed {
        cfg.benchmark_seed = seed;
    }
    let bench = build_benchmark(cfg.benchmark_seed, &cfg.benchmark)?;
    let path = args.out.join("benchmark.jsonl");
    save_benchmark(&bench, &path)?;
    write_file(
        &args.out.join("config_resolved.toml"),
        cfg.to_toml_string().as_bytes(),
    )?;
    let mut split_counts = String::new();
    for split in Split::ALL {
        let n = bench.tasks_in(split).count();
        split_counts.push_str(&format!(" {}={n}", split.as_str()));
    }
    println!(
        "wrote {} ({} screens, {} tasks:{split_counts})",
        path.display(),
        bench.screens.len(),
        bench.tasks.len()
    );
    Ok(())
}

fn apply_run_overrides(
    cfg: &mut RunConfig,
    seed: Option<u64>,
    mode: Option<String>,
    priors: Option<String>,
    jobs: Option<usize>,
) -> Result<()> {
    if let Some(seed) = seed {
        cfg.seeds = vec![seed];
    }
    if let Some(mode) = mode {
        if ArmMode::from_str(&mode).is_none() {
            return Err(Error::Config(format!(
                "unknown mode `{mode}` (expected one of {})",
                ArmMode::ALL.map(|m| m.as_str()).join(", ")
            )));
        }
        cfg.mode = mode;
    }
    if let Some(priors) = priors {
        parse_priors(&priors)?;
        cfg.priors = priors;
    }
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    }
    Ok(())
}

fn print_summary(reports: &[IterationReport]) {
    for r in reports {
        let held = r.metrics.get(Split::HeldOutTask.as_str());
        let (ele, f1, sr) = held.map_or((f64::NAN, f64::NAN, f64::NAN), |m| {
            (m.ele_acc, m.op_f1, m.step_sr)
        });
        println!(
            "seed {} k {}: ele_acc {ele:.3} op_f1 {f1:.3} step_sr {sr:.3} purity {:.3} diversity {:.3}",
            r.seed, r.k, r.stats.purity, r.stats.diversity
        );
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_run_overrides(&mut cfg, args.seed, args.mode, args.priors, args.jobs)?;
    cfg.validate()?;
    configure_jobs(cfg.jobs)?;
    let loop_cfg = cfg.loop_config()?;
    let bench = obtain_benchmark(&cfg, &args.out, args.resume)?;
    write_file(
        &args.out.join("config_resolved.toml"),
        cfg.to_toml_string().as_bytes(),
    )?;
    let mut all = Vec::new();
    for &seed in &cfg.seeds {
        let reports = run_loop(&bench, &loop_cfg, seed, &args.out, args.resume)?;
        print_summary(&reports);
        all.extend(reports);
    }
    write_file(&args.out.join("reports.csv"), reports_csv(&all).as_bytes())?;
    println!("wrote {}", args.out.join("reports.csv").display());
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let mut cfg = load_config(args.config.as_deref())?;
    apply_run_overrides(&mut cfg, args.seed, None, None, args.jobs)?;
    cfg.validate()?;
    configure_jobs(cfg.jobs)?;
    let bench = obtain_benchmark(&cfg, &args.out, args.resume)?;
    write_file(
        &args.out.join("config_resolved.toml"),
        cfg.to_toml_string().as_bytes(),
    )?;
    let mut arms = Vec::new();
    for mode in ArmMode::ALL {
        let label = if mode == ArmMode::Cdrem { "full" } else { mode.as_str() };
        let mut arm_cfg = cfg.clone();
        arm_cfg.mode = mode.as_str().to_string();
        arms.push((label.to_string(), arm_cfg.loop_config()?));
    }
    let all = ablation_run(&bench, &arms, &cfg.seeds, &args.out, args.resume)?;
    for (label, seed, reports) in &all {
        if let Some(last) = reports.last() {
            let sr = last
                .metrics
                .get(Split::HeldOutTask.as_str())
                .map_or(f64::NAN, |m| m.step_sr);
            println!("arm {label} seed {seed}: final step_sr {sr:.3}");
        }
    }
    println!("wrote {}", args.out.join("comparison.csv").display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let cfg = load_config(args.config.as_deref())?;
    let split = Split::from_str(&args.split).ok_or_else(|| {
        Error::Config(format!(
            "unknown split `{}` (expected one of {})",
            args.split,
            Split::ALL.map(|s| s.as_str()).join(", ")
        ))
    })?;
    let bench = load_benchmark(&args.benchmark)?;
    let dir = if args.checkpoint.join("rng.json").exists() {
        args.checkpoint.clone()
    } else {
        let root = args.checkpoint.join("checkpoints");
        latest_checkpoint(&root)?
            .map(|(_, dir)| dir)
            .ok_or_else(|| {
                Error::Config(format!(
                    "no complete checkpoint under {}",
                    args.checkpoint.display()
                ))
            })?
    };
    let (state, marker, _) = load_checkpoint(&dir, &bench, cfg.state_buckets)?;
    let rows = evaluate_detailed(&state.planner, &state.grounder, &bench, split, cfg.state_buckets)?;
    let metrics = coevo::trainer::aggregate(&rows);
    println!(
        "checkpoint {} (seed {}, iteration {})",
        dir.display(),
        marker.seed,
        marker.completed_iteration
    );
    println!(
        "split {}: ele_acc {} op_f1 {} step_sr {} steps {}",
        split.as_str(),
        metrics.ele_acc,
        metrics.op_f1,
        metrics.step_sr,
        metrics.steps
    );
    if let Some(out) = args.out {
        let mut csv = String::from("task,step,element_hit,type_hit,value_hit,op_f1\n");
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.task_id,
                r.step_index,
                u8::from(r.element_hit),
                u8::from(r.type_hit),
                u8::from(r.value_hit),
                r.op_f1
            ));
        }
        let path = out.join(format!("eval_{}.csv", split.as_str()));
        write_file(&path, csv.as_bytes())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
