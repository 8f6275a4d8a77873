//! Co-evolution of a tabular GUI planner and a grounder over a synthetic,
//! fully observable-by-construction GUI benchmark.
//!
//! The crate provides:
//!
//! * [`env`] — benchmark generation (screens, elements, multi-step tasks with
//!   ground-truth actions), plan-candidate enumeration, and a teacher-forced
//!   step transition.
//! * [`policy`] — the tabular planner (plan / action-type / value heads over
//!   hashed state features) and the token-affinity grounder, plus supervised
//!   fine-tuning for both and fixed reference grounders.
//! * [`reward`] — the confidence-weighted grounding-reward ensemble and the
//!   gated per-step reward used during policy optimization.
//! * [`grpo`] — group-relative policy optimization with a clipped surrogate
//!   and an exact KL penalty, including a finite-difference gradient check.
//! * [`datapool`] — propose-and-verify dataset enhancement, dedup/merge,
//!   rolling model pools, and JSONL persistence.
//! * [`trainer`] — the iteration loop wiring everything together, greedy
//!   evaluation, checkpoints, and CSV reports.
//! * [`config`] — TOML run configuration shared by the library and the CLI.
//!
//! Everything is deterministic given a master seed: random streams are derived
//! from `(seed, label, indices…)`, never shared, so results are reproducible
//! bit-for-bit regardless of thread count.

pub mod config;
pub mod datapool;
pub mod env;
pub mod error;
mod fsutil;
pub mod grpo;
pub mod policy;
pub mod reward;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
