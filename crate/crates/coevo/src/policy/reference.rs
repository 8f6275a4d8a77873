//! Fixed reference grounders for the reward ensemble and verifier pool.
//!
//! References approximate "a competent external grounder whose weights we
//! don't train": a diagonal token-affinity matrix (each attribute token
//! attracts itself) with Gaussian disturbance on every entry. The strong
//! reference is a near-oracle over the whole vocabulary. The noisy one only
//! knows a random subset of attribute tokens — on those it behaves like a
//! weaker strong reference; elsewhere its rows are pure noise, so its scores
//! are flat and its softmax confidence drops exactly where its answers stop
//! being trustworthy. Off-the-shelf grounders fail the same way: reliable on
//! interface patterns they were built for, near-chance outside them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{GrounderModel, PlannerModel};
use crate::env::Benchmark;
use crate::error::{Error, Result};
use crate::rng::{gauss, stream, tag};

/// Which fixed grounder to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Strong,
    Noisy,
}

impl ReferenceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ReferenceKind::Strong => "strong",
            ReferenceKind::Noisy => "noisy",
        }
    }
}

/// Diagonal strength and disturbance scales for the two reference kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSpec {
    pub strong_affinity: f64,
    pub strong_noise: f64,
    /// Diagonal strength on the attribute tokens the noisy reference knows.
    pub noisy_affinity: f64,
    /// Disturbance scale on known-token rows.
    pub noisy_noise: f64,
    /// Fraction of attribute tokens the noisy reference knows.
    pub noisy_coverage: f64,
    /// Disturbance scale on unknown-token rows (which carry no diagonal).
    pub noisy_blind_noise: f64,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        ReferenceSpec {
            strong_affinity: 2.5,
            strong_noise: 0.03,
            noisy_affinity: 2.0,
            noisy_noise: 0.05,
            noisy_coverage: 0.7,
            noisy_blind_noise: 0.05,
        }
    }
}

impl ReferenceSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("strong_affinity", self.strong_affinity),
            ("strong_noise", self.strong_noise),
            ("noisy_affinity", self.noisy_affinity),
            ("noisy_noise", self.noisy_noise),
            ("noisy_blind_noise", self.noisy_blind_noise),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Invalid(format!(
                    "reference {name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if !self.noisy_coverage.is_finite() || !(0.0..=1.0).contains(&self.noisy_coverage) {
            return Err(Error::Invalid(format!(
                "reference noisy_coverage must lie in [0, 1], got {}",
                self.noisy_coverage
            )));
        }
        Ok(())
    }
}

fn attr_tokens(bench: &Benchmark) -> Vec<String> {
    let set: std::collections::BTreeSet<&String> = bench
        .screens
        .iter()
        .flat_map(|s| s.elements.iter())
        .flat_map(|e| e.attrs.iter())
        .collect();
    set.into_iter().cloned().collect()
}

fn roles(bench: &Benchmark) -> Vec<String> {
    let set: std::collections::BTreeSet<&str> = bench
        .screens
        .iter()
        .flat_map(|s| s.elements.iter())
        .map(|e| e.role())
        .collect();
    set.into_iter().map(str::to_string).collect()
}

/// Synthesize a fixed reference grounder over the benchmark's vocabulary.
/// Deterministic in `(kind, seed, spec, benchmark vocabulary)`.
pub fn reference_grounder(
    kind: ReferenceKind,
    seed: u64,
    spec: &ReferenceSpec,
    bench: &Benchmark,
) -> GrounderModel {
    let (kappa, noise, coverage, blind_noise) = match kind {
        ReferenceKind::Strong => (spec.strong_affinity, spec.strong_noise, 1.0, 0.0),
        ReferenceKind::Noisy => (
            spec.noisy_affinity,
            spec.noisy_noise,
            spec.noisy_coverage,
            spec.noisy_blind_noise,
        ),
    };
    let mut rng = stream(seed, "ref", &[tag(kind.as_str())]);
    let mut model = GrounderModel::new(format!("ref_{}", kind.as_str()));
    let tokens = attr_tokens(bench);
    for t in &tokens {
        let known = rng.gen::<f64>() < coverage;
        for a in &tokens {
            let entry = if known {
                let diag = if t == a { kappa } else { 0.0 };
                diag + gauss(&mut rng) * noise
            } else {
                gauss(&mut rng) * blind_noise
            };
            model.set_affinity(t, a, entry);
        }
    }
    for role in roles(bench) {
        model.set_bias(&role, gauss(&mut rng) * noise);
    }
    model
}

/// Perfect planner/grounder pair for a benchmark: the planner puts a large
/// logit on each step's uniquely-matching candidate, ground-truth type, and
/// ground-truth value; the grounder gets a large diagonal affinity so unique
/// plans always resolve to their element. Used as a known-good fixture for
/// evaluation plumbing.
pub fn oracle_models(bench: &Benchmark, buckets: u32) -> Result<(PlannerModel, GrounderModel)> {
    use crate::env::enumerate_plan_candidates;
    use crate::policy::{state_feature, Head};

    let mut planner = PlannerModel::new(1.0);
    for task in &bench.tasks {
        for (si, step) in task.steps.iter().enumerate() {
            let screen = bench.screen(step.screen_id)?;
            let cands = enumerate_plan_candidates(screen, None);
            let slot = cands
                .iter()
                .position(|c| c.matches.len() == 1 && c.matches[0] == step.target)
                .ok_or_else(|| {
                    Error::Invalid(format!(
                        "no uniquely-matching candidate for target {} on screen {}",
                        step.target, step.screen_id
                    ))
                })?;
            let state = state_feature(task.q_feature, step.screen_id, si, si, buckets);
            planner.set(Head::Plan, state, slot as u32, 10.0);
            planner.set(Head::Type, state, step.action.index() as u32, 10.0);
            let value_slot = bench.value_pool.index_of(&step.value).ok_or_else(|| {
                Error::Invalid(format!("step value {:?} missing from the pool", step.value))
            })?;
            planner.set(Head::Value, state, value_slot as u32, 10.0);
        }
    }
    let mut grounder = GrounderModel::new("oracle");
    for t in attr_tokens(bench) {
        grounder.set_affinity(&t, &t, 10.0);
    }
    Ok((planner, grounder))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapool::tests_support::tiny_benchmark;
    use crate::env::{build_benchmark, enumerate_plan_candidates, BenchmarkSpec, Split};
    use crate::policy::DecodeMode;
    use crate::rng::stream as rng_stream;

    /// Accuracy of a grounder on full-attribute ground-truth plans over the
    /// train split: the fraction of steps where it picks the target element.
    fn full_plan_accuracy(g: &GrounderModel, bench: &Benchmark) -> f64 {
        let mut hits = 0usize;
        let mut total = 0usize;
        for task in bench.tasks_in(Split::Train) {
            for step in &task.steps {
                let screen = bench.screen(step.screen_id).unwrap();
                let plan = screen.elements[step.target as usize].attrs.clone();
                let out = g.ground_step(screen, &plan).unwrap();
                if out.element_index == step.target as usize {
                    hits += 1;
                }
                total += 1;
            }
        }
        hits as f64 / total as f64
    }

    #[test]
    fn references_are_deterministic_and_kind_scoped() {
        let bench = tiny_benchmark();
        let spec = ReferenceSpec::default();
        let a = reference_grounder(ReferenceKind::Strong, 3, &spec, &bench);
        let b = reference_grounder(ReferenceKind::Strong, 3, &spec, &bench);
        let c = reference_grounder(ReferenceKind::Noisy, 3, &spec, &bench);
        let d = reference_grounder(ReferenceKind::Strong, 4, &spec, &bench);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
        assert_eq!(a.model_tag, "ref_strong");
        assert_eq!(c.model_tag, "ref_noisy");
    }

    #[test]
    fn default_spec_has_the_documented_scales() {
        let spec = ReferenceSpec::default();
        assert_eq!(spec.strong_affinity, 2.5);
        assert_eq!(spec.strong_noise, 0.03);
        assert_eq!(spec.noisy_affinity, 2.0);
        assert_eq!(spec.noisy_noise, 0.05);
        assert_eq!(spec.noisy_coverage, 0.7);
        assert_eq!(spec.noisy_blind_noise, 0.05);
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn spec_validation_rejects_bad_scales() {
        let mut spec = ReferenceSpec::default();
        spec.noisy_coverage = 1.2;
        assert!(spec.validate().is_err());
        spec = ReferenceSpec::default();
        spec.strong_noise = -0.1;
        assert!(spec.validate().is_err());
        spec = ReferenceSpec::default();
        spec.noisy_blind_noise = f64::NAN;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn strong_reference_is_near_perfect_and_noisy_is_strictly_weaker() {
        let bench = build_benchmark(11, &BenchmarkSpec::default()).unwrap();
        let spec = ReferenceSpec::default();
        let strong = reference_grounder(ReferenceKind::Strong, 1, &spec, &bench);
        let noisy = reference_grounder(ReferenceKind::Noisy, 1, &spec, &bench);
        let strong_acc = full_plan_accuracy(&strong, &bench);
        let noisy_acc = full_plan_accuracy(&noisy, &bench);
        assert!(strong_acc >= 0.9, "strong reference accuracy {strong_acc}");
        assert!(
            noisy_acc < strong_acc,
            "noisy ({noisy_acc}) should trail strong ({strong_acc})"
        );
        assert!(noisy_acc > 0.45, "noisy reference should still be competent: {noisy_acc}");
    }

    /// The noisy reference's mistakes come from vocabulary it does not know,
    /// where its scores are flat — so its reported confidence should be
    /// markedly lower on steps it gets wrong than on steps it gets right.
    /// Confidence-weighted reward mixing depends on this separation.
    #[test]
    fn noisy_confidence_is_lower_where_it_errs() {
        let bench = build_benchmark(11, &BenchmarkSpec::default()).unwrap();
        let noisy = reference_grounder(ReferenceKind::Noisy, 1, &ReferenceSpec::default(), &bench);
        let (mut hit_conf, mut miss_conf) = (Vec::new(), Vec::new());
        for task in &bench.tasks {
            for step in &task.steps {
                let screen = bench.screen(step.screen_id).unwrap();
                let plan = screen.elements[step.target as usize].attrs.clone();
                let out = noisy.ground_step(screen, &plan).unwrap();
                if out.element_index == step.target as usize {
                    hit_conf.push(out.confidence);
                } else {
                    miss_conf.push(out.confidence);
                }
            }
        }
        assert!(!hit_conf.is_empty() && !miss_conf.is_empty());
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (hits, misses) = (mean(&hit_conf), mean(&miss_conf));
        assert!(
            hits > misses + 0.5,
            "confidence should separate hits ({hits}) from misses ({misses})"
        );
    }

    #[test]
    fn oracle_pair_is_perfect_on_its_benchmark() {
        let bench = tiny_benchmark();
        let buckets = 1024;
        let (planner, grounder) = oracle_models(&bench, buckets).unwrap();
        let mut rng = rng_stream(0, "unused", &[]);
        for task in &bench.tasks {
            for (si, step) in task.steps.iter().enumerate() {
                let obs = bench.observe(task, si).unwrap();
                let cands = enumerate_plan_candidates(obs.screen, None);
                let state = crate::policy::observation_feature(&obs, buckets);
                let out = planner.plan_step(
                    state,
                    cands.len(),
                    bench.value_pool.len(),
                    DecodeMode::Greedy,
                    &mut rng,
                );
                let plan = &cands[out.plan.index];
                assert_eq!(plan.matches, vec![step.target]);
                assert_eq!(out.action_type.index, step.action.index());
                assert_eq!(
                    bench.value_pool.get(out.value.index).unwrap(),
                    step.value.as_slice()
                );
                let g = grounder.ground_step(obs.screen, &plan.tokens).unwrap();
                assert_eq!(g.element_index, step.target as usize);
            }
        }
    }

    #[test]
    fn oracle_on_a_generated_world_grounds_every_gt_plan() {
        let bench = build_benchmark(19, &BenchmarkSpec::default()).unwrap();
        let (_, grounder) = oracle_models(&bench, 1024).unwrap();
        assert_eq!(full_plan_accuracy(&grounder, &bench), 1.0);
    }
}


