//! Benchmark generation.
//!
//! Screens are grids of elements with paired roles (so role-only plans stay
//! ambiguous) and per-screen label palettes (so fully attributed plans are
//! unique). Tasks are journeys through per-feature screen pools; the mapping
//! from (task feature, screen) to the ground-truth action is a pure function
//! of the seed, which is what lets knowledge transfer across tasks that visit
//! the same screens with the same intent.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{
    enumerate_plan_candidates, ActionType, BBox, Benchmark, Element, Screen, Split, Task, TaskStep,
};
use crate::error::{Error, Result};
use crate::rng::stream;

const ROLE_WORDS: [&str; 8] = [
    "button", "input", "link", "tab", "menu", "icon", "field", "toggle",
];
const LABEL_WORDS: [&str; 24] = [
    "search", "submit", "cancel", "login", "signup", "filter", "sort", "next", "prev", "home",
    "profile", "settings", "cart", "checkout", "date", "time", "city", "name", "email", "price",
    "quantity", "color", "size", "brand",
];
const VALUE_WORDS: [&str; 12] = [
    "new", "york", "london", "paris", "tokyo", "red", "blue", "green", "small", "large", "cheap",
    "fast",
];

/// Fraction of tasks assigned to each split. Must sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub held_out_task: f64,
    pub held_out_screen: f64,
    pub held_out_domain: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            held_out_task: 0.2,
            held_out_screen: 0.1,
            held_out_domain: 0.1,
        }
    }
}

impl SplitFractions {
    fn as_array(&self) -> [f64; 4] {
        [
            self.train,
            self.held_out_task,
            self.held_out_screen,
            self.held_out_domain,
        ]
    }
}

/// Size knobs for the generated world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub screens: u32,
    pub elements_per_screen: u32,
    pub tasks: u32,
    pub steps_per_task: u32,
    /// Number of distinct task features ("what the user wants" slots).
    pub q_features: u32,
    /// Screens each feature's journeys draw from, per screen partition.
    pub screens_per_feature: u32,
    /// Labels sampled per screen; elements draw label sets from this palette.
    pub label_palette: u32,
    pub labels_per_element: u32,
    pub role_vocab: u32,
    pub label_vocab: u32,
    pub value_vocab: u32,
    /// Largest ground-truth value bag (TYPE/SELECT steps draw 1..=this many).
    pub max_value_tokens: u32,
    pub split_fractions: SplitFractions,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        BenchmarkSpec {
            screens: 60,
            elements_per_screen: 6,
            tasks: 60,
            steps_per_task: 3,
            q_features: 8,
            screens_per_feature: 4,
            label_palette: 5,
            labels_per_element: 2,
            role_vocab: 8,
            label_vocab: 24,
            value_vocab: 12,
            max_value_tokens: 2,
            split_fractions: SplitFractions::default(),
        }
    }
}

fn vocab(base: &[&str], n: u32, prefix: &str) -> Vec<String> {
    (0..n as usize)
        .map(|i| match base.get(i) {
            Some(w) => (*w).to_string(),
            None => format!("{prefix}{i}"),
        })
        .collect()
}

fn choose_count(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * u128::from(n - i) / u128::from(i + 1);
        if acc > u128::from(u64::MAX) {
            return u64::MAX;
        }
    }
    acc as u64
}

/// All k-combinations of `items`, in lexicographic index order.
fn combinations(items: &[String], k: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let n = items.len();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i].clone()).collect());
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return out;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Integer apportionment by largest remainder; ties go to lower index.
fn apportion(total: u32, fracs: &[f64]) -> Vec<u32> {
    let exact: Vec<f64> = fracs.iter().map(|f| f64::from(total) * f).collect();
    let mut counts: Vec<u32> = exact.iter().map(|&x| x.floor() as u32).collect();
    let assigned: u32 = counts.iter().sum();
    let mut order: Vec<usize> = (0..fracs.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) as usize {
        counts[order[i % order.len()]] += 1;
    }
    counts
}

fn validate_spec(spec: &BenchmarkSpec) -> Result<()> {
    let err = |msg: String| Err(Error::Benchmark(msg));
    if spec.screens == 0 || spec.elements_per_screen == 0 || spec.tasks == 0 {
        return err("screens, elements_per_screen, and tasks must all be positive".into());
    }
    if spec.steps_per_task == 0 || spec.q_features == 0 || spec.screens_per_feature == 0 {
        return err("steps_per_task, q_features, and screens_per_feature must be positive".into());
    }
    if spec.labels_per_element == 0 {
        return err("labels_per_element must be positive".into());
    }
    if spec.label_palette < spec.labels_per_element {
        return err(format!(
            "label_palette ({}) must be at least labels_per_element ({})",
            spec.label_palette, spec.labels_per_element
        ));
    }
    if spec.label_palette > spec.label_vocab {
        return err(format!(
            "label_palette ({}) exceeds label_vocab ({})",
            spec.label_palette, spec.label_vocab
        ));
    }
    if spec.max_value_tokens == 0 || spec.max_value_tokens > spec.value_vocab {
        return err(format!(
            "max_value_tokens ({}) must be in 1..=value_vocab ({})",
            spec.max_value_tokens, spec.value_vocab
        ));
    }
    if spec.role_vocab == 0 {
        return err("role_vocab must be positive".into());
    }
    let fr = spec.split_fractions.as_array();
    if fr.iter().any(|&f| !(0.0..=1.0).contains(&f)) {
        return err("split fractions must each lie in [0, 1]".into());
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return err(format!(
            "split fractions must sum to 1 (got {})",
            fr.iter().sum::<f64>()
        ));
    }
    let sets = choose_count(
        u64::from(spec.label_palette),
        u64::from(spec.labels_per_element),
    );
    if sets < u64::from(spec.elements_per_screen) {
        return err(format!(
            "label_palette {} choose labels_per_element {} yields only {} distinct label sets \
             but each screen needs {}; grow the palette or shrink the screen",
            spec.label_palette, spec.labels_per_element, sets, spec.elements_per_screen
        ));
    }
    Ok(())
}

/// Reserve `round(total * frac)` items (at least one when the fraction is
/// positive) for a held-out partition.
fn reserve(total: u32, frac: f64) -> u32 {
    if frac <= 0.0 {
        0
    } else {
        ((f64::from(total) * frac).round() as u32).clamp(1, total)
    }
}

fn affordances_for(role: &str) -> Vec<ActionType> {
    let mut aff = vec![ActionType::Click];
    if role == "input" || role == "field" {
        aff.push(ActionType::Type);
    }
    if role == "menu" || role == "tab" {
        aff.push(ActionType::Select);
    }
    aff
}

/// Build the world for `(seed, spec)`. Fails with a message naming the
/// violated constraint when the spec cannot produce a valid benchmark.
pub fn build_benchmark(seed: u64, spec: &BenchmarkSpec) -> Result<Benchmark> {
    validate_spec(spec)?;
    let roles = vocab(&ROLE_WORDS, spec.role_vocab, "role");
    let labels = vocab(&LABEL_WORDS, spec.label_vocab, "label");
    let values = vocab(&VALUE_WORDS, spec.value_vocab, "value");

    let mut rng = stream(seed, "bench", &[]);
    let e_count = spec.elements_per_screen as usize;
    let cols = (e_count as f64).sqrt().ceil() as usize;
    let rows = e_count.div_ceil(cols);

    // Screens: grid layout, paired roles, distinct label sets per screen.
    let mut screens = Vec::with_capacity(spec.screens as usize);
    for sid in 0..spec.screens {
        let palette_idx = index::sample(&mut rng, labels.len(), spec.label_palette as usize);
        let mut palette: Vec<String> = palette_idx.iter().map(|i| labels[i].clone()).collect();
        palette.sort();
        let combos = combinations(&palette, spec.labels_per_element as usize);
        let chosen = index::sample(&mut rng, combos.len(), e_count);
        let mut elements = Vec::with_capacity(e_count);
        for i in 0..e_count {
            let role = roles[(i / 2) % roles.len()].clone();
            let label_set = combos[chosen.index(i)].clone();
            let (r, c) = (i / cols, i % cols);
            let bbox = BBox::new(
                c as f64 / cols as f64 + 0.1 / cols as f64,
                r as f64 / rows as f64 + 0.1 / rows as f64,
                (c + 1) as f64 / cols as f64 - 0.1 / cols as f64,
                (r + 1) as f64 / rows as f64 - 0.1 / rows as f64,
            );
            let mut attrs = vec![role.clone()];
            attrs.extend(label_set);
            elements.push(Element {
                id: i as u32,
                bbox,
                affordances: affordances_for(&role),
                attrs,
            });
        }
        screens.push(Screen { id: sid, elements });
    }

    // Screen partition: held-out-domain and held-out-screen slices come off
    // the top; everything else is shared by train and held-out-task journeys.
    let fr = spec.split_fractions;
    let n_hod_s = reserve(spec.screens, fr.held_out_domain);
    let n_hos_s = reserve(spec.screens, fr.held_out_screen);
    if n_hod_s + n_hos_s > spec.screens {
        return Err(Error::Benchmark(format!(
            "cannot reserve {n_hod_s} held-out-domain and {n_hos_s} held-out-screen screens \
             out of {} total",
            spec.screens
        )));
    }
    let shared_end = (spec.screens - n_hod_s - n_hos_s) as usize;
    let hos_end = (spec.screens - n_hod_s) as usize;
    let all_ids: Vec<u32> = (0..spec.screens).collect();
    let shared_screens = &all_ids[..shared_end];
    let hos_screens = &all_ids[shared_end..hos_end];
    let hod_screens = &all_ids[hos_end..];
    if (fr.train > 0.0 || fr.held_out_task > 0.0) && shared_screens.is_empty() {
        return Err(Error::Benchmark(
            "no screens left for train/held-out-task journeys after held-out reservations".into(),
        ));
    }

    // Feature partition: the last features are domain-held-out.
    let n_hod_q = reserve(spec.q_features, fr.held_out_domain);
    let shared_q: Vec<u32> = (0..spec.q_features - n_hod_q).collect();
    let hod_q: Vec<u32> = (spec.q_features - n_hod_q..spec.q_features).collect();
    if (fr.train > 0.0 || fr.held_out_task > 0.0 || fr.held_out_screen > 0.0) && shared_q.is_empty()
    {
        return Err(Error::Benchmark(
            "no task features left for non-domain splits after the held-out-domain reservation"
                .into(),
        ));
    }

    // Ground-truth intent per (feature, screen): a pure function of the seed.
    let intent = |q: u32, sid: u32, screen: &Screen| -> TaskStep {
        let mut r2 = stream(seed, "intent", &[u64::from(q), u64::from(sid)]);
        let e = r2.gen_range(0..screen.elements.len());
        let el = &screen.elements[e];
        let action = el.affordances[r2.gen_range(0..el.affordances.len())];
        let value = if action == ActionType::Click {
            Vec::new()
        } else {
            let n = r2.gen_range(1..=spec.max_value_tokens as usize);
            index::sample(&mut r2, values.len(), n)
                .iter()
                .map(|i| values[i].clone())
                .collect()
        };
        TaskStep {
            screen_id: sid,
            target: e as u32,
            action,
            value,
        }
    };

    // Per-feature screen pools.
    let pool_from = |rng: &mut rand_chacha::ChaCha8Rng, src: &[u32]| -> Result<Vec<u32>> {
        if src.is_empty() {
            return Err(Error::Benchmark(
                "screen partition too small for the requested split fractions".into(),
            ));
        }
        let amount = (spec.screens_per_feature as usize).min(src.len());
        Ok(index::sample(rng, src.len(), amount)
            .iter()
            .map(|i| src[i])
            .collect())
    };
    use std::collections::BTreeMap;
    let mut pool_shared: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut pool_hos: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    let mut pool_hod: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &q in &shared_q {
        pool_shared.insert(q, pool_from(&mut rng, shared_screens)?);
    }
    if fr.held_out_screen > 0.0 {
        for &q in &shared_q {
            pool_hos.insert(q, pool_from(&mut rng, hos_screens)?);
        }
    }
    for &q in &hod_q {
        pool_hod.insert(q, pool_from(&mut rng, hod_screens)?);
    }

    // Tasks: journeys through the feature's pool, deduped best-effort.
    let counts = apportion(spec.tasks, &fr.as_array());
    let mut tasks = Vec::with_capacity(spec.tasks as usize);
    let mut seen: std::collections::BTreeSet<(u32, Vec<u32>)> = std::collections::BTreeSet::new();
    let mut tid: u32 = 0;
    for (split, &n) in Split::ALL.iter().zip(counts.iter()) {
        for _ in 0..n {
            let (q, pool) = match split {
                Split::HeldOutDomain => {
                    let q = hod_q[tid as usize % hod_q.len()];
                    (q, &pool_hod[&q])
                }
                Split::HeldOutScreen => {
                    let q = shared_q[tid as usize % shared_q.len()];
                    (q, &pool_hos[&q])
                }
                _ => {
                    let q = shared_q[tid as usize % shared_q.len()];
                    (q, &pool_shared[&q])
                }
            };
            let mut journey: Vec<u32> = Vec::new();
            for _ in 0..10 {
                journey = (0..spec.steps_per_task)
                    .map(|_| pool[rng.gen_range(0..pool.len())])
                    .collect();
                if !seen.contains(&(q, journey.clone())) {
                    break;
                }
            }
            seen.insert((q, journey.clone()));
            let steps = journey
                .iter()
                .map(|&sid| intent(q, sid, &screens[sid as usize]))
                .collect();
            tasks.push(Task {
                id: tid,
                q_feature: q,
                split: *split,
                steps,
            });
            tid += 1;
        }
    }

    let bench = Benchmark::from_parts(screens, tasks);
    validate_world(&bench)?;
    Ok(bench)
}

/// Construction-time guarantees: every target is reachable by an unambiguous
/// plan, and screens keep at least one genuinely ambiguous plan so grounding
/// stays a non-trivial problem.
fn validate_world(bench: &Benchmark) -> Result<()> {
    for screen in &bench.screens {
        if screen.elements.len() >= 2 {
            let cands = enumerate_plan_candidates(screen, None);
            if !cands.iter().any(|c| c.matches.len() >= 2) {
                return Err(Error::Benchmark(format!(
                    "screen {} has no ambiguous plan candidate; role pairing is broken",
                    screen.id
                )));
            }
        }
    }
    for task in &bench.tasks {
        for (si, step) in task.steps.iter().enumerate() {
            let screen = bench.screen(step.screen_id)?;
            let cands = enumerate_plan_candidates(screen, None);
            let unique = cands
                .iter()
                .any(|c| c.matches.len() == 1 && c.matches[0] == step.target);
            if !unique {
                return Err(Error::Benchmark(format!(
                    "task {} step {si}: target element {} on screen {} has no unambiguous \
                     plan candidate; label sets must uniquely identify each element",
                    task.id, step.target, step.screen_id
                )));
            }
        }
    }
    Ok(())
}
