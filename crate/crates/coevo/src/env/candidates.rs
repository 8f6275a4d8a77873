//! Plan-candidate enumeration.
//!
//! A plan is a token set describing the intended element at one of three
//! specificity levels: role only, role plus first label, or the full
//! attribute set. Planners pick among candidates; grounders resolve a
//! candidate's tokens back to a concrete element. Coarse candidates can match
//! several elements — that ambiguity is what makes grounding rewarding.

use crate::env::Screen;

/// One plan option: its tokens and the ids of every element it matches,
/// ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanCandidate {
    pub tokens: Vec<String>,
    pub matches: Vec<u32>,
}

/// Enumerate plan candidates for a screen in a fixed order: elements by id,
/// and per element the three specificity levels from coarse to full, with
/// consecutive duplicates collapsed (an unlabeled element contributes one
/// candidate, not three).
///
/// With `target_hint`, candidates matching the hinted element are moved to
/// the front (stable within both partitions); nothing is dropped.
pub fn enumerate_plan_candidates(screen: &Screen, target_hint: Option<u32>) -> Vec<PlanCandidate> {
    let mut out = Vec::new();
    for el in &screen.elements {
        let mut levels: Vec<Vec<String>> = vec![vec![el.role().to_string()]];
        if let Some(first_label) = el.labels().first() {
            levels.push(vec![el.role().to_string(), first_label.clone()]);
        }
        levels.push(el.attrs.clone());
        let mut prev: Option<&Vec<String>> = None;
        for level in &levels {
            if prev == Some(level) {
                continue;
            }
            let matches: Vec<u32> = screen
                .elements
                .iter()
                .filter(|e| e.has_attrs(level))
                .map(|e| e.id)
                .collect();
            out.push(PlanCandidate {
                tokens: level.clone(),
                matches,
            });
            prev = Some(level);
        }
    }
    if let Some(hint) = target_hint {
        let (hit, miss): (Vec<_>, Vec<_>) = out
            .into_iter()
            .partition(|c| c.matches.contains(&hint));
        out = hit;
        out.extend(miss);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{ActionType, BBox, Element};

    fn strs(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn labeled_screen() -> Screen {
        let mk = |id: u32, attrs: &[&str]| Element {
            id,
            bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
            attrs: strs(attrs),
            affordances: vec![ActionType::Click],
        };
        Screen {
            id: 0,
            elements: vec![
                mk(0, &["button", "search", "submit"]),
                mk(1, &["button", "cancel", "search"]),
                mk(2, &["input", "city", "name"]),
            ],
        }
    }

    #[test]
    fn three_levels_per_labeled_element_in_order() {
        let cands = enumerate_plan_candidates(&labeled_screen(), None);
        assert_eq!(cands.len(), 9);
        assert_eq!(cands[0].tokens, strs(&["button"]));
        assert_eq!(cands[1].tokens, strs(&["button", "search"]));
        assert_eq!(cands[2].tokens, strs(&["button", "search", "submit"]));
        assert_eq!(cands[3].tokens, strs(&["button"]));
        assert_eq!(cands[6].tokens, strs(&["input"]));
    }

    #[test]
    fn match_sets_reflect_attribute_containment() {
        let cands = enumerate_plan_candidates(&labeled_screen(), None);
        // role-only "button" matches both buttons
        assert_eq!(cands[0].matches, vec![0, 1]);
        // "button search" also matches both (element 1 carries "search" too)
        assert_eq!(cands[1].matches, vec![0, 1]);
        // full attrs are unique
        assert_eq!(cands[2].matches, vec![0]);
        assert_eq!(cands[5].matches, vec![1]);
        // unrelated role matches only its element
        assert_eq!(cands[6].matches, vec![2]);
    }

    #[test]
    fn unlabeled_elements_collapse_duplicate_levels() {
        let screen = Screen {
            id: 0,
            elements: vec![Element {
                id: 0,
                bbox: BBox::new(0.0, 0.0, 1.0, 1.0),
                attrs: strs(&["button"]),
                affordances: vec![ActionType::Click],
            }],
        };
        let cands = enumerate_plan_candidates(&screen, None);
        assert_eq!(cands.len(), 1);
        assert_eq!(cands[0].tokens, strs(&["button"]));
    }

    #[test]
    fn enumeration_is_deterministic() {
        let a = enumerate_plan_candidates(&labeled_screen(), None);
        let b = enumerate_plan_candidates(&labeled_screen(), None);
        assert_eq!(a, b);
    }

    #[test]
    fn hint_front_loads_matching_candidates_without_dropping_any() {
        let all = enumerate_plan_candidates(&labeled_screen(), None);
        let hinted = enumerate_plan_candidates(&labeled_screen(), Some(2));
        assert_eq!(hinted.len(), all.len());
        assert!(hinted[0].matches.contains(&2));
        assert!(hinted[1].matches.contains(&2));
        let mut a = all;
        let mut h = hinted;
        a.sort_by(|x, y| x.tokens.cmp(&y.tokens));
        h.sort_by(|x, y| x.tokens.cmp(&y.tokens));
        assert_eq!(a, h);
    }
}
