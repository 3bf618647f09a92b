//! Independent reference computations used by the integration tests.
//!
//! Nothing here calls into the similarity or recommendation code paths it
//! is compared against; only plain data types are shared.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use paperrec::synthetic::{self, SyntheticConfig};
use paperrec::{Corpus, Profiles, SimilarityWeights, UserProfile};

pub fn brute_jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.union(b).count();
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Direct weighted-mean substitution over the four components.
pub fn brute_ensemble(u: &UserProfile, v: &UserProfile, w: &SimilarityWeights) -> f64 {
    let (a, b, g, m) = (w.alpha(), w.beta(), w.gamma(), w.mu());
    let key = brute_jaccard(&u.keyword_set, &v.keyword_set);
    let reference = brute_jaccard(&u.reference_set, &v.reference_set);
    let coauthor = brute_jaccard(&u.coauthor_set, &v.coauthor_set);
    let citation = brute_jaccard(&u.citation_set, &v.citation_set);
    (a * key + b * reference + g * coauthor + m * citation) / (a + b + g + m)
}

/// All pairwise scores keyed by ordered `(u, v)` with `u < v`.
pub fn brute_matrix(profiles: &Profiles, w: &SimilarityWeights) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    for (u, pu) in profiles {
        for (v, pv) in profiles {
            if u < v {
                out.insert((u.clone(), v.clone()), brute_ensemble(pu, pv, w));
            }
        }
    }
    out
}

fn brute_top_n(profiles: &Profiles, w: &SimilarityWeights, target: &str, n: usize) -> Vec<String> {
    let mut others: Vec<(String, f64)> = profiles
        .iter()
        .filter(|(id, _)| id.as_str() != target)
        .map(|(id, p)| (id.clone(), brute_ensemble(&profiles[target], p, w)))
        .collect();
    // Selection by repeated max scan, highest score first, lowest id on ties.
    let mut chosen = Vec::new();
    while chosen.len() < n && !others.is_empty() {
        let mut best = 0;
        for i in 1..others.len() {
            let (ref id, s) = others[i];
            let (ref bid, bs) = others[best];
            if s > bs || (s == bs && id < bid) {
                best = i;
            }
        }
        chosen.push(others.remove(best).0);
    }
    chosen
}

/// Nested-loop transliteration of the majority-vote algorithm: papers
/// outermost, then target users, then every candidate neighbor `v`, counting
/// `v` when it is among the target's top-N and references the paper.
/// Returns, per user, `(paper, count)` in output order.
pub fn algorithm_one(
    profiles: &Profiles,
    w: &SimilarityWeights,
    paper_list: &[String],
    top_n: usize,
    threshold: f64,
) -> BTreeMap<String, Vec<(String, usize)>> {
    let users: Vec<&String> = profiles.keys().collect();
    let top: BTreeMap<&String, Vec<String>> = users
        .iter()
        .map(|u| (*u, brute_top_n(profiles, w, u, top_n)))
        .collect();
    let mut recommended: BTreeMap<String, Vec<(String, usize)>> =
        users.iter().map(|u| (u.to_string(), Vec::new())).collect();

    for paper in paper_list {
        for u in &users {
            let target = &profiles[*u];
            if target.authored_papers.contains(paper) || target.reference_set.contains(paper) {
                continue;
            }
            let mut count = 0;
            for v in &users {
                if top[u].contains(v) && profiles[*v].reference_set.contains(paper) {
                    count += 1;
                }
            }
            let majority = (count * 100) as f64 / top[u].len() as f64;
            if majority >= threshold {
                recommended.get_mut(*u).unwrap().push((paper.clone(), count));
            }
        }
    }
    for list in recommended.values_mut() {
        list.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        list.dedup();
    }
    recommended
}

/// Small randomized corpus: at most 20 users and 50 papers.
pub fn small_corpus(seed: u64) -> Corpus {
    let users = 4 + (seed as usize * 7) % 17;
    let papers = 15 + (seed as usize * 13) % 36;
    synthetic::generate(&SyntheticConfig {
        users,
        communities: 1 + (seed as usize) % 4,
        papers,
        authors_per_paper: 1 + (seed as usize) % 3,
        keywords_per_paper: 3,
        keywords_per_community: 8,
        references_per_paper: 2 + (seed as usize) % 5,
        cohesion: 0.8,
        popularity_skew: 2.0,
        seed,
    })
    .unwrap()
}
