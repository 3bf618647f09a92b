//! Jaccard similarities between users, their weighted ensemble and the
//! user x user score matrix.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Profiles, UserId, UserProfile};
use crate::error::{Error, Result};

/// `|a ∩ b| / |a ∪ b|`, with `jaccard(∅, ∅) = 0`.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let common = small.iter().filter(|x| large.contains(x)).count();
    ratio(common, a.len() + b.len() - common)
}

/// Same as [`jaccard`] over strictly increasing slices.
pub fn jaccard_sorted(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    ratio(common, a.len() + b.len() - common)
}

#[inline]
fn ratio(common: usize, union: usize) -> f64 {
    if union == 0 {
        0.0
    } else {
        common as f64 / union as f64
    }
}

pub fn sim_keyword(u: &UserProfile, v: &UserProfile) -> f64 {
    jaccard(&u.keyword_set, &v.keyword_set)
}

pub fn sim_coauthor(u: &UserProfile, v: &UserProfile) -> f64 {
    jaccard(&u.coauthor_set, &v.coauthor_set)
}

pub fn sim_citation(u: &UserProfile, v: &UserProfile) -> f64 {
    jaccard(&u.citation_set, &v.citation_set)
}

pub fn sim_reference(u: &UserProfile, v: &UserProfile) -> f64 {
    jaccard(&u.reference_set, &v.reference_set)
}

/// Ensemble weights for the keyword, reference, co-author and citation
/// similarities. Always normalized to sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityWeights {
    alpha: f64,
    beta: f64,
    gamma: f64,
    mu: f64,
}

impl SimilarityWeights {
    /// Takes raw non-negative weights and rescales them to sum to one.
    pub fn new(alpha: f64, beta: f64, gamma: f64, mu: f64) -> Result<Self> {
        let raw = [alpha, beta, gamma, mu];
        if raw.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::parameter(format!(
                "weights must be finite and non-negative, got {alpha},{beta},{gamma},{mu}"
            )));
        }
        let total = alpha + beta + gamma + mu;
        if total <= 0.0 || !total.is_finite() {
            return Err(Error::parameter("weights must have a positive finite sum"));
        }
        Ok(SimilarityWeights {
            alpha: alpha / total,
            beta: beta / total,
            gamma: gamma / total,
            mu: mu / total,
        })
    }

    pub fn equal() -> Self {
        SimilarityWeights {
            alpha: 0.25,
            beta: 0.25,
            gamma: 0.25,
            mu: 0.25,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn beta(&self) -> f64 {
        self.beta
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Weighted mean of the four component scores. The weight sum is divided
    /// out even though it is one after normalization.
    pub fn combine(&self, key: f64, reference: f64, coauthor: f64, citation: f64) -> f64 {
        let numerator = self.alpha * key + self.beta * reference + self.gamma * coauthor + self.mu * citation;
        numerator / (self.alpha + self.beta + self.gamma + self.mu)
    }
}

impl Default for SimilarityWeights {
    fn default() -> Self {
        Self::equal()
    }
}

impl fmt::Display for SimilarityWeights {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},{}", self.alpha, self.beta, self.gamma, self.mu)
    }
}

/// Parses `alpha,beta,gamma,mu`.
impl FromStr for SimilarityWeights {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::parameter(format!("bad weight list `{s}`: {e}")))?;
        match parts[..] {
            [a, b, g, m] => SimilarityWeights::new(a, b, g, m),
            _ => Err(Error::parameter(format!("expected four comma-separated weights, got `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityBreakdown {
    pub sim_key: f64,
    pub sim_ref: f64,
    pub sim_coauth: f64,
    pub sim_cit: f64,
    pub sim_final: f64,
}

impl SimilarityBreakdown {
    pub fn from_components(weights: &SimilarityWeights, sim_key: f64, sim_ref: f64, sim_coauth: f64, sim_cit: f64) -> Self {
        SimilarityBreakdown {
            sim_key,
            sim_ref,
            sim_coauth,
            sim_cit,
            sim_final: weights.combine(sim_key, sim_ref, sim_coauth, sim_cit),
        }
    }
}

pub fn ensemble_sim(u: &UserProfile, v: &UserProfile, weights: &SimilarityWeights) -> SimilarityBreakdown {
    SimilarityBreakdown::from_components(
        weights,
        sim_keyword(u, v),
        sim_reference(u, v),
        sim_coauthor(u, v),
        sim_citation(u, v),
    )
}

/// Profiles with every feature interned to a sorted `u32` list, so pair
/// scoring is a linear merge instead of string-set lookups.
struct FeatureIndex {
    keywords: Vec<Vec<u32>>,
    references: Vec<Vec<u32>>,
    coauthors: Vec<Vec<u32>>,
    citations: Vec<Vec<u32>>,
}

impl FeatureIndex {
    fn build<'a>(profiles: impl Iterator<Item = &'a UserProfile> + Clone) -> Self {
        fn intern<'a>(sets: impl Iterator<Item = &'a BTreeSet<String>>) -> Vec<Vec<u32>> {
            let mut ids: HashMap<&'a str, u32> = HashMap::new();
            sets.map(|set| {
                let mut row: Vec<u32> = set
                    .iter()
                    .map(|item| {
                        let next = ids.len() as u32;
                        *ids.entry(item.as_str()).or_insert(next)
                    })
                    .collect();
                row.sort_unstable();
                row
            })
            .collect()
        }
        FeatureIndex {
            keywords: intern(profiles.clone().map(|p| &p.keyword_set)),
            references: intern(profiles.clone().map(|p| &p.reference_set)),
            coauthors: intern(profiles.clone().map(|p| &p.coauthor_set)),
            citations: intern(profiles.map(|p| &p.citation_set)),
        }
    }

    fn score(&self, i: usize, j: usize, weights: &SimilarityWeights) -> f64 {
        weights.combine(
            jaccard_sorted(&self.keywords[i], &self.keywords[j]),
            jaccard_sorted(&self.references[i], &self.references[j]),
            jaccard_sorted(&self.coauthors[i], &self.coauthors[j]),
            jaccard_sorted(&self.citations[i], &self.citations[j]),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub user_id: UserId,
    pub score: f64,
}

/// Symmetric ensemble scores for every unordered user pair. Only the strict
/// upper triangle is stored; the diagonal does not exist.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    users: Vec<UserId>,
    scores: Vec<f64>,
}

impl SimilarityMatrix {
    /// Builds a matrix from explicit pair scores. Every unordered pair of
    /// distinct users must be given, once or twice with equal values.
    pub fn from_pairs<S: AsRef<str>>(users: &[S], pairs: &[(S, S, f64)]) -> Result<Self> {
        let mut ids: Vec<UserId> = users.iter().map(|u| u.as_ref().to_string()).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != users.len() {
            return Err(Error::parameter("duplicate user id in matrix index"));
        }
        if ids.len() < 2 {
            return Err(Error::TooSmall(format!("need at least 2 users, got {}", ids.len())));
        }
        let n = ids.len();
        let mut scores = vec![f64::NAN; n * (n - 1) / 2];
        let lookup = |id: &str| ids.binary_search_by(|u| u.as_str().cmp(id)).map_err(|_| Error::UnknownUser(id.to_string()));
        for (a, b, score) in pairs {
            let (i, j) = (lookup(a.as_ref())?, lookup(b.as_ref())?);
            if i == j {
                return Err(Error::parameter(format!("self pair for `{}`", a.as_ref())));
            }
            if !(0.0..=1.0).contains(score) {
                return Err(Error::parameter(format!("score {score} outside [0,1]")));
            }
            let slot = &mut scores[triangle_offset(n, i.min(j), i.max(j))];
            if !slot.is_nan() && *slot != *score {
                return Err(Error::parameter(format!("conflicting scores for ({}, {})", a.as_ref(), b.as_ref())));
            }
            *slot = *score;
        }
        if scores.iter().any(|s| s.is_nan()) {
            return Err(Error::parameter("missing score for at least one user pair"));
        }
        Ok(SimilarityMatrix { users: ids, scores })
    }

    /// User ids in index order (ascending).
    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn len(&self) -> usize {
        self.users.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty()
    }

    pub fn index_of(&self, user: &str) -> Result<usize> {
        self.users
            .binary_search_by(|u| u.as_str().cmp(user))
            .map_err(|_| Error::UnknownUser(user.to_string()))
    }

    /// Score between two distinct users; `None` for the diagonal.
    pub fn score(&self, a: usize, b: usize) -> Option<f64> {
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Less => Some(self.scores[triangle_offset(self.len(), a, b)]),
            std::cmp::Ordering::Greater => Some(self.scores[triangle_offset(self.len(), b, a)]),
        }
    }

    pub fn score_between(&self, a: &str, b: &str) -> Result<Option<f64>> {
        Ok(self.score(self.index_of(a)?, self.index_of(b)?))
    }

    /// Raw upper-triangle storage, row-major.
    pub fn raw_scores(&self) -> &[f64] {
        &self.scores
    }

    /// Every other user, by descending score then ascending id.
    pub fn ranked_neighbors(&self, target: &str) -> Result<Vec<Neighbor>> {
        let t = self.index_of(target)?;
        let mut ranked: Vec<(usize, f64)> = (0..self.len())
            .filter(|&j| j != t)
            .map(|j| (j, self.score(t, j).unwrap()))
            .collect();
        // Indices follow id order, so index order is id order.
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        Ok(ranked
            .into_iter()
            .map(|(j, score)| Neighbor {
                user_id: self.users[j].clone(),
                score,
            })
            .collect())
    }

    /// The `n` most similar other users. Returns all of them when fewer than
    /// `n` exist.
    pub fn top_n_neighbors(&self, target: &str, n: usize) -> Result<Vec<Neighbor>> {
        if n == 0 {
            return Err(Error::parameter("top-n must be at least 1"));
        }
        let mut ranked = self.ranked_neighbors(target)?;
        ranked.truncate(n);
        Ok(ranked)
    }
}

#[inline]
fn triangle_offset(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub fn top_n_neighbors(matrix: &SimilarityMatrix, target: &str, n: usize) -> Result<Vec<Neighbor>> {
    matrix.top_n_neighbors(target, n)
}

pub fn build_matrix(corpus: &Corpus, weights: &SimilarityWeights) -> Result<SimilarityMatrix> {
    build_matrix_from_profiles(corpus.users(), weights)
}

/// Scores every unordered pair in parallel. Each entry depends only on its
/// two profiles, so the result matches [`build_matrix_sequential`] bit for bit.
pub fn build_matrix_from_profiles(profiles: &Profiles, weights: &SimilarityWeights) -> Result<SimilarityMatrix> {
    build(profiles, weights, true)
}

pub fn build_matrix_sequential(profiles: &Profiles, weights: &SimilarityWeights) -> Result<SimilarityMatrix> {
    build(profiles, weights, false)
}

fn build(profiles: &Profiles, weights: &SimilarityWeights, parallel: bool) -> Result<SimilarityMatrix> {
    let n = profiles.len();
    if n < 2 {
        return Err(Error::TooSmall(format!("need at least 2 users, got {n}")));
    }
    let index = FeatureIndex::build(profiles.values());
    let row = |i: usize| -> Vec<f64> { (i + 1..n).map(|j| index.score(i, j, weights)).collect() };
    let rows: Vec<Vec<f64>> = if parallel {
        (0..n).into_par_iter().map(row).collect()
    } else {
        (0..n).map(row).collect()
    };
    Ok(SimilarityMatrix {
        users: profiles.keys().cloned().collect(),
        scores: rows.concat(),
    })
}

#[derive(Serialize)]
struct PairRow<'a> {
    user_a: &'a str,
    user_b: &'a str,
    sim_key: f64,
    sim_ref: f64,
    sim_coauth: f64,
    sim_cit: f64,
    sim_final: f64,
}

/// One CSV row per unordered pair, sorted by `(user_a, user_b)`.
pub fn write_pairs_csv<W: Write>(profiles: &Profiles, weights: &SimilarityWeights, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    let users: Vec<&UserProfile> = profiles.values().collect();
    if users.len() < 2 {
        writer.write_record(["user_a", "user_b", "sim_key", "sim_ref", "sim_coauth", "sim_cit", "sim_final"])?;
    }
    for (i, u) in users.iter().enumerate() {
        for v in &users[i + 1..] {
            let b = ensemble_sim(u, v, weights);
            writer.serialize(PairRow {
                user_a: &u.user_id,
                user_b: &v.user_id,
                sim_key: b.sim_key,
                sim_ref: b.sim_ref,
                sim_coauth: b.sim_coauth,
                sim_cit: b.sim_cit,
                sim_final: b.sim_final,
            })?;
        }
    }
    writer.flush()?;
    Ok(())
}
