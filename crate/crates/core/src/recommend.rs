//! Majority-vote paper recommendation over a user's top-N neighbors.
//!
//! For every candidate paper the recommender counts how many of the target's
//! neighbors reference it. `count * 100 / neighbors` is the majority
//! percentage; papers at or above the threshold are returned, most supported
//! first, ties by ascending paper id.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PaperId, PaperRecord, Profiles, UserProfile};
use crate::error::{Error, Result};
use crate::similarity::{Neighbor, SimilarityMatrix};

pub const DEFAULT_THRESHOLD_PCT: f64 = 30.0;
pub const DEFAULT_TOP_N: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationParams {
    pub top_n: usize,
    pub min_threshold_pct: f64,
    pub max_recommendations: Option<usize>,
}

impl RecommendationParams {
    pub fn new(top_n: usize, min_threshold_pct: f64, max_recommendations: Option<usize>) -> Result<Self> {
        let params = RecommendationParams {
            top_n,
            min_threshold_pct,
            max_recommendations,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.top_n == 0 {
            return Err(Error::parameter("top-n must be at least 1"));
        }
        if !(0.0..=100.0).contains(&self.min_threshold_pct) {
            return Err(Error::parameter(format!(
                "threshold must lie in [0, 100], got {}",
                self.min_threshold_pct
            )));
        }
        Ok(())
    }

    pub fn with_top_n(&self, top_n: usize) -> Self {
        RecommendationParams { top_n, ..self.clone() }
    }
}

impl Default for RecommendationParams {
    fn default() -> Self {
        RecommendationParams {
            top_n: DEFAULT_TOP_N,
            min_threshold_pct: DEFAULT_THRESHOLD_PCT,
            max_recommendations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub paper_id: PaperId,
    pub supporter_count: usize,
    pub majority_pct: f64,
}

/// Where candidate papers come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateStrategy {
    /// Everything the top-N neighbors reference.
    Neighbors,
    /// Every paper in the corpus.
    FullCorpus,
    Explicit(Vec<PaperId>),
}

impl fmt::Display for CandidateStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CandidateStrategy::Neighbors => f.write_str("neighbors"),
            CandidateStrategy::FullCorpus => f.write_str("corpus"),
            CandidateStrategy::Explicit(ids) => write!(f, "explicit({} papers)", ids.len()),
        }
    }
}

/// Accepts `neighbors` and `corpus`. Explicit lists are built by the caller.
impl FromStr for CandidateStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "neighbors" => Ok(CandidateStrategy::Neighbors),
            "corpus" => Ok(CandidateStrategy::FullCorpus),
            other => Err(Error::parameter(format!("unknown candidate strategy `{other}`"))),
        }
    }
}

/// Papers a user can never be recommended: their own and those they
/// already reference.
pub fn is_excluded(target: &UserProfile, paper: &str) -> bool {
    target.authored_papers.contains(paper) || target.reference_set.contains(paper)
}

/// Read-only view over the frozen inputs of a recommendation run.
#[derive(Debug, Clone, Copy)]
pub struct Recommender<'a> {
    catalog: &'a BTreeMap<PaperId, PaperRecord>,
    profiles: &'a Profiles,
    matrix: &'a SimilarityMatrix,
}

impl<'a> Recommender<'a> {
    /// `profiles` must cover exactly the users indexed by `matrix`.
    pub fn new(
        catalog: &'a BTreeMap<PaperId, PaperRecord>,
        profiles: &'a Profiles,
        matrix: &'a SimilarityMatrix,
    ) -> Result<Self> {
        if profiles.len() != matrix.len() || !profiles.keys().eq(matrix.users().iter()) {
            return Err(Error::parameter("similarity matrix does not match the user profiles"));
        }
        Ok(Recommender {
            catalog,
            profiles,
            matrix,
        })
    }

    pub fn for_corpus(corpus: &'a Corpus, matrix: &'a SimilarityMatrix) -> Result<Self> {
        Self::new(corpus.papers(), corpus.users(), matrix)
    }

    pub fn profile(&self, user: &str) -> Result<&'a UserProfile> {
        self.profiles
            .get(user)
            .ok_or_else(|| Error::UnknownUser(user.to_string()))
    }

    pub fn neighbors(&self, target: &str, top_n: usize) -> Result<Vec<Neighbor>> {
        self.matrix.top_n_neighbors(target, top_n)
    }

    pub fn candidate_pool(&self, target: &str, top_n: usize, strategy: &CandidateStrategy) -> Result<Vec<PaperId>> {
        let profile = self.profile(target)?;
        let pool: BTreeSet<&str> = match strategy {
            CandidateStrategy::Neighbors => self.neighbor_pool(&self.neighbors(target, top_n)?),
            CandidateStrategy::FullCorpus => self.catalog.keys().map(String::as_str).collect(),
            CandidateStrategy::Explicit(ids) => ids.iter().map(String::as_str).collect(),
        };
        Ok(pool
            .into_iter()
            .filter(|p| !is_excluded(profile, p))
            .map(str::to_string)
            .collect())
    }

    /// Union of the neighbors' reference sets.
    pub(crate) fn neighbor_pool(&self, neighbors: &[Neighbor]) -> BTreeSet<&'a str> {
        neighbors
            .iter()
            .flat_map(|n| self.profiles[&n.user_id].reference_set.iter())
            .map(String::as_str)
            .collect()
    }

    pub fn recommend(&self, target: &str, candidates: &[PaperId], params: &RecommendationParams) -> Result<Vec<Recommendation>> {
        params.validate()?;
        if candidates.is_empty() {
            return Err(Error::parameter("candidate list is empty"));
        }
        let profile = self.profile(target)?;
        let neighbors = self.neighbors(target, params.top_n)?;
        let candidates: BTreeSet<&str> = candidates.iter().map(String::as_str).collect();
        Ok(self.recommend_among(profile, &neighbors, Some(&candidates), params))
    }

    /// Counts support for `candidates` among an already selected neighbor
    /// list; `None` means every paper the neighbors reference. The
    /// denominator is the actual number of neighbors, which is smaller than
    /// `top_n` only on corpora with fewer users.
    pub(crate) fn recommend_among(
        &self,
        target: &UserProfile,
        neighbors: &[Neighbor],
        candidates: Option<&BTreeSet<&str>>,
        params: &RecommendationParams,
    ) -> Vec<Recommendation> {
        let denominator = neighbors.len();
        if denominator == 0 {
            return Vec::new();
        }
        let mut counts: HashMap<&str, usize> = match candidates {
            Some(set) => set.iter().filter(|p| !is_excluded(target, p)).map(|p| (*p, 0)).collect(),
            None => HashMap::new(),
        };
        for neighbor in neighbors {
            for paper in &self.profiles[&neighbor.user_id].reference_set {
                match counts.get_mut(paper.as_str()) {
                    Some(count) => *count += 1,
                    None if candidates.is_none() && !is_excluded(target, paper) => {
                        counts.insert(paper.as_str(), 1);
                    }
                    None => {}
                }
            }
        }
        let mut out: Vec<Recommendation> = counts
            .into_iter()
            .filter_map(|(paper, count)| {
                let majority_pct = (count * 100) as f64 / denominator as f64;
                (majority_pct >= params.min_threshold_pct).then(|| Recommendation {
                    paper_id: paper.to_string(),
                    supporter_count: count,
                    majority_pct,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            b.supporter_count
                .cmp(&a.supporter_count)
                .then_with(|| a.paper_id.cmp(&b.paper_id))
        });
        if let Some(cap) = params.max_recommendations {
            out.truncate(cap);
        }
        out
    }
}

pub fn candidate_pool(
    corpus: &Corpus,
    matrix: &SimilarityMatrix,
    target: &str,
    top_n: usize,
    strategy: &CandidateStrategy,
) -> Result<Vec<PaperId>> {
    Recommender::for_corpus(corpus, matrix)?.candidate_pool(target, top_n, strategy)
}

pub fn recommend(
    corpus: &Corpus,
    matrix: &SimilarityMatrix,
    target: &str,
    candidates: &[PaperId],
    params: &RecommendationParams,
) -> Result<Vec<Recommendation>> {
    Recommender::for_corpus(corpus, matrix)?.recommend(target, candidates, params)
}

pub fn write_recommendations_json<W: Write>(recs: &[Recommendation], out: W) -> Result<()> {
    serde_json::to_writer_pretty(out, recs)?;
    Ok(())
}

pub fn write_recommendations_csv<W: Write>(recs: &[Recommendation], out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["paper_id", "supporter_count", "majority_pct"])?;
    for r in recs {
        writer.write_record([r.paper_id.clone(), r.supporter_count.to_string(), r.majority_pct.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}
