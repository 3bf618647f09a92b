//! Per-user k-fold cross-validation with precision, recall and F-measure.
//!
//! Each evaluated user's reference list is shuffled with a seeded generator
//! and dealt round-robin into `k` folds. For fold `i` the held-out references
//! are removed from that user's profile, the similarity matrix is rebuilt on
//! the reduced profiles, and the recommendations are scored against the
//! held-out papers.
//!
//! Counts are summed over users inside a fold (micro average); the fold
//! precisions and recalls are then averaged, and the reported F-measure is
//! the harmonic mean of those two averages.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, PaperId, Profiles, UserId};
use crate::error::{Error, Result};
use crate::recommend::{CandidateStrategy, RecommendationParams, Recommender};
use crate::similarity::{build_matrix_from_profiles, SimilarityWeights};

pub const AGGREGATION: &str = "micro-average over users within a fold, arithmetic mean over folds";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub true_positive: u64,
    pub false_positive: u64,
    pub false_negative: u64,
}

impl ConfusionCounts {
    /// Scores a recommended list against the relevant set.
    pub fn from_lists<'a>(recommended: impl IntoIterator<Item = &'a str>, relevant: &BTreeSet<PaperId>) -> Self {
        let recommended: BTreeSet<&str> = recommended.into_iter().collect();
        let tp = recommended.iter().filter(|p| relevant.contains(**p)).count() as u64;
        ConfusionCounts {
            true_positive: tp,
            false_positive: recommended.len() as u64 - tp,
            false_negative: relevant.len() as u64 - tp,
        }
    }
}

impl std::ops::Add for ConfusionCounts {
    type Output = Self;

    fn add(self, rhs: Self) -> Self {
        ConfusionCounts {
            true_positive: self.true_positive + rhs.true_positive,
            false_positive: self.false_positive + rhs.false_positive,
            false_negative: self.false_negative + rhs.false_negative,
        }
    }
}

impl std::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), |a, b| a + b)
    }
}

/// TP / (TP + FP), 0 when nothing was retrieved.
pub fn precision(c: &ConfusionCounts) -> f64 {
    let retrieved = c.true_positive + c.false_positive;
    if retrieved == 0 {
        0.0
    } else {
        c.true_positive as f64 / retrieved as f64
    }
}

/// TP / (TP + FN), 0 when nothing was relevant.
pub fn recall(c: &ConfusionCounts) -> f64 {
    let relevant = c.true_positive + c.false_negative;
    if relevant == 0 {
        0.0
    } else {
        c.true_positive as f64 / relevant as f64
    }
}

pub fn f_measure(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One cross-validation round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub fold_index: usize,
    /// Remaining references of every evaluated user.
    pub training: BTreeMap<UserId, BTreeSet<PaperId>>,
    pub held_out: BTreeMap<UserId, BTreeSet<PaperId>>,
}

impl FoldSplit {
    /// Profiles with each evaluated user's reference set replaced by its
    /// training part. Users below the fold floor keep their full set.
    pub fn training_profiles(&self, profiles: &Profiles) -> Profiles {
        let mut out = profiles.clone();
        for (user, refs) in &self.training {
            if let Some(profile) = out.get_mut(user) {
                profile.reference_set = refs.clone();
            }
        }
        out
    }

    /// `(user, paper)` pairs where a held-out reference is still visible in
    /// the user's training profile.
    pub fn leaks(&self, training: &Profiles) -> Vec<(UserId, PaperId)> {
        let mut out = Vec::new();
        for (user, held) in &self.held_out {
            if let Some(profile) = training.get(user) {
                out.extend(
                    profile
                        .reference_set
                        .intersection(held)
                        .map(|p| (user.clone(), p.clone())),
                );
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: Vec<FoldSplit>,
    /// Users with fewer than `k` references.
    pub excluded: Vec<UserId>,
}

/// Splits every user's references into `k` disjoint folds. Deterministic for
/// a fixed seed.
pub fn k_fold_split(profiles: &Profiles, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::parameter(format!("need at least 2 folds, got {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<FoldSplit> = (0..k)
        .map(|fold_index| FoldSplit {
            fold_index,
            training: BTreeMap::new(),
            held_out: BTreeMap::new(),
        })
        .collect();
    let mut excluded = Vec::new();
    for (user, profile) in profiles {
        if profile.reference_set.len() < k {
            excluded.push(user.clone());
            continue;
        }
        let mut refs: Vec<&PaperId> = profile.reference_set.iter().collect();
        refs.shuffle(&mut rng);
        let mut parts = vec![BTreeSet::new(); k];
        for (position, paper) in refs.into_iter().enumerate() {
            parts[position % k].insert(paper.clone());
        }
        for (fold, held) in folds.iter_mut().zip(parts) {
            let train = profile.reference_set.difference(&held).cloned().collect();
            fold.training.insert(user.clone(), train);
            fold.held_out.insert(user.clone(), held);
        }
    }
    Ok(FoldPlan { folds, excluded })
}

/// What produces the list that gets scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecommenderMode {
    #[default]
    Majority,
    /// Emits each user's held-out set verbatim; an upper bound check.
    HeldOutOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub weights: SimilarityWeights,
    /// `top_n` is ignored; the sweep supplies it.
    pub params: RecommendationParams,
    pub candidates: CandidateStrategy,
    pub top_n_sweep: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub mode: RecommenderMode,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            weights: SimilarityWeights::equal(),
            params: RecommendationParams::default(),
            candidates: CandidateStrategy::Neighbors,
            top_n_sweep: vec![5, 10, 20],
            folds: 10,
            seed: 0,
            mode: RecommenderMode::Majority,
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::parameter(format!("need at least 2 folds, got {}", self.folds)));
        }
        validate_sweep(&self.top_n_sweep)?;
        self.params.with_top_n(1).validate()
    }
}

pub fn validate_sweep(sweep: &[usize]) -> Result<()> {
    if sweep.is_empty() {
        return Err(Error::parameter("top-n sweep is empty"));
    }
    if sweep[0] == 0 || sweep.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::parameter(format!("top-n sweep must be positive and strictly increasing: {sweep:?}")));
    }
    Ok(())
}

/// Per-user confusion counts for one fold, one entry per sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldOutcome {
    pub fold_index: usize,
    pub per_user: BTreeMap<UserId, Vec<ConfusionCounts>>,
}

pub fn evaluate_fold(corpus: &Corpus, split: &FoldSplit, config: &EvaluationConfig) -> Result<FoldOutcome> {
    let training = split.training_profiles(corpus.users());
    let matrix = build_matrix_from_profiles(&training, &config.weights)?;
    let recommender = Recommender::new(corpus.papers(), &training, &matrix)?;
    let catalog: BTreeSet<&str> = match &config.candidates {
        CandidateStrategy::Neighbors => BTreeSet::new(),
        CandidateStrategy::FullCorpus => corpus.papers().keys().map(String::as_str).collect(),
        CandidateStrategy::Explicit(ids) => ids.iter().map(String::as_str).collect(),
    };

    let per_user = split
        .held_out
        .par_iter()
        .map(|(user, held)| -> Result<(UserId, Vec<ConfusionCounts>)> {
            if config.mode == RecommenderMode::HeldOutOracle {
                let counts = ConfusionCounts::from_lists(held.iter().map(String::as_str), held);
                return Ok((user.clone(), vec![counts; config.top_n_sweep.len()]));
            }
            let profile = recommender.profile(user)?;
            let ranked = matrix.ranked_neighbors(user)?;
            let counts = config
                .top_n_sweep
                .iter()
                .map(|&n| {
                    let neighbors = &ranked[..n.min(ranked.len())];
                    let params = config.params.with_top_n(n);
                    let pool = match config.candidates {
                        CandidateStrategy::Neighbors => None,
                        _ => Some(&catalog),
                    };
                    let recs = recommender.recommend_among(profile, neighbors, pool, &params);
                    ConfusionCounts::from_lists(recs.iter().map(|r| r.paper_id.as_str()), held)
                })
                .collect();
            Ok((user.clone(), counts))
        })
        .collect::<Result<BTreeMap<_, _>>>()?;

    Ok(FoldOutcome {
        fold_index: split.fold_index,
        per_user,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldRow {
    pub fold: usize,
    pub top_n: usize,
    pub counts: ConfusionCounts,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub top_n: usize,
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub weights: SimilarityWeights,
    pub min_threshold_pct: f64,
    pub max_recommendations: Option<usize>,
    /// `threshold-cut` or `capped:<n>`.
    pub list_policy: String,
    pub candidates: String,
    pub mode: RecommenderMode,
    pub top_n_sweep: Vec<usize>,
    pub folds: usize,
    pub seed: u64,
    pub corpus_digest: String,
    pub corpus_papers: usize,
    pub corpus_users: usize,
    pub aggregation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub metadata: RunMetadata,
    pub evaluated_users: usize,
    pub excluded_users: Vec<UserId>,
    pub folds: Vec<FoldRow>,
    pub summary: Vec<SweepRow>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn evaluate(corpus: &Corpus, config: &EvaluationConfig) -> Result<EvaluationReport> {
    config.validate()?;
    let plan = k_fold_split(corpus.users(), config.folds, config.seed)?;
    let evaluated = corpus.users().len() - plan.excluded.len();
    if evaluated == 0 {
        return Err(Error::Infeasible(format!(
            "no user has at least {} references",
            config.folds
        )));
    }

    let outcomes = plan
        .folds
        .par_iter()
        .map(|split| evaluate_fold(corpus, split, config))
        .collect::<Result<Vec<_>>>()?;

    let mut fold_rows = Vec::new();
    for outcome in &outcomes {
        for (point, &top_n) in config.top_n_sweep.iter().enumerate() {
            let counts: ConfusionCounts = outcome.per_user.values().map(|c| c[point]).sum();
            let (p, r) = (precision(&counts), recall(&counts));
            fold_rows.push(FoldRow {
                fold: outcome.fold_index,
                top_n,
                counts,
                precision: p,
                recall: r,
                f_measure: f_measure(p, r),
            });
        }
    }

    let summary = config
        .top_n_sweep
        .iter()
        .map(|&top_n| {
            let rows: Vec<&FoldRow> = fold_rows.iter().filter(|r| r.top_n == top_n).collect();
            let p = rows.iter().map(|r| r.precision).sum::<f64>() / rows.len() as f64;
            let r = rows.iter().map(|r| r.recall).sum::<f64>() / rows.len() as f64;
            SweepRow {
                top_n,
                precision: p,
                recall: r,
                f_measure: f_measure(p, r),
            }
        })
        .collect();

    Ok(EvaluationReport {
        metadata: RunMetadata {
            weights: config.weights,
            min_threshold_pct: config.params.min_threshold_pct,
            max_recommendations: config.params.max_recommendations,
            list_policy: match config.params.max_recommendations {
                Some(cap) => format!("capped:{cap}"),
                None => "threshold-cut".into(),
            },
            candidates: config.candidates.to_string(),
            mode: config.mode,
            top_n_sweep: config.top_n_sweep.clone(),
            folds: config.folds,
            seed: config.seed,
            corpus_digest: corpus.digest(),
            corpus_papers: corpus.papers().len(),
            corpus_users: corpus.users().len(),
            aggregation: AGGREGATION.into(),
        },
        evaluated_users: evaluated,
        excluded_users: plan.excluded,
        folds: fold_rows,
        summary,
    })
}

/// `top_n,precision,recall,f_measure`, ascending by `top_n`.
pub fn write_sweep_csv<W: Write>(report: &EvaluationReport, out: W) -> Result<()> {
    let mut rows: Vec<&SweepRow> = report.summary.iter().collect();
    rows.sort_by_key(|r| r.top_n);
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(["top_n", "precision", "recall", "f_measure"])?;
    for r in rows {
        writer.write_record([
            r.top_n.to_string(),
            r.precision.to_string(),
            r.recall.to_string(),
            r.f_measure.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_sweep_csv(report: &EvaluationReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_sweep_csv(report, &mut out)?;
    out.flush()?;
    Ok(())
}

pub fn emit_report_json(report: &EvaluationReport, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(report.to_json()?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}
