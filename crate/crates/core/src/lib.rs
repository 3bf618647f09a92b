//! User-based collaborative filtering for research-paper recommendation.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`corpus`] parses JSON-lines paper metadata and aggregates one
//!    [`UserProfile`] per author (keywords, co-authors, citations, references).
//! 2. [`similarity`] scores every user pair with four Jaccard kernels, blends
//!    them into a weighted ensemble score and answers top-N neighbor queries.
//! 3. [`recommend`] counts how many of a user's top-N neighbors reference each
//!    candidate paper and keeps the papers whose support clears a percentage
//!    threshold.
//! 4. [`evaluation`] measures the whole pipeline with per-user k-fold
//!    cross-validation and precision / recall / F-measure.
//!
//! [`synthetic`] generates seeded corpora with planted interest communities
//! for tests and benchmarks.

pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod recommend;
pub mod similarity;
pub mod synthetic;

pub use corpus::{Corpus, FieldMapping, IngestReport, PaperId, PaperRecord, Profiles, UserId, UserProfile};
pub use error::{Error, Result};
pub use evaluation::{ConfusionCounts, EvaluationConfig, EvaluationReport, FoldSplit, RecommenderMode};
pub use recommend::{CandidateStrategy, Recommendation, RecommendationParams, Recommender};
pub use similarity::{Neighbor, SimilarityBreakdown, SimilarityMatrix, SimilarityWeights};
