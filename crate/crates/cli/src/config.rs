//! Flat run configuration shared by the config file and the command line.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use paperrec::evaluation::validate_sweep;
use paperrec::recommend::{DEFAULT_THRESHOLD_PCT, DEFAULT_TOP_N};
use paperrec::{CandidateStrategy, Error, RecommendationParams, SimilarityWeights};
use serde::{Deserialize, Serialize};

/// Every field is optional so a file and the flags can be layered; unset
/// fields fall back to the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    /// `alpha,beta,gamma,mu`.
    pub weights: Option<String>,
    pub top_n: Option<usize>,
    pub threshold: Option<f64>,
    pub max_recommendations: Option<usize>,
    /// `neighbors`, `corpus` or `file:<path>`.
    pub candidates: Option<String>,
    pub sweep: Option<Vec<usize>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub oracle: Option<bool>,
}

fn parameter(msg: impl Into<String>) -> anyhow::Error {
    Error::Parameter(msg.into()).into()
}

impl RunConfig {
    /// Reads a TOML file; relative paths inside it resolve against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| parameter(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| parameter(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for slot in [&mut config.corpus, &mut config.cache, &mut config.out] {
            if let Some(p) = slot.as_mut() {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        if let Some(choice) = config.candidates.as_mut() {
            if let Some(file) = choice.strip_prefix("file:") {
                if Path::new(file).is_relative() {
                    *choice = format!("file:{}", base.join(file).display());
                }
            }
        }
        Ok(config)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn overlay(self, over: RunConfig) -> RunConfig {
        RunConfig {
            corpus: over.corpus.or(self.corpus),
            cache: over.cache.or(self.cache),
            weights: over.weights.or(self.weights),
            top_n: over.top_n.or(self.top_n),
            threshold: over.threshold.or(self.threshold),
            max_recommendations: over.max_recommendations.or(self.max_recommendations),
            candidates: over.candidates.or(self.candidates),
            sweep: over.sweep.or(self.sweep),
            folds: over.folds.or(self.folds),
            seed: over.seed.or(self.seed),
            out: over.out.or(self.out),
            oracle: over.oracle.or(self.oracle),
        }
    }

    pub fn weights(&self) -> Result<SimilarityWeights> {
        Ok(match &self.weights {
            Some(text) => text.parse()?,
            None => SimilarityWeights::equal(),
        })
    }

    pub fn params(&self) -> Result<RecommendationParams> {
        Ok(RecommendationParams::new(
            self.top_n.unwrap_or(DEFAULT_TOP_N),
            self.threshold.unwrap_or(DEFAULT_THRESHOLD_PCT),
            self.max_recommendations,
        )?)
    }

    /// An explicit candidate file must exist and list at least one id.
    pub fn candidates(&self) -> Result<CandidateStrategy> {
        let Some(choice) = &self.candidates else {
            return Ok(CandidateStrategy::Neighbors);
        };
        if let Some(file) = choice.strip_prefix("file:") {
            let text = fs::read_to_string(file).map_err(|e| parameter(format!("cannot read candidate file {file}: {e}")))?;
            let ids: Vec<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(str::to_string)
                .collect();
            if ids.is_empty() {
                return Err(parameter(format!("candidate file {file} lists no papers")));
            }
            return Ok(CandidateStrategy::Explicit(ids));
        }
        Ok(choice.parse()?)
    }

    pub fn sweep(&self) -> Result<Vec<usize>> {
        let sweep = self.sweep.clone().unwrap_or_else(|| vec![5, 10, 20]);
        validate_sweep(&sweep)?;
        Ok(sweep)
    }

    /// Checks that every referenced input path exists.
    pub fn check_inputs(&self) -> Result<()> {
        for path in [&self.corpus, &self.cache].into_iter().flatten() {
            if !path.exists() {
                return Err(parameter(format!("input {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// The merged configuration with defaults made explicit.
    pub fn effective(&self) -> Result<RunConfig> {
        let params = self.params()?;
        Ok(RunConfig {
            weights: Some(self.weights()?.to_string()),
            top_n: Some(params.top_n),
            threshold: Some(params.min_threshold_pct),
            candidates: Some(self.candidates.clone().unwrap_or_else(|| "neighbors".into())),
            sweep: Some(self.sweep()?),
            folds: Some(self.folds.unwrap_or(10)),
            seed: Some(self.seed.unwrap_or(0)),
            oracle: Some(self.oracle.unwrap_or(false)),
            ..self.clone()
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).context("serializing config")?;
        fs::write(path, text)?;
        Ok(())
    }
}
