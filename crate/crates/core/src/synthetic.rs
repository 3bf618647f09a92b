//! Seeded synthetic corpora with planted interest communities.
//!
//! Users are split round-robin into communities. Each paper belongs to the
//! community of its lead author; co-authors, keywords and references are
//! drawn from that community with probability `cohesion` and from the whole
//! corpus otherwise. References inside a community are skewed toward a few
//! popular papers. Citation sets are the exact inverse of the reference
//! graph.

use std::collections::BTreeSet;
use std::io::Write;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::corpus::{Corpus, PaperRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub users: usize,
    pub communities: usize,
    pub papers: usize,
    pub authors_per_paper: usize,
    pub keywords_per_paper: usize,
    pub keywords_per_community: usize,
    pub references_per_paper: usize,
    /// Probability that a co-author, keyword or reference is drawn from the
    /// paper's own community.
    pub cohesion: f64,
    /// Exponent applied to a uniform draw when picking a reference inside a
    /// community; larger values concentrate references on fewer papers.
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            users: 100,
            communities: 5,
            papers: 300,
            authors_per_paper: 3,
            keywords_per_paper: 4,
            keywords_per_community: 30,
            references_per_paper: 6,
            cohesion: 0.85,
            popularity_skew: 2.0,
            seed: 0,
        }
    }
}

fn user_id(i: usize) -> String {
    format!("u{i:05}")
}

fn paper_id(i: usize) -> String {
    format!("p{i:06}")
}

pub fn generate_records(config: &SyntheticConfig) -> Result<Vec<PaperRecord>> {
    if config.users == 0 || config.communities == 0 || config.papers == 0 || config.authors_per_paper == 0 {
        return Err(Error::parameter("synthetic corpus needs users, communities, papers and authors"));
    }
    if config.communities > config.users {
        return Err(Error::parameter("more communities than users"));
    }
    if !(0.0..=1.0).contains(&config.cohesion) || config.popularity_skew <= 0.0 {
        return Err(Error::parameter("cohesion must lie in [0,1] and skew must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let community_of_user = |u: usize| u % config.communities;
    let members: Vec<Vec<usize>> = (0..config.communities)
        .map(|c| (0..config.users).filter(|&u| community_of_user(u) == c).collect())
        .collect();
    let leads: Vec<usize> = (0..config.papers).map(|p| p % config.users).collect();
    let community_of_paper: Vec<usize> = leads.iter().map(|&u| community_of_user(u)).collect();
    let papers_in: Vec<Vec<usize>> = (0..config.communities)
        .map(|c| (0..config.papers).filter(|&p| community_of_paper[p] == c).collect())
        .collect();
    let global_keywords = config.keywords_per_community.max(1) * config.communities;

    let mut authors: Vec<BTreeSet<String>> = Vec::with_capacity(config.papers);
    let mut keywords: Vec<BTreeSet<String>> = Vec::with_capacity(config.papers);
    let mut references: Vec<BTreeSet<usize>> = Vec::with_capacity(config.papers);
    for p in 0..config.papers {
        let c = community_of_paper[p];
        let mut team = BTreeSet::from([leads[p]]);
        let wanted = config.authors_per_paper.min(config.users);
        while team.len() < wanted {
            let u = if rng.gen_bool(config.cohesion) {
                members[c][rng.gen_range(0..members[c].len())]
            } else {
                rng.gen_range(0..config.users)
            };
            team.insert(u);
        }
        authors.push(team.into_iter().map(user_id).collect());

        let mut kws = BTreeSet::new();
        for _ in 0..config.keywords_per_paper {
            let (kc, k) = if rng.gen_bool(config.cohesion) {
                (c, rng.gen_range(0..config.keywords_per_community.max(1)))
            } else {
                let g = rng.gen_range(0..global_keywords);
                (g / config.keywords_per_community.max(1), g % config.keywords_per_community.max(1))
            };
            kws.insert(format!("topic {kc} term {k}"));
        }
        keywords.push(kws);

        let mut refs = BTreeSet::new();
        let mut attempts = 0;
        while refs.len() < config.references_per_paper.min(config.papers - 1) && attempts < 50 * config.references_per_paper {
            attempts += 1;
            let r = if rng.gen_bool(config.cohesion) {
                let pool = &papers_in[c];
                let x: f64 = rng.gen::<f64>().powf(config.popularity_skew);
                pool[((x * pool.len() as f64) as usize).min(pool.len() - 1)]
            } else {
                rng.gen_range(0..config.papers)
            };
            if r != p {
                refs.insert(r);
            }
        }
        references.push(refs);
    }

    let mut citations: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); config.papers];
    for (p, refs) in references.iter().enumerate() {
        for &r in refs {
            citations[r].insert(p);
        }
    }

    (0..config.papers)
        .map(|p| {
            PaperRecord::new(
                paper_id(p),
                format!("Synthetic paper {p}"),
                &authors[p],
                &keywords[p],
                references[p].iter().map(|&r| paper_id(r)),
                citations[p].iter().map(|&r| paper_id(r)),
            )
        })
        .collect()
}

pub fn generate(config: &SyntheticConfig) -> Result<Corpus> {
    Ok(Corpus::from_records(generate_records(config)?).0)
}

/// Writes records in the default JSON-lines input layout.
pub fn write_jsonl<'a, W: Write>(records: impl IntoIterator<Item = &'a PaperRecord>, mut out: W) -> Result<()> {
    for r in records {
        let line = json!({
            "id": r.paper_id,
            "title": r.title,
            "authors": r.author_ids,
            "keywords": r.keywords,
            "references": r.references,
            "citations": r.citations,
        });
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
