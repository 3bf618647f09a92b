//! Paper-metadata ingestion and per-user profile aggregation.
//!
//! Input is JSON lines, one paper object per line, optionally gzip
//! compressed. Each author id found on a paper becomes a user whose
//! profile is the union of the keyword, reference and citation sets of the
//! papers they wrote, plus the set of people they wrote with.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type PaperId = String;
pub type UserId = String;

/// All user profiles keyed by user id.
pub type Profiles = BTreeMap<UserId, UserProfile>;

/// Header line written before the cache body.
pub const CACHE_MAGIC: &str = "paperrec-corpus-cache";
pub const CACHE_SCHEMA_VERSION: &str = "v1";

/// Maximum fraction of malformed lines tolerated by [`parse_corpus`].
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

/// Lowercase, trim and collapse internal whitespace. No stemming.
pub fn normalize_keyword(raw: &str) -> String {
    raw.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: PaperId,
    pub title: String,
    pub author_ids: BTreeSet<UserId>,
    pub keywords: BTreeSet<String>,
    /// Papers this paper cites.
    pub references: BTreeSet<PaperId>,
    /// Papers citing this paper.
    pub citations: BTreeSet<PaperId>,
}

impl PaperRecord {
    /// Builds a cleaned record: keywords are normalized, empty ids dropped and
    /// self-citation edges removed.
    pub fn new<A, K, R, C>(
        paper_id: impl Into<PaperId>,
        title: impl Into<String>,
        authors: A,
        keywords: K,
        references: R,
        citations: C,
    ) -> Result<Self>
    where
        A: IntoIterator,
        A::Item: AsRef<str>,
        K: IntoIterator,
        K::Item: AsRef<str>,
        R: IntoIterator,
        R::Item: AsRef<str>,
        C: IntoIterator,
        C::Item: AsRef<str>,
    {
        let paper_id = paper_id.into().trim().to_string();
        if paper_id.is_empty() {
            return Err(Error::Format("paper id must be non-empty".into()));
        }
        let ids = |it: &mut dyn Iterator<Item = String>| -> BTreeSet<String> {
            it.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
        };
        let mut record = PaperRecord {
            title: title.into(),
            author_ids: ids(&mut authors.into_iter().map(|s| s.as_ref().to_string())),
            keywords: keywords
                .into_iter()
                .map(|k| normalize_keyword(k.as_ref()))
                .filter(|k| !k.is_empty())
                .collect(),
            references: ids(&mut references.into_iter().map(|s| s.as_ref().to_string())),
            citations: ids(&mut citations.into_iter().map(|s| s.as_ref().to_string())),
            paper_id,
        };
        record.references.remove(&record.paper_id);
        record.citations.remove(&record.paper_id);
        Ok(record)
    }

    fn is_clean(&self) -> bool {
        !self.paper_id.is_empty()
            && !self.references.contains(&self.paper_id)
            && !self.citations.contains(&self.paper_id)
            && self.keywords.iter().all(|k| !k.is_empty() && *k == normalize_keyword(k))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserProfile {
    pub user_id: UserId,
    pub authored_papers: BTreeSet<PaperId>,
    pub keyword_set: BTreeSet<String>,
    /// Everyone this user shares a paper with, never the user itself.
    pub coauthor_set: BTreeSet<UserId>,
    pub citation_set: BTreeSet<PaperId>,
    pub reference_set: BTreeSet<PaperId>,
}

impl UserProfile {
    pub fn new(user_id: impl Into<UserId>) -> Self {
        UserProfile {
            user_id: user_id.into(),
            ..Default::default()
        }
    }
}

/// One profile per distinct author id, each set the union over the
/// author's papers.
pub fn build_profiles(papers: &BTreeMap<PaperId, PaperRecord>) -> Profiles {
    let mut users = Profiles::new();
    for paper in papers.values() {
        for author in &paper.author_ids {
            let profile = users
                .entry(author.clone())
                .or_insert_with(|| UserProfile::new(author.clone()));
            profile.authored_papers.insert(paper.paper_id.clone());
            profile.keyword_set.extend(paper.keywords.iter().cloned());
            profile.citation_set.extend(paper.citations.iter().cloned());
            profile.reference_set.extend(paper.references.iter().cloned());
            profile
                .coauthor_set
                .extend(paper.author_ids.iter().filter(|a| *a != author).cloned());
        }
    }
    users
}

/// An immutable paper collection together with the profiles derived from it.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    papers: BTreeMap<PaperId, PaperRecord>,
    users: Profiles,
}

impl Corpus {
    /// Builds a corpus from records. When two records share an id the first
    /// one is kept; the ids of the rejected records are returned.
    pub fn from_records(records: impl IntoIterator<Item = PaperRecord>) -> (Self, Vec<PaperId>) {
        let mut papers = BTreeMap::new();
        let mut duplicates = Vec::new();
        for record in records {
            if papers.contains_key(&record.paper_id) {
                duplicates.push(record.paper_id);
            } else {
                papers.insert(record.paper_id.clone(), record);
            }
        }
        let users = build_profiles(&papers);
        (Corpus { papers, users }, duplicates)
    }

    pub fn papers(&self) -> &BTreeMap<PaperId, PaperRecord> {
        &self.papers
    }

    pub fn users(&self) -> &Profiles {
        &self.users
    }

    pub fn user(&self, user_id: &str) -> Result<&UserProfile> {
        self.users
            .get(user_id)
            .ok_or_else(|| Error::UnknownUser(user_id.to_string()))
    }

    pub fn is_empty(&self) -> bool {
        self.papers.is_empty()
    }

    /// SHA-256 over the canonical JSON encoding of the papers.
    pub fn digest(&self) -> String {
        let body = serde_json::to_vec(&self.papers).expect("paper records always serialize");
        hex::encode(Sha256::digest(&body))
    }

    fn validate(&self) -> Result<()> {
        for (id, paper) in &self.papers {
            if *id != paper.paper_id || !paper.is_clean() {
                return Err(Error::Format(format!("paper record `{id}` violates record invariants")));
            }
        }
        if build_profiles(&self.papers) != self.users {
            return Err(Error::Format("stored profiles disagree with paper records".into()));
        }
        Ok(())
    }
}

/// Source field names for each record attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FieldMapping {
    pub id: String,
    pub title: String,
    pub authors: String,
    pub keywords: String,
    pub references: String,
    pub citations: String,
}

impl Default for FieldMapping {
    fn default() -> Self {
        FieldMapping {
            id: "id".into(),
            title: "title".into(),
            authors: "authors".into(),
            keywords: "keywords".into(),
            references: "references".into(),
            citations: "citations".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LineError {
    /// 1-based line number in the input.
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    /// Non-blank lines seen.
    pub lines: usize,
    pub malformed: Vec<LineError>,
    /// Ids of records rejected because an earlier record had the same id.
    pub duplicates: Vec<PaperId>,
}

impl IngestReport {
    pub fn warnings(&self) -> usize {
        self.malformed.len() + self.duplicates.len()
    }
}

fn string_list(obj: &serde_json::Map<String, Value>, field: &str) -> std::result::Result<Vec<String>, String> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) => Ok(s.clone()),
                other => Err(format!("field `{field}` holds a non-string entry {other}")),
            })
            .collect(),
        Some(other) => Err(format!("field `{field}` must be a list, found {other}")),
    }
}

fn parse_line(line: &[u8], mapping: &FieldMapping) -> std::result::Result<PaperRecord, String> {
    let text = std::str::from_utf8(line).map_err(|e| format!("invalid utf-8: {e}"))?;
    let value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    let obj = value.as_object().ok_or("line is not a JSON object")?;
    let id = match obj.get(&mapping.id) {
        Some(Value::String(s)) if !s.trim().is_empty() => s.clone(),
        Some(_) => return Err(format!("field `{}` must be a non-empty string", mapping.id)),
        None => return Err(format!("missing field `{}`", mapping.id)),
    };
    let title = match obj.get(&mapping.title) {
        None | Some(Value::Null) => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(other) => return Err(format!("field `{}` must be a string, found {other}", mapping.title)),
    };
    PaperRecord::new(
        id,
        title,
        string_list(obj, &mapping.authors)?,
        string_list(obj, &mapping.keywords)?,
        string_list(obj, &mapping.references)?,
        string_list(obj, &mapping.citations)?,
    )
    .map_err(|e| e.to_string())
}

/// Parses a JSON-lines stream (plain or gzip) into a corpus.
///
/// Malformed lines are collected in the report; if more than 10% of the
/// non-blank lines are malformed the whole parse fails.
pub fn parse_corpus<R: Read>(source: R, mapping: &FieldMapping) -> Result<(Corpus, IngestReport)> {
    let mut reader = BufReader::new(source);
    let is_gzip = reader.fill_buf()?.starts_with(&GZIP_MAGIC);
    let reader: Box<dyn BufRead> = if is_gzip {
        Box::new(BufReader::new(MultiGzDecoder::new(reader)))
    } else {
        Box::new(reader)
    };

    let mut lines = Vec::new();
    for (index, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        if line.iter().all(u8::is_ascii_whitespace) {
            continue;
        }
        lines.push((index + 1, line));
    }

    let parsed: Vec<_> = lines
        .par_iter()
        .map(|(number, bytes)| (*number, parse_line(bytes, mapping)))
        .collect();

    let mut report = IngestReport {
        lines: parsed.len(),
        ..Default::default()
    };
    let mut records = Vec::with_capacity(parsed.len());
    for (line, result) in parsed {
        match result {
            Ok(record) => records.push(record),
            Err(message) => report.malformed.push(LineError { line, message }),
        }
    }
    if report.lines > 0 && report.malformed.len() as f64 > MAX_MALFORMED_FRACTION * report.lines as f64 {
        let first = &report.malformed[0];
        return Err(Error::Format(format!(
            "{} of {} lines malformed (first at line {}: {})",
            report.malformed.len(),
            report.lines,
            first.line,
            first.message
        )));
    }
    if !report.malformed.is_empty() {
        warn!("skipped {} malformed lines", report.malformed.len());
    }

    let (corpus, duplicates) = Corpus::from_records(records);
    if !duplicates.is_empty() {
        warn!("rejected {} duplicate paper records", duplicates.len());
    }
    report.duplicates = duplicates;
    Ok((corpus, report))
}

pub fn read_corpus_file(path: impl AsRef<Path>, mapping: &FieldMapping) -> Result<(Corpus, IngestReport)> {
    parse_corpus(File::open(path)?, mapping)
}

/// Writes the corpus as a header line followed by a JSON body.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{CACHE_MAGIC} {CACHE_SCHEMA_VERSION}")?;
    serde_json::to_writer(&mut out, corpus)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Corpus> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end_matches(['\n', '\r']);
    let version = header
        .strip_prefix(CACHE_MAGIC)
        .and_then(|rest| rest.strip_prefix(' '))
        .ok_or_else(|| Error::Format("missing cache header".into()))?;
    if version != CACHE_SCHEMA_VERSION {
        return Err(Error::Version {
            expected: CACHE_SCHEMA_VERSION.into(),
            found: version.into(),
        });
    }
    let corpus: Corpus =
        serde_json::from_reader(reader).map_err(|e| Error::Format(format!("unreadable cache body: {e}")))?;
    corpus.validate()?;
    Ok(corpus)
}
