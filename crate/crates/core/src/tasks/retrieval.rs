//! Log-message retrieval: nearest neighbours by cosine, then a BLEU-4
//! re-ranking of the top k by code-token overlap with the query.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bleu::bleu4;
use crate::error::{Error, Result};
use crate::tensor::cosine;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub id: String,
    pub vector: Vec<f64>,
    pub message: Vec<String>,
    /// Code tokens in diff order.
    pub code_tokens: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RetrievalIndex {
    entries: Vec<IndexEntry>,
    width: usize,
}

impl RetrievalIndex {
    pub fn new(entries: Vec<IndexEntry>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Corpus("retrieval index is empty".to_string()))?;
        let width = first.vector.len();
        for e in &entries {
            if e.vector.len() != width {
                return Err(Error::shape(format!(
                    "index entry {} has width {}, expected {width}",
                    e.id,
                    e.vector.len()
                )));
            }
            if e.message.is_empty() {
                return Err(Error::Corpus(format!("index entry {} has an empty message", e.id)));
            }
        }
        Ok(RetrievalIndex { entries, width })
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalOptions {
    pub k: usize,
    /// Re-rank the top k by BLEU-4; off gives plain nearest neighbour.
    pub bleu_stage: bool,
}

impl Default for RetrievalOptions {
    fn default() -> Self {
        RetrievalOptions { k: 5, bleu_stage: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Retrieved {
    /// Position in the index.
    pub index: usize,
    pub cosine: f64,
    /// BLEU-4 of the entry's code tokens against the query's, when the
    /// second stage ran.
    pub bleu: Option<f64>,
}

/// Pick among `scored` (entry index, stage-1 similarity) following the
/// two-stage rule.
fn select(
    scored: Vec<(usize, f64)>,
    index: &RetrievalIndex,
    query_code: &[String],
    opts: RetrievalOptions,
) -> Result<Retrieved> {
    if opts.k == 0 {
        return Err(Error::config("k must be >= 1"));
    }
    if index.is_empty() {
        return Err(Error::Corpus("retrieval index is empty".to_string()));
    }
    let mut scored = scored;
    // stable: equal similarities keep index order
    scored.sort_by(|a, b| b.1.total_cmp(&a.1));
    scored.truncate(opts.k);
    if !opts.bleu_stage || query_code.is_empty() {
        let (i, c) = scored[0];
        return Ok(Retrieved {
            index: i,
            cosine: c,
            bleu: None,
        });
    }
    let mut best: Option<Retrieved> = None;
    for (i, c) in scored {
        let b = bleu4(&index.entries[i].code_tokens, query_code)?;
        // strict comparisons keep the earlier (higher-cosine, lower-index) candidate on ties
        let better = match &best {
            None => true,
            Some(cur) => b > cur.bleu.unwrap() || (b == cur.bleu.unwrap() && c > cur.cosine),
        };
        if better {
            best = Some(Retrieved {
                index: i,
                cosine: c,
                bleu: Some(b),
            });
        }
    }
    Ok(best.expect("k >= 1 and index non-empty"))
}

/// Nearest neighbours of `query_vector` by cosine similarity.
pub fn retrieve(
    query_vector: &[f64],
    query_code: &[String],
    index: &RetrievalIndex,
    opts: RetrievalOptions,
) -> Result<Retrieved> {
    if !index.is_empty() && query_vector.len() != index.width {
        return Err(Error::shape(format!(
            "query width {} does not match index width {}",
            query_vector.len(),
            index.width
        )));
    }
    let scored = index
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (i, cosine(query_vector, &e.vector)))
        .collect();
    select(scored, index, query_code, opts)
}

/// The message of the entry chosen by [`retrieve`].
pub fn retrieve_message<'a>(
    query_vector: &[f64],
    query_code: &[String],
    index: &'a RetrievalIndex,
    opts: RetrievalOptions,
) -> Result<&'a [String]> {
    let r = retrieve(query_vector, query_code, index, opts)?;
    Ok(&index.entries[r.index].message)
}

/// Sparse term-frequency vector.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TermBag {
    counts: HashMap<String, f64>,
    norm: f64,
}

impl TermBag {
    pub fn new<S: AsRef<str>>(tokens: &[S]) -> Self {
        let mut counts = HashMap::new();
        for t in tokens {
            *counts.entry(t.as_ref().to_string()).or_insert(0.0) += 1.0;
        }
        let norm = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        TermBag { counts, norm }
    }

    /// 0 when either bag is empty.
    pub fn cosine(&self, other: &TermBag) -> f64 {
        if self.norm == 0.0 || other.norm == 0.0 {
            return 0.0;
        }
        let (small, large) = if self.counts.len() <= other.counts.len() {
            (self, other)
        } else {
            (other, self)
        };
        let dot: f64 = small
            .counts
            .iter()
            .filter_map(|(t, c)| large.counts.get(t).map(|d| c * d))
            .sum();
        dot / (self.norm * other.norm)
    }
}

/// Bag-of-words baseline: stage 1 ranks by cosine over term-frequency bags of
/// code tokens, stage 2 is the same BLEU re-ranking.
pub struct BagIndex<'a> {
    index: &'a RetrievalIndex,
    bags: Vec<TermBag>,
}

impl<'a> BagIndex<'a> {
    pub fn new(index: &'a RetrievalIndex) -> Self {
        let bags = index.entries.par_iter().map(|e| TermBag::new(&e.code_tokens)).collect();
        BagIndex { index, bags }
    }

    pub fn retrieve(&self, query_code: &[String], opts: RetrievalOptions) -> Result<Retrieved> {
        let q = TermBag::new(query_code);
        let scored = self.bags.iter().enumerate().map(|(i, b)| (i, q.cosine(b))).collect();
        select(scored, self.index, query_code, opts)
    }
}

pub fn nngen_baseline<'a>(
    query_code: &[String],
    index: &'a RetrievalIndex,
    k: usize,
) -> Result<&'a [String]> {
    let r = BagIndex::new(index).retrieve(query_code, RetrievalOptions { k, bleu_stage: true })?;
    Ok(&index.entries[r.index].message)
}

/// One line of a retrieval results file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub chosen_id: String,
    pub message: String,
    pub cosine: f64,
    pub bleu_stage2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub id: String,
    pub vector: Vec<f64>,
    pub code_tokens: Vec<String>,
}

fn to_result(q: &Query, index: &RetrievalIndex, r: Retrieved) -> RetrievalResult {
    let e = &index.entries[r.index];
    RetrievalResult {
        query_id: q.id.clone(),
        chosen_id: e.id.clone(),
        message: e.message.join(" "),
        cosine: r.cosine,
        bleu_stage2: r.bleu,
    }
}

/// Answer every query in parallel; output order follows `queries`.
pub fn retrieve_all(queries: &[Query], index: &RetrievalIndex, opts: RetrievalOptions) -> Result<Vec<RetrievalResult>> {
    queries
        .par_iter()
        .map(|q| retrieve(&q.vector, &q.code_tokens, index, opts).map(|r| to_result(q, index, r)))
        .collect()
}

/// Baseline answers for every query. `vector` is ignored.
pub fn nngen_all(queries: &[Query], index: &RetrievalIndex, opts: RetrievalOptions) -> Result<Vec<RetrievalResult>> {
    let bags = BagIndex::new(index);
    queries
        .par_iter()
        .map(|q| bags.retrieve(&q.code_tokens, opts).map(|r| to_result(q, index, r)))
        .collect()
}
