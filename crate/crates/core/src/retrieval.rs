//! TF-IDF candidate retrieval (inverted index + cosine ranking) and
//! model-based re-ranking of the candidates by query score.

use rayon::prelude::*;

use crate::corpus::{Corpus, Document, SparseCounts};
use crate::error::{Error, Result};
use crate::infer::{query_match, DEFAULT_FIT_BURN_IN};
use crate::model::ComponentModel;
use crate::rng::{substream, TAG_RERANK};

#[derive(Debug, Clone)]
pub struct Index {
    /// Per bag, per token: (doc index, tf-idf weight), sorted by doc index.
    pub postings: Vec<Vec<Vec<(u32, f64)>>>,
    /// Euclidean norm of each document's concatenated weight vector.
    pub doc_norms: Vec<f64>,
    pub doc_ids: Vec<String>,
    /// Document frequencies per bag, for weighting query tokens the same way.
    pub doc_freq: Vec<Vec<u32>>,
    pub n_docs: usize,
}

pub fn build_index(corpus: &Corpus) -> Result<Index> {
    let n_docs = corpus.documents.len();
    if n_docs == 0 {
        return Err(Error::Validation("cannot index an empty corpus".into()));
    }
    let mut postings: Vec<Vec<Vec<(u32, f64)>>> = corpus
        .vocabularies
        .iter()
        .map(|v| vec![Vec::new(); v.len()])
        .collect();
    let mut doc_norms = vec![0.0f64; n_docs];
    for (b, vocab) in corpus.vocabularies.iter().enumerate() {
        for (i, doc) in corpus.documents.iter().enumerate() {
            for &(j, c) in &doc.bags[b] {
                let idf = (n_docs as f64 / vocab.doc_freq[j as usize] as f64).ln();
                let w = c as f64 * idf;
                if w != 0.0 {
                    postings[b][j as usize].push((i as u32, w));
                    doc_norms[i] += w * w;
                }
            }
        }
    }
    for norm in &mut doc_norms {
        *norm = norm.sqrt();
    }
    Ok(Index {
        postings,
        doc_norms,
        doc_ids: corpus.documents.iter().map(|d| d.id.clone()).collect(),
        doc_freq: corpus.vocabularies.iter().map(|v| v.doc_freq.clone()).collect(),
        n_docs,
    })
}

/// Cosine similarity between the query's tf-idf vector and every document,
/// best `top_n` descending; ties broken by doc id ascending. Documents with
/// no weighted overlap are not returned.
pub fn tfidf_rank(index: &Index, query: &[SparseCounts], top_n: usize) -> Result<Vec<(String, f64)>> {
    if query.len() != index.postings.len() {
        return Err(Error::Dimension(format!(
            "query has {} bags, index has {}",
            query.len(),
            index.postings.len()
        )));
    }
    let total: u64 = query.iter().flatten().map(|&(_, r)| r as u64).sum();
    if total == 0 {
        return Err(Error::EmptyQuery);
    }
    let mut dots = vec![0.0f64; index.n_docs];
    let mut q_norm = 0.0f64;
    for (b, counts) in query.iter().enumerate() {
        for &(j, c) in counts {
            if j as usize >= index.postings[b].len() {
                return Err(Error::Dimension(format!(
                    "query token index {j} out of range for bag {b}"
                )));
            }
            let idf = (index.n_docs as f64 / index.doc_freq[b][j as usize].max(1) as f64).ln();
            let qw = c as f64 * idf;
            q_norm += qw * qw;
            if qw == 0.0 {
                continue;
            }
            for &(i, w) in &index.postings[b][j as usize] {
                dots[i as usize] += qw * w;
            }
        }
    }
    let q_norm = q_norm.sqrt();
    let mut scored: Vec<(String, f64)> = dots
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d > 0.0)
        .map(|(i, &d)| {
            let score = d / (q_norm * index.doc_norms[i]);
            (index.doc_ids[i].clone(), score)
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores").then(a.0.cmp(&b.0)));
    scored.truncate(top_n);
    Ok(scored)
}

#[derive(Debug, Clone)]
pub struct RerankEntry {
    pub doc_id: String,
    pub log_score: f64,
    /// 1-based rank in the candidate list handed in (the TF-IDF order).
    pub prior_rank: usize,
}

/// Score each candidate document with query_match and sort descending; ties
/// keep the prior TF-IDF order. Candidates that fail to score are dropped
/// with a warning. Parallel over candidates with per-candidate substreams.
pub fn rerank(
    model: &ComponentModel,
    candidates: &[(&Document, usize)],
    query: &[SparseCounts],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<RerankEntry>> {
    if candidates.is_empty() {
        return Err(Error::Validation("no candidates to re-rank".into()));
    }
    let scored: Vec<Option<RerankEntry>> = candidates
        .par_iter()
        .map(|&(doc, prior_rank)| {
            let mut rng = substream(seed, TAG_RERANK, prior_rank as u64, 0);
            match query_match(model, doc, query, n_samples, DEFAULT_FIT_BURN_IN, &mut rng) {
                Ok(log_score) => {
                    Some(RerankEntry { doc_id: doc.id.clone(), log_score, prior_rank })
                }
                Err(e) => {
                    eprintln!("warning: dropping candidate {:?}: {e}", doc.id);
                    None
                }
            }
        })
        .collect();
    let mut entries: Vec<RerankEntry> = scored.into_iter().flatten().collect();
    entries.sort_by(|a, b| {
        b.log_score
            .partial_cmp(&a.log_score)
            .expect("finite scores")
            .then(a.prior_rank.cmp(&b.prior_rank))
    });
    Ok(entries)
}
