//! Fixed-omega inference on single documents: posterior proportion samples,
//! Dirichlet moment-matched summaries, harmonic-mean query scoring, and
//! class-as-bag classification.

use rand::Rng;
use serde::Serialize;

use crate::corpus::{Document, SparseCounts};
use crate::error::{Error, Result};
use crate::evidence::counts_log_likelihood;
use crate::model::ComponentModel;
use crate::rng::logsumexp;
use crate::sampler::{doc_step, initial_state};

pub const DEFAULT_FIT_BURN_IN: usize = 10;
pub const DEFAULT_FIT_CYCLES: usize = 50;
pub const DEFAULT_QUERY_SAMPLES: usize = 50;
/// Precision used when the posterior samples have zero spread.
pub const PRECISION_CAP: f64 = 1e6;

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorSummary {
    pub id: String,
    pub m_mean: Vec<f64>,
    pub m_std: Vec<f64>,
    pub dirichlet_fit: Vec<f64>,
    #[serde(skip)]
    pub n_samples: usize,
}

/// Draw proportion samples from p(m | doc, omega) by per-document Gibbs with
/// omega frozen: `burn_in` discarded cycles, then one recorded m per cycle.
pub fn posterior_m_samples<R: Rng + ?Sized>(
    model: &ComponentModel,
    doc: &Document,
    burn_in: usize,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    if n_samples == 0 {
        return Err(Error::Validation("n_samples must be at least 1".into()));
    }
    if doc.bags.len() != model.bags.len() {
        return Err(Error::Dimension(format!(
            "document has {} bags, model has {}",
            doc.bags.len(),
            model.bags.len()
        )));
    }
    let mut state = initial_state(model);
    for _ in 0..burn_in {
        doc_step(doc, &mut state, model, rng)?;
    }
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        doc_step(doc, &mut state, model, rng)?;
        samples.push(state.m.clone());
    }
    Ok(samples)
}

/// Gibbs-sample the document's proportions and summarize them: per-component
/// mean and standard deviation, plus a moment-matched Dirichlet.
pub fn fit_document<R: Rng + ?Sized>(
    model: &ComponentModel,
    doc: &Document,
    burn_in: usize,
    cycles: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<f64>>, PosteriorSummary)> {
    if cycles < 2 {
        return Err(Error::Validation(
            "need at least 2 recorded cycles to form a summary".into(),
        ));
    }
    let samples = posterior_m_samples(model, doc, burn_in, cycles, rng)?;
    let k = model.k;
    let n = samples.len() as f64;
    let mut mean = vec![0.0; k];
    for s in &samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; k];
    for s in &samples {
        for (acc, (&v, &mu)) in std.iter_mut().zip(s.iter().zip(&mean)) {
            *acc += (v - mu) * (v - mu);
        }
    }
    std.iter_mut().for_each(|s| *s = (*s / (n - 1.0)).sqrt());
    let dirichlet_fit = dirichlet_moment_match(&samples)?;
    Ok((
        samples,
        PosteriorSummary {
            id: doc.id.clone(),
            m_mean: mean,
            m_std: std,
            dirichlet_fit,
            n_samples: cycles,
        },
    ))
}

/// Fit a Dirichlet to proportion samples: the mean is matched exactly, and
/// the precision s is set so the average per-component Dirichlet standard
/// deviation sqrt(mu_k(1-mu_k)/(s+1)) equals the average sample standard
/// deviation. Zero spread caps s at [`PRECISION_CAP`] with a warning.
pub fn dirichlet_moment_match(samples: &[Vec<f64>]) -> Result<Vec<f64>> {
    if samples.len() < 2 {
        return Err(Error::Validation(
            "moment matching needs at least 2 samples".into(),
        ));
    }
    let k = samples[0].len();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; k];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut avg_std = 0.0;
    for kk in 0..k {
        let var: f64 = samples
            .iter()
            .map(|s| (s[kk] - mean[kk]) * (s[kk] - mean[kk]))
            .sum::<f64>()
            / (n - 1.0);
        avg_std += var.sqrt();
    }
    avg_std /= k as f64;
    let avg_bound: f64 = mean
        .iter()
        .map(|&mu| (mu * (1.0 - mu)).max(0.0).sqrt())
        .sum::<f64>()
        / k as f64;
    let s = if avg_std > 0.0 {
        let ratio = avg_bound / avg_std;
        let s = ratio * ratio - 1.0;
        if s.is_finite() && s <= PRECISION_CAP {
            // sampling noise can nudge the ratio below 1; keep the parameters
            // positive
            s.max(f64::MIN_POSITIVE)
        } else {
            eprintln!("warning: moment-match precision capped at {PRECISION_CAP}");
            PRECISION_CAP
        }
    } else {
        eprintln!("warning: zero-variance samples; moment-match precision capped at {PRECISION_CAP}");
        PRECISION_CAP
    };
    Ok(mean.iter().map(|&mu| s * mu).collect())
}

/// Merge two per-bag sparse count lists (document evidence r and query x).
fn merge_counts(a: &[SparseCounts], b: &[SparseCounts]) -> Vec<SparseCounts> {
    a.iter()
        .zip(b)
        .map(|(ca, cb)| {
            let mut merged: Vec<(u32, u32)> = ca.clone();
            for &(j, r) in cb {
                match merged.iter_mut().find(|(jj, _)| *jj == j) {
                    Some(slot) => slot.1 += r,
                    None => merged.push((j, r)),
                }
            }
            merged.sort_unstable_by_key(|&(j, _)| j);
            merged
        })
        .collect()
}

/// Harmonic-mean query score: Gibbs on the concatenated evidence (document
/// counts plus query counts) draws m_1..m_N, and the score is
/// ln N − logsumexp_n(−ln p(x | m_n, omega)) — a simulation-consistent
/// estimate of ln p(x | doc).
pub fn query_match<R: Rng + ?Sized>(
    model: &ComponentModel,
    doc: &Document,
    query: &[SparseCounts],
    n_samples: usize,
    burn_in: usize,
    rng: &mut R,
) -> Result<f64> {
    if query.len() != model.bags.len() {
        return Err(Error::Dimension(format!(
            "query has {} bags, model has {}",
            query.len(),
            model.bags.len()
        )));
    }
    let total: u64 = query.iter().flatten().map(|&(_, r)| r as u64).sum();
    if total == 0 {
        return Err(Error::EmptyQuery);
    }
    for (b, counts) in query.iter().enumerate() {
        for &(j, _) in counts {
            if j as usize >= model.bags[b].tokens.len() {
                return Err(Error::Dimension(format!(
                    "query token index {j} out of range for bag {:?}",
                    model.bags[b].name
                )));
            }
        }
    }
    let merged = Document {
        id: doc.id.clone(),
        bags: merge_counts(&doc.bags, query),
        label: None,
    };
    let samples = posterior_m_samples(model, &merged, burn_in, n_samples, rng)?;
    let neg_log: Vec<f64> = samples
        .iter()
        .map(|m| -counts_log_likelihood(query, m, &model.bags))
        .collect();
    if neg_log.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("query log likelihood"));
    }
    let score = (n_samples as f64).ln() - logsumexp(&neg_log);
    if !score.is_finite() {
        return Err(Error::non_finite("query score"));
    }
    Ok(score)
}

#[derive(Debug, Clone)]
pub struct Classification {
    pub id: String,
    /// Position into the class-value sequence, not a token index.
    pub predicted: usize,
    /// One log score per class value, in the given order.
    pub scores: Vec<f64>,
    /// True when the best score is shared and the tie was broken by order.
    pub tie: bool,
}

pub(crate) fn argmax_with_tie(scores: &[f64]) -> (usize, bool) {
    let mut best = 0;
    let mut tie = false;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
            tie = false;
        } else if s == scores[best] {
            tie = true;
        }
    }
    (best, tie)
}

/// Locate a class bag by name and return its index with the full vocabulary
/// as class values (token indices in vocabulary order).
pub fn class_values_for(model: &ComponentModel, class_bag: &str) -> Result<(usize, Vec<u32>)> {
    let idx = model
        .bag_index(class_bag)
        .ok_or_else(|| Error::Schema(format!("model has no class bag {class_bag:?}")))?;
    let values = (0..model.bags[idx].tokens.len() as u32).collect();
    Ok((idx, values))
}

/// Score each candidate class value by query_match with a single occurrence
/// of the value in the class bag, and pick the argmax. The document's class
/// bag must be empty — its other bags are the evidence.
pub fn classify<R: Rng + ?Sized>(
    model: &ComponentModel,
    doc: &Document,
    class_bag: usize,
    class_values: &[u32],
    n_samples: usize,
    rng: &mut R,
) -> Result<Classification> {
    if class_bag >= model.bags.len() {
        return Err(Error::Schema(format!(
            "model has no bag index {class_bag} to use as class bag"
        )));
    }
    if class_values.is_empty() {
        return Err(Error::Validation("no class values to score".into()));
    }
    if doc.bags.get(class_bag).is_some_and(|c| !c.is_empty()) {
        return Err(Error::Validation(format!(
            "document {:?} already has counts in the class bag",
            doc.id
        )));
    }
    let mut scores = Vec::with_capacity(class_values.len());
    for &v in class_values {
        let mut query: Vec<SparseCounts> = vec![Vec::new(); model.bags.len()];
        query[class_bag] = vec![(v, 1)];
        scores.push(query_match(model, doc, &query, n_samples, DEFAULT_FIT_BURN_IN, rng)?);
    }
    let (predicted, tie) = argmax_with_tie(&scores);
    Ok(Classification { id: doc.id.clone(), predicted, scores, tie })
}
