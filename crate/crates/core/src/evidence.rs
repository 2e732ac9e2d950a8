//! Model evidence from Gibbs output: the harmonic-mean estimator over
//! complete-data likelihoods, with the K! exchangeability correction, and the
//! model-selection sweep over candidate component counts.

use std::time::Instant;

use rayon::prelude::*;

use crate::corpus::{Corpus, Document, SparseCounts};
use crate::error::{Error, Result};
use crate::model::{init_model, BagModel, ComponentModel, InitOptions, Variant};
use crate::rng::{derive_seed, logsumexp, TAG_SELECT};
use crate::sampler::{train, TrainConfig, TrainResult};

/// log p(counts | m, omega) for per-bag sparse counts: sum over bags and
/// token types of r * ln(sum_k m_k omega_kj). The multinomial combinatoric
/// factor is a constant in the parameters and is omitted throughout.
pub fn counts_log_likelihood(bag_counts: &[SparseCounts], m: &[f64], bags: &[BagModel]) -> f64 {
    let mut total = 0.0;
    for (b, counts) in bag_counts.iter().enumerate() {
        let omega = &bags[b].omega;
        for &(j, r) in counts {
            let p: f64 = m
                .iter()
                .zip(omega)
                .map(|(&mk, row)| mk * row[j as usize])
                .sum();
            total += r as f64 * p.ln();
        }
    }
    total
}

/// log p(doc | m, omega); see [`counts_log_likelihood`].
pub fn doc_log_likelihood(doc: &Document, m: &[f64], bags: &[BagModel]) -> f64 {
    counts_log_likelihood(&doc.bags, m, bags)
}

/// Complete-data log likelihood of the whole corpus at per-document
/// proportions `m_all` and the model's omega. Document contributions are
/// computed in parallel but summed in document order.
pub fn complete_data_log_likelihood(
    corpus: &Corpus,
    m_all: &[Vec<f64>],
    model: &ComponentModel,
) -> Result<f64> {
    if m_all.len() != corpus.documents.len() {
        return Err(Error::Dimension(format!(
            "{} proportion vectors for {} documents",
            m_all.len(),
            corpus.documents.len()
        )));
    }
    let per_doc: Vec<f64> = corpus
        .documents
        .par_iter()
        .zip(m_all.par_iter())
        .map(|(doc, m)| doc_log_likelihood(doc, m, &model.bags))
        .collect();
    let total: f64 = per_doc.iter().sum();
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::non_finite("corpus log likelihood"))
    }
}

#[derive(Debug, Clone)]
pub struct EvidenceEstimate {
    pub k: usize,
    pub log_evidence: f64,
    pub n_samples: usize,
    /// Sample variance (ddof 1) of the log-likelihood draws — a convergence
    /// diagnostic, not an error bar on the estimate.
    pub variance_diag: f64,
    pub seconds: f64,
}

/// Harmonic-mean evidence from recorded complete-data log likelihoods:
/// ln p(corpus) ≈ ln N − ln Σ_n exp(−loglik_n) − ln K!.
pub fn estimate_log_evidence(loglik_samples: &[f64], k: usize) -> Result<f64> {
    if loglik_samples.is_empty() {
        return Err(Error::Validation("no likelihood samples".into()));
    }
    if loglik_samples.iter().any(|l| !l.is_finite()) {
        return Err(Error::non_finite("likelihood sample"));
    }
    let neg: Vec<f64> = loglik_samples.iter().map(|&l| -l).collect();
    let ln_k_fact: f64 = (1..=k as u64).map(|i| (i as f64).ln()).sum();
    Ok((loglik_samples.len() as f64).ln() - logsumexp(&neg) - ln_k_fact)
}

fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[derive(Debug)]
pub struct SelectionRun {
    pub estimate: EvidenceEstimate,
    pub result: TrainResult,
}

/// Train once per candidate K and score each by harmonic-mean evidence.
/// Every candidate gets its own derived seed so runs are independent but the
/// sweep as a whole is reproducible.
pub fn select_k(
    corpus: &Corpus,
    ks: &[usize],
    variant: Variant,
    opts: &InitOptions,
    base: &TrainConfig,
) -> Result<Vec<SelectionRun>> {
    if ks.is_empty() {
        return Err(Error::Validation("no candidate component counts".into()));
    }
    let mut runs = Vec::with_capacity(ks.len());
    for &k in ks {
        let start = Instant::now();
        let seed = derive_seed(base.seed, TAG_SELECT, k as u64);
        let model = init_model(corpus, k, variant, None, opts, seed)?;
        let config = TrainConfig { seed, ..base.clone() };
        let result = train(corpus, &model, &config)?;
        let log_evidence = estimate_log_evidence(&result.loglik_samples, k)?;
        runs.push(SelectionRun {
            estimate: EvidenceEstimate {
                k,
                log_evidence,
                n_samples: result.loglik_samples.len(),
                variance_diag: sample_variance(&result.loglik_samples),
                seconds: start.elapsed().as_secs_f64(),
            },
            result,
        });
    }
    Ok(runs)
}

/// Index of the best run by log evidence.
pub fn best_run(runs: &[SelectionRun]) -> usize {
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.estimate.log_evidence > runs[best].estimate.log_evidence {
            best = i;
        }
    }
    best
}
