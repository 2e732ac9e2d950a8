//! Gibbs sweeps for the three variants and the training loop: burn-in,
//! recording with posterior-mean omega averaging, and per-cycle likelihoods.

use std::time::Instant;

use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};
use crate::evidence::doc_log_likelihood;
use crate::model::{
    map_tree_to_proportions, BagModel, ComponentModel, TopicTree, Variant,
};
use crate::rng::{sample_dirichlet, sample_log_gamma, sample_multinomial, substream, TAG_DOC, TAG_OMEGA};

/// One document's sampled assignment state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignments {
    /// Per bag: (token index, per-component counts w_{.,j}).
    pub w: Vec<Vec<(u32, Vec<u32>)>>,
    /// Per-component totals c_k over all bags.
    pub c: Vec<u64>,
}

/// Partition each observed count r among the K components with probabilities
/// proportional to weights_k * omega_{k,j}. Weights are m (flat, hierarchical)
/// or the gamma intensities lambda (discrete ICA); the draw only sees ratios,
/// so the two parameterizations sample identically given the same counts.
pub fn sample_assignments<R: Rng + ?Sized>(
    doc: &Document,
    weights: &[f64],
    bags: &[BagModel],
    rng: &mut R,
) -> Result<Assignments> {
    let k_total = weights.len();
    let mut w = Vec::with_capacity(doc.bags.len());
    let mut c = vec![0u64; k_total];
    let mut p = vec![0.0; k_total];
    for (b, counts) in doc.bags.iter().enumerate() {
        let omega = &bags[b].omega;
        let mut bag_w = Vec::with_capacity(counts.len());
        for &(j, r) in counts {
            for k in 0..k_total {
                p[k] = weights[k] * omega[k][j as usize];
            }
            let draw = sample_multinomial(r as u64, &p, rng).ok_or_else(|| {
                Error::non_finite(format!(
                    "assignment weights for bag {:?} token {j} are all zero",
                    bags[b].name
                ))
            })?;
            debug_assert_eq!(draw.iter().sum::<u64>(), r as u64);
            for (k, &d) in draw.iter().enumerate() {
                c[k] += d;
            }
            bag_w.push((j, draw.iter().map(|&d| d as u32).collect()));
        }
        w.push(bag_w);
    }
    Ok(Assignments { w, c })
}

/// Conjugate update for flat proportions: m ~ Dirichlet(alpha + c).
pub fn sample_proportions_flat<R: Rng + ?Sized>(
    c: &[u64],
    alpha: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let post: Vec<f64> = alpha.iter().zip(c).map(|(&a, &n)| a + n as f64).collect();
    sample_dirichlet(&post, rng)
}

/// Conjugate update for discrete-ICA intensities:
/// lambda_k ~ Gamma(alpha_k + c_k, rate 2) — unit prior rate plus unit
/// Poisson exposure.
pub fn sample_intensities_dica<R: Rng + ?Sized>(
    c: &[u64],
    alpha: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    alpha
        .iter()
        .zip(c)
        .map(|(&a, &n)| (sample_log_gamma(a + n as f64, rng) - std::f64::consts::LN_2).exp())
        .collect()
}

/// Posterior parameters for the hierarchical sweep, given per-node counts c:
/// at each internal node, q ~ Beta(alpha1 + c_k, alpha2 + S_k - c_k) with S_k
/// the subtree count, and the children's n ~ Dirichlet(beta + subtree counts).
pub fn tree_posterior_params(
    c: &[u64],
    tree: &TopicTree,
) -> (Vec<(f64, f64)>, Vec<Vec<f64>>) {
    let counts: Vec<f64> = c.iter().map(|&x| x as f64).collect();
    let subtree = tree.subtree_sums(&counts);
    let mut beta_params = Vec::with_capacity(tree.len());
    let mut q_params = Vec::with_capacity(tree.len());
    for (k, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            q_params.push((1.0, 0.0)); // placeholder; q is pinned to 1
            beta_params.push(Vec::new());
        } else {
            q_params.push((
                node.alpha1 + counts[k],
                node.alpha2 + (subtree[k] - counts[k]),
            ));
            beta_params.push(
                node.children
                    .iter()
                    .zip(&node.beta)
                    .map(|(&child, &b)| b + subtree[child])
                    .collect(),
            );
        }
    }
    (q_params, beta_params)
}

/// Hierarchical sweep for one document: sample (q, n) from their conjugate
/// conditionals and map back to proportions.
pub fn sample_tree_params<R: Rng + ?Sized>(
    c: &[u64],
    tree: &TopicTree,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let (q_params, beta_params) = tree_posterior_params(c, tree);
    let mut q = vec![1.0; tree.len()];
    let mut n = vec![1.0; tree.len()];
    for (k, node) in tree.nodes.iter().enumerate() {
        if node.is_leaf() {
            continue;
        }
        let (a, b) = q_params[k];
        q[k] = Beta::new(a, b).expect("positive Beta parameters").sample(rng);
        let draw = sample_dirichlet(&beta_params[k], rng);
        for (&child, &v) in node.children.iter().zip(&draw) {
            n[child] = v;
        }
    }
    let m = map_tree_to_proportions(&q, &n, tree)?;
    Ok((q, n, m))
}

/// Posterior mean of a Dirichlet row update: (prior + counts) / total.
pub fn posterior_mean_row(prior: &[f64], counts: &[u64]) -> Vec<f64> {
    let total: f64 =
        prior.iter().sum::<f64>() + counts.iter().map(|&c| c as f64).sum::<f64>();
    prior
        .iter()
        .zip(counts)
        .map(|(&p, &c)| (p + c as f64) / total)
        .collect()
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub burn_in: usize,
    pub recording: usize,
    pub seed: u64,
    /// 0 means rayon's default.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { burn_in: 100, recording: 50, seed: 0, workers: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct CycleStat {
    pub cycle: usize,
    pub log_likelihood: f64,
    /// Wall time of this cycle, seconds.
    pub seconds: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub model: ComponentModel,
    /// Per-document mean proportions over the recording cycles.
    pub summaries: Vec<Vec<f64>>,
    pub progress: Vec<CycleStat>,
    /// Complete-data log likelihoods, one per recording cycle.
    pub loglik_samples: Vec<f64>,
}

/// Per-document latent state between cycles.
pub(crate) struct DocState {
    /// Sampling weights: proportions m, or intensities lambda for dICA.
    pub(crate) weights: Vec<f64>,
    /// Proportions used in the likelihood (normalized weights for dICA).
    pub(crate) m: Vec<f64>,
}

pub(crate) fn initial_state(model: &ComponentModel) -> DocState {
    let k = model.k;
    match (&model.tree, model.variant) {
        (Some(tree), _) => {
            // prior means: q = a1/(a1+a2) at internal nodes, uniform branches
            let mut q = vec![1.0; k];
            let mut n = vec![1.0; k];
            for (i, node) in tree.nodes.iter().enumerate() {
                if !node.is_leaf() {
                    q[i] = node.alpha1 / (node.alpha1 + node.alpha2);
                    for &c in &node.children {
                        n[c] = 1.0 / node.children.len() as f64;
                    }
                }
            }
            let m = map_tree_to_proportions(&q, &n, tree).expect("prior means are valid");
            DocState { weights: m.clone(), m }
        }
        (None, Variant::Dirichlet) => {
            let total: f64 = model.alpha.iter().sum();
            let m: Vec<f64> = model.alpha.iter().map(|&a| a / total).collect();
            DocState { weights: m.clone(), m }
        }
        (None, Variant::GammaPoisson) => {
            let lambda = model.alpha.clone();
            let total: f64 = lambda.iter().sum();
            let m = lambda.iter().map(|&l| l / total).collect();
            DocState { weights: lambda, m }
        }
    }
}

/// One document's Gibbs step: assignments given the current weights and
/// omega, then fresh weights from the conjugate conditional. Returns the
/// assignments for pooling.
pub(crate) fn doc_step<R: Rng + ?Sized>(
    doc: &Document,
    state: &mut DocState,
    model: &ComponentModel,
    rng: &mut R,
) -> Result<Assignments> {
    let asg = sample_assignments(doc, &state.weights, &model.bags, rng)?;
    match (&model.tree, model.variant) {
        (Some(tree), _) => {
            let (_, _, m) = sample_tree_params(&asg.c, tree, rng)?;
            state.weights = m.clone();
            state.m = m;
        }
        (None, Variant::Dirichlet) => {
            let m = sample_proportions_flat(&asg.c, &model.alpha, rng);
            state.weights = m.clone();
            state.m = m;
        }
        (None, Variant::GammaPoisson) => {
            let lambda = sample_intensities_dica(&asg.c, &model.alpha, rng);
            let total: f64 = lambda.iter().sum();
            state.m = if total > 0.0 {
                lambda.iter().map(|&l| l / total).collect()
            } else {
                vec![1.0 / model.k as f64; model.k]
            };
            state.weights = lambda;
        }
    }
    Ok(asg)
}

/// Train by Gibbs sampling: `burn_in` full sweeps, then `recording` sweeps
/// during which the posterior-mean omega — (prior + pooled counts) / total,
/// not the sampled matrix — is averaged, per-document proportions are
/// averaged, and one complete-data log likelihood is recorded per cycle.
///
/// Deterministic for a given seed at any worker count: every document and
/// every cycle draws from its own substream, and cross-document reductions
/// are integer sums or sequential in document order.
pub fn train(corpus: &Corpus, model: &ComponentModel, config: &TrainConfig) -> Result<TrainResult> {
    if config.burn_in < 1 || config.recording < 1 {
        return Err(Error::Validation(
            "burn_in and recording must be at least 1".into(),
        ));
    }
    model.validate()?;
    for (b, vocab) in corpus.vocabularies.iter().enumerate() {
        let bag = &model.bags[b];
        if bag.name != vocab.bag_name || bag.tokens.len() != vocab.len() {
            return Err(Error::Dimension(format!(
                "model bag {:?} does not match corpus bag {:?}",
                bag.name, vocab.bag_name
            )));
        }
    }
    run_in_pool(config.workers, || train_inner(corpus, model, config))
}

pub(crate) fn run_in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    if workers == 0 {
        f()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("thread pool");
        pool.install(f)
    }
}

fn train_inner(
    corpus: &Corpus,
    init: &ComponentModel,
    config: &TrainConfig,
) -> Result<TrainResult> {
    let n_docs = corpus.documents.len();
    let k = init.k;
    let mut model = init.clone();
    let mut states: Vec<DocState> = (0..n_docs).map(|_| initial_state(&model)).collect();

    let mut avg_omega: Vec<Vec<Vec<f64>>> = model
        .bags
        .iter()
        .map(|bag| vec![vec![0.0; bag.tokens.len()]; k])
        .collect();
    let mut m_sum: Vec<Vec<f64>> = vec![vec![0.0; k]; n_docs];
    let mut progress = Vec::new();
    let mut loglik_samples = Vec::new();

    let total_cycles = config.burn_in + config.recording;
    for cycle in 1..=total_cycles {
        let start = Instant::now();
        let recording = cycle > config.burn_in;

        // per-document sweep: assignments, then proportions / intensities / tree
        let model_ref = &model;
        let assignments: Vec<Assignments> = corpus
            .documents
            .par_iter()
            .zip(states.par_iter_mut())
            .enumerate()
            .map(|(i, (doc, state))| {
                let mut rng = substream(config.seed, TAG_DOC, cycle as u64, i as u64);
                doc_step(doc, state, model_ref, &mut rng)
            })
            .collect::<Result<_>>()?;

        // pool assignment counts; integer sums, document order immaterial
        let mut pooled: Vec<Vec<Vec<u64>>> = model
            .bags
            .iter()
            .map(|bag| vec![vec![0u64; bag.tokens.len()]; k])
            .collect();
        for asg in &assignments {
            for (b, bag_w) in asg.w.iter().enumerate() {
                for (j, per_k) in bag_w {
                    for (kk, &cnt) in per_k.iter().enumerate() {
                        pooled[b][kk][*j as usize] += cnt as u64;
                    }
                }
            }
        }

        // omega: sampled matrix drives the next sweep; the posterior mean is
        // what accumulates into the recorded average
        for (b, bag) in model.bags.iter_mut().enumerate() {
            let mut rng = substream(config.seed, TAG_OMEGA, cycle as u64, b as u64);
            for kk in 0..k {
                let post: Vec<f64> = bag
                    .prior
                    .iter()
                    .zip(&pooled[b][kk])
                    .map(|(&p, &c)| p + c as f64)
                    .collect();
                bag.omega[kk] = sample_dirichlet(&post, &mut rng);
                if recording {
                    let mean = posterior_mean_row(&bag.prior, &pooled[b][kk]);
                    for (a, v) in avg_omega[b][kk].iter_mut().zip(&mean) {
                        *a += v;
                    }
                }
            }
        }

        // complete-data log likelihood of (m, sampled omega); summed in
        // document order for reproducibility
        let model_ref = &model;
        let doc_logliks: Vec<f64> = corpus
            .documents
            .par_iter()
            .zip(states.par_iter())
            .map(|(doc, state)| doc_log_likelihood(doc, &state.m, &model_ref.bags))
            .collect();
        let loglik: f64 = doc_logliks.iter().sum();
        if !loglik.is_finite() {
            return Err(Error::NonFinite {
                what: "complete-data log likelihood".into(),
                cycle: Some(cycle),
            });
        }

        if recording {
            loglik_samples.push(loglik);
            for (sum, state) in m_sum.iter_mut().zip(&states) {
                for (s, &v) in sum.iter_mut().zip(&state.m) {
                    *s += v;
                }
            }
        }
        progress.push(CycleStat {
            cycle,
            log_likelihood: loglik,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    // recorded averages become the trained model
    let rec = config.recording as f64;
    for (b, bag) in model.bags.iter_mut().enumerate() {
        for kk in 0..k {
            let row = &mut avg_omega[b][kk];
            row.iter_mut().for_each(|x| *x /= rec);
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
            bag.omega[kk] = row.clone();
        }
    }
    let summaries: Vec<Vec<f64>> = m_sum
        .into_iter()
        .map(|sums| sums.into_iter().map(|s| s / rec).collect())
        .collect();
    let mut m_bar = vec![0.0; k];
    for s in &summaries {
        for (b, &v) in m_bar.iter_mut().zip(s) {
            *b += v;
        }
    }
    if n_docs > 0 {
        m_bar.iter_mut().for_each(|x| *x /= n_docs as f64);
    }
    model.m_bar = m_bar;

    Ok(TrainResult { model, summaries, progress, loglik_samples })
}
