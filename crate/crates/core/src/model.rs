//! Model parameters for all three variants, the tree-to-proportions mapping
//! and its inverse, prior construction, node averaging for display, and the
//! JSON model file.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::{substream, TAG_INIT_OMEGA};

pub const MODEL_FORMAT: &str = "dpca-model/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Flat admixture: per-document proportions m ~ Dirichlet(alpha).
    Dirichlet,
    /// Discrete ICA: per-document intensities lambda_k ~ Gamma(alpha_k, 1).
    GammaPoisson,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Dirichlet => write!(f, "dirichlet"),
            Variant::GammaPoisson => write!(f, "gamma-poisson"),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    /// Beta(alpha1, alpha2) stop prior; unused (q = 1) at leaves.
    pub alpha1: f64,
    pub alpha2: f64,
    /// Dirichlet branch prior, one entry per child.
    pub beta: Vec<f64>,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TopicTree {
    pub nodes: Vec<TreeNode>,
}

impl TopicTree {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Complete tree with the given branching factor and depth (number of
    /// levels), nodes numbered breadth-first from the root. Depth 3 with
    /// branching 7 gives 1 + 7 + 49 = 57 nodes. Stop priors follow the
    /// defaults: Beta(1,10) at the root, Beta(10,60) at lower parents, and
    /// branch priors beta = 1/B per child.
    pub fn balanced(branching: usize, depth: usize) -> Result<TopicTree> {
        if branching < 1 || depth < 1 {
            return Err(Error::Validation(format!(
                "tree spec needs branching >= 1 and depth >= 1, got {branching},{depth}"
            )));
        }
        let mut nodes: Vec<TreeNode> = vec![TreeNode {
            parent: None,
            children: Vec::new(),
            alpha1: 1.0,
            alpha2: 1.0,
            beta: Vec::new(),
        }];
        let mut level_start = 0usize;
        let mut level_len = 1usize;
        for level in 1..depth {
            let next_start = nodes.len();
            for p in level_start..level_start + level_len {
                let (a1, a2) = if level == 1 { (1.0, 10.0) } else { (10.0, 60.0) };
                nodes[p].alpha1 = a1;
                nodes[p].alpha2 = a2;
                nodes[p].beta = vec![1.0 / branching as f64; branching];
                for _ in 0..branching {
                    let idx = nodes.len();
                    nodes[p].children.push(idx);
                    nodes.push(TreeNode {
                        parent: Some(p),
                        children: Vec::new(),
                        alpha1: 1.0,
                        alpha2: 1.0,
                        beta: Vec::new(),
                    });
                }
            }
            level_start = next_start;
            level_len *= branching;
        }
        let tree = TopicTree { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::Validation("tree has no nodes".into()));
        }
        if self.nodes[0].parent.is_some() {
            return Err(Error::Validation("node 0 must be the root".into()));
        }
        for (k, node) in self.nodes.iter().enumerate() {
            if k > 0 && node.parent.is_none() {
                return Err(Error::Validation(format!("node {k} is a second root")));
            }
            if node.beta.len() != node.children.len() {
                return Err(Error::Validation(format!(
                    "node {k}: {} beta entries for {} children",
                    node.beta.len(),
                    node.children.len()
                )));
            }
            if !node.is_leaf() && (node.alpha1 <= 0.0 || node.alpha2 <= 0.0) {
                return Err(Error::Validation(format!("node {k}: non-positive Beta prior")));
            }
            if node.beta.iter().any(|&b| b <= 0.0) {
                return Err(Error::Validation(format!("node {k}: non-positive beta")));
            }
            for &c in &node.children {
                if c >= self.nodes.len() || self.nodes[c].parent != Some(k) {
                    return Err(Error::Validation(format!(
                        "node {k}: child {c} does not point back"
                    )));
                }
            }
        }
        // reachability doubles as the acyclicity check
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            if seen[k] {
                return Err(Error::Validation(format!("node {k} reached twice")));
            }
            seen[k] = true;
            stack.extend(&self.nodes[k].children);
        }
        if !seen.iter().all(|&s| s) {
            return Err(Error::Validation("unreachable nodes in tree".into()));
        }
        Ok(())
    }

    /// Node indices with every parent before its children.
    pub fn topological(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut stack = vec![0usize];
        while let Some(k) = stack.pop() {
            order.push(k);
            stack.extend(self.nodes[k].children.iter().rev());
        }
        order
    }

    /// Subtree totals: out[k] = x[k] + sum over descendants of x.
    pub fn subtree_sums(&self, x: &[f64]) -> Vec<f64> {
        let mut sums = x.to_vec();
        for &k in self.topological().iter().rev() {
            for &c in &self.nodes[k].children {
                sums[k] += sums[c];
            }
        }
        sums
    }
}

/// Map per-node stop probabilities q and branch probabilities n to component
/// proportions: m_k = q_k * n_k * prod over ancestors l of n_l (1 - q_l),
/// with n = 1 at the root and q = 1 at leaves.
pub fn map_tree_to_proportions(q: &[f64], n: &[f64], tree: &TopicTree) -> Result<Vec<f64>> {
    let k_total = tree.len();
    debug_assert_eq!(q.len(), k_total);
    debug_assert_eq!(n.len(), k_total);
    for (k, node) in tree.nodes.iter().enumerate() {
        if !node.children.is_empty() {
            let s: f64 = node.children.iter().map(|&c| n[c]).sum();
            if (s - 1.0).abs() > 1e-9 {
                return Err(Error::Validation(format!(
                    "node {k}: children's branch probabilities sum to {s}, not 1"
                )));
            }
        }
    }
    let mut reach = vec![0.0; k_total];
    let mut m = vec![0.0; k_total];
    for k in tree.topological() {
        let r = match tree.nodes[k].parent {
            None => 1.0,
            Some(p) => n[k] * reach[p] * (1.0 - q[p]),
        };
        reach[k] = r;
        m[k] = if tree.nodes[k].is_leaf() { r } else { q[k] * r };
    }
    Ok(m)
}

/// Invert proportions to the (q, n) dual representation: q_k is the share of
/// node k in its own subtree's mass, n_l the share of l's subtree among its
/// siblings'. Zero subtree mass falls back to q = 1 and uniform n.
pub fn invert_proportions_to_tree(m: &[f64], tree: &TopicTree) -> (Vec<f64>, Vec<f64>) {
    let mass = tree.subtree_sums(m);
    let k_total = tree.len();
    let mut q = vec![1.0; k_total];
    let mut n = vec![1.0; k_total];
    for (k, node) in tree.nodes.iter().enumerate() {
        if !node.is_leaf() {
            if mass[k] > 0.0 {
                q[k] = (m[k] / mass[k]).clamp(0.0, 1.0);
            } // else: no mass anywhere in the subtree; q stays 1
            let below: f64 = node.children.iter().map(|&c| mass[c]).sum();
            if below > 0.0 {
                for &c in &node.children {
                    n[c] = mass[c] / below;
                }
            } else {
                for &c in &node.children {
                    n[c] = 1.0 / node.children.len() as f64;
                }
            }
        }
    }
    (q, n)
}

/// Display average for a node: convex combination of the node's word
/// multinomial with its direct children's, weighted by m_bar.
pub fn node_word_average(
    tree: &TopicTree,
    m_bar: &[f64],
    omega: &[Vec<f64>],
    node: usize,
) -> Vec<f64> {
    let members: Vec<usize> = std::iter::once(node)
        .chain(tree.nodes[node].children.iter().cloned())
        .collect();
    let total: f64 = members.iter().map(|&k| m_bar[k]).sum();
    let weights: Vec<f64> = if total > 0.0 {
        members.iter().map(|&k| m_bar[k] / total).collect()
    } else {
        eprintln!("warning: node {node} and children carry no mass; averaging uniformly");
        vec![1.0 / members.len() as f64; members.len()]
    };
    let j = omega[node].len();
    let mut out = vec![0.0; j];
    for (&k, &w) in members.iter().zip(&weights) {
        for (o, &x) in out.iter_mut().zip(&omega[k]) {
            *o += w * x;
        }
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BagModel {
    pub name: String,
    /// Vocabulary tokens in index order; omega columns follow this order.
    pub tokens: Vec<String>,
    /// Dirichlet pseudo-counts on each component row.
    pub prior: Vec<f64>,
    /// K rows, each a multinomial over the bag's vocabulary.
    pub omega: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComponentModel {
    pub format: String,
    pub k: usize,
    pub variant: Variant,
    /// Dirichlet (or per-component Gamma shape) parameters on proportions.
    pub alpha: Vec<f64>,
    /// Corpus-average proportions from training; uniform before training.
    pub m_bar: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tree: Option<TopicTree>,
    pub bags: Vec<BagModel>,
}

#[derive(Debug, Clone)]
pub struct InitOptions {
    /// Total concentration of the uniform proportions prior: alpha_k = total / K.
    pub alpha_total: f64,
    /// Total pseudo-count per omega row, spread by the smoothed unigram.
    pub prior_strength: f64,
}

impl Default for InitOptions {
    fn default() -> Self {
        InitOptions { alpha_total: 1.0, prior_strength: 1.0 }
    }
}

/// Build an untrained model over the corpus's vocabularies. The omega prior
/// for each bag is `prior_strength` times the Laplace-smoothed corpus unigram
/// p_j = (total_freq_j + 1) / (T + J); rows start at that unigram perturbed
/// by seeded multiplicative noise.
pub fn init_model(
    corpus: &Corpus,
    k: usize,
    variant: Variant,
    tree: Option<TopicTree>,
    opts: &InitOptions,
    seed: u64,
) -> Result<ComponentModel> {
    if k == 0 {
        return Err(Error::Validation("K must be at least 1".into()));
    }
    if let Some(t) = &tree {
        t.validate()?;
        if t.len() != k {
            return Err(Error::Validation(format!(
                "tree has {} nodes but K = {k}",
                t.len()
            )));
        }
        if variant != Variant::Dirichlet {
            return Err(Error::Validation(
                "hierarchical components require the dirichlet variant".into(),
            ));
        }
    }
    if opts.alpha_total <= 0.0 || opts.prior_strength <= 0.0 {
        return Err(Error::Validation("alpha_total and prior_strength must be positive".into()));
    }
    let mut bags = Vec::with_capacity(corpus.vocabularies.len());
    for (b, vocab) in corpus.vocabularies.iter().enumerate() {
        let j = vocab.len();
        if j == 0 {
            return Err(Error::EmptyVocabulary { bag: vocab.bag_name.clone() });
        }
        let t: u64 = vocab.total_freq.iter().sum();
        let denom = (t + j as u64) as f64;
        let unigram: Vec<f64> = vocab
            .total_freq
            .iter()
            .map(|&f| (f + 1) as f64 / denom)
            .collect();
        let prior: Vec<f64> = unigram.iter().map(|&p| opts.prior_strength * p).collect();
        let mut omega = Vec::with_capacity(k);
        for row_k in 0..k {
            let mut rng = substream(seed, TAG_INIT_OMEGA, b as u64, row_k as u64);
            let mut row: Vec<f64> = unigram
                .iter()
                .map(|&p| p * rng.random_range(0.5..1.5))
                .collect();
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= z);
            omega.push(row);
        }
        bags.push(BagModel {
            name: vocab.bag_name.clone(),
            tokens: vocab.tokens.clone(),
            prior,
            omega,
        });
    }
    Ok(ComponentModel {
        format: MODEL_FORMAT.to_string(),
        k,
        variant,
        alpha: vec![opts.alpha_total / k as f64; k],
        m_bar: vec![1.0 / k as f64; k],
        tree,
        bags,
    })
}

impl ComponentModel {
    pub fn bag_index(&self, name: &str) -> Option<usize> {
        self.bags.iter().position(|b| b.name == name)
    }

    /// Rebuild vocabularies (token -> index maps) for loading corpora against
    /// this model. Frequencies start at zero and are recounted on load.
    pub fn vocabularies(&self) -> Vec<crate::corpus::Vocabulary> {
        self.bags
            .iter()
            .map(|bag| {
                let token_index = bag
                    .tokens
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i))
                    .collect();
                crate::corpus::Vocabulary {
                    bag_name: bag.name.clone(),
                    tokens: bag.tokens.clone(),
                    token_index,
                    doc_freq: vec![0; bag.tokens.len()],
                    total_freq: vec![0; bag.tokens.len()],
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::ModelFormat(format!(
                "unsupported format {:?}, expected {MODEL_FORMAT:?}",
                self.format
            )));
        }
        if self.k == 0 {
            return Err(Error::ModelFormat("K must be at least 1".into()));
        }
        if self.alpha.len() != self.k || self.m_bar.len() != self.k {
            return Err(Error::ModelFormat(format!(
                "alpha/m_bar length must equal K = {}",
                self.k
            )));
        }
        if self.alpha.iter().any(|&a| !(a > 0.0)) {
            return Err(Error::ModelFormat("alpha entries must be positive".into()));
        }
        if let Some(tree) = &self.tree {
            tree.validate()?;
            if tree.len() != self.k {
                return Err(Error::ModelFormat(format!(
                    "tree node count {} != K = {}",
                    tree.len(),
                    self.k
                )));
            }
            if self.variant != Variant::Dirichlet {
                return Err(Error::ModelFormat(
                    "hierarchical model must use the dirichlet variant".into(),
                ));
            }
        }
        for bag in &self.bags {
            let j = bag.tokens.len();
            if j == 0 {
                return Err(Error::ModelFormat(format!("bag {:?} has no tokens", bag.name)));
            }
            if bag.prior.len() != j {
                return Err(Error::ModelFormat(format!(
                    "bag {:?}: prior length {} != J = {j}",
                    bag.name,
                    bag.prior.len()
                )));
            }
            if bag.prior.iter().any(|&p| !(p > 0.0)) {
                return Err(Error::ModelFormat(format!(
                    "bag {:?}: prior entries must be positive",
                    bag.name
                )));
            }
            if bag.omega.len() != self.k {
                return Err(Error::ModelFormat(format!(
                    "bag {:?}: {} omega rows for K = {}",
                    bag.name,
                    bag.omega.len(),
                    self.k
                )));
            }
            for (r, row) in bag.omega.iter().enumerate() {
                if row.len() != j {
                    return Err(Error::ModelFormat(format!(
                        "bag {:?} row {r}: length {} != J = {j}",
                        bag.name,
                        row.len()
                    )));
                }
                if row.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
                    return Err(Error::ModelFormat(format!(
                        "bag {:?} row {r}: negative or non-finite entry",
                        bag.name
                    )));
                }
                let s: f64 = row.iter().sum();
                if (s - 1.0).abs() > 1e-9 {
                    return Err(Error::ModelFormat(format!(
                        "bag {:?} row {r}: sums to {s}, not 1",
                        bag.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.validate()?;
        let json = serde_json::to_string_pretty(self).expect("model serializes");
        std::fs::write(path, json).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn load(path: &Path) -> Result<ComponentModel> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<ComponentModel> {
        let model: ComponentModel =
            serde_json::from_str(text).map_err(|e| Error::ModelFormat(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

/// Top-M (token, probability) pairs of a word multinomial, descending, ties
/// by token index.
pub fn top_tokens<'a>(bag: &'a BagModel, row: &[f64], m: usize) -> Vec<(&'a str, f64)> {
    let mut ranked: Vec<(usize, f64)> = row.iter().cloned().enumerate().collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .take(m)
        .map(|(j, p)| (bag.tokens[j].as_str(), p))
        .collect()
}
