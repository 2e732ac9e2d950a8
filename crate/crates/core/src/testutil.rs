//! Helpers shared by the unit tests: tiny corpora from literal JSONL lines
//! and synthetic corpora drawn from the generative process itself.

use std::collections::HashSet;
use std::io::Write as _;

use rand::Rng;

use crate::corpus::{Corpus, PruneConfig, RawDocument};
use crate::rng::{sample_dirichlet, substream};

const TAG_SYNTH: u64 = 100;

pub(crate) fn tiny_corpus(lines: &[&str], bags: &[&str]) -> Corpus {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for l in lines {
        writeln!(f, "{l}").unwrap();
    }
    let bags: Vec<String> = bags.iter().map(|s| s.to_string()).collect();
    let prune = PruneConfig { min_total: 1, min_docs: 1, stopwords: HashSet::new() };
    Corpus::load(f.path(), &bags, &prune).unwrap()
}

/// Disjoint-support component rows: row k is uniform over its own block of
/// j_total / k_comps tokens.
pub(crate) fn disjoint_omega(k_comps: usize, j_total: usize) -> Vec<Vec<f64>> {
    assert_eq!(j_total % k_comps, 0);
    let block = j_total / k_comps;
    (0..k_comps)
        .map(|k| {
            let mut row = vec![0.0; j_total];
            for j in k * block..(k + 1) * block {
                row[j] = 1.0 / block as f64;
            }
            row
        })
        .collect()
}

/// Sample a single-bag corpus from the generative process: per document
/// m ~ Dirichlet(alpha_gen), then each word picks a component by m and a
/// token by that component's row. Token "t03" style names keep lexicographic
/// order aligned with numeric order.
pub(crate) fn synth_corpus(
    true_omega: &[Vec<f64>],
    alpha_gen: &[f64],
    n_docs: usize,
    words_per_doc: usize,
    seed: u64,
) -> Corpus {
    let j_total = true_omega[0].len();
    let mut raw = Vec::with_capacity(n_docs);
    for i in 0..n_docs {
        let mut rng = substream(seed, TAG_SYNTH, i as u64, 0);
        let m = sample_dirichlet(alpha_gen, &mut rng);
        let mut counts = vec![0u32; j_total];
        for _ in 0..words_per_doc {
            let k = categorical(&m, &mut rng);
            let j = categorical(&true_omega[k], &mut rng);
            counts[j] += 1;
        }
        let bag: std::collections::BTreeMap<String, i64> = counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c > 0)
            .map(|(j, &c)| (format!("t{j:02}"), c as i64))
            .collect();
        raw.push(RawDocument {
            id: format!("d{i:03}"),
            bags: [("body".to_string(), bag)].into_iter().collect(),
            label: None,
        });
    }
    let prune = PruneConfig { min_total: 1, min_docs: 1, stopwords: HashSet::new() };
    Corpus::from_raw(&raw, &["body".to_string()], &prune).unwrap()
}

pub(crate) fn categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let total: f64 = p.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &x) in p.iter().enumerate() {
        u -= x;
        if u <= 0.0 {
            return i;
        }
    }
    p.len() - 1
}

/// Map token name order back to the generator's numeric order: column
/// permutation such that reordered[j] = omega_row[token index of "t{j:02}"].
pub(crate) fn column_order(corpus: &Corpus, bag: usize, j_total: usize) -> Vec<usize> {
    (0..j_total)
        .map(|j| corpus.vocabularies[bag].token_index[&format!("t{j:02}")])
        .collect()
}

/// Best-permutation per-row L1 distance between two row sets (greedy over all
/// permutations — row counts here are tiny).
pub(crate) fn min_perm_l1(rows: &[Vec<f64>], truth: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let k = rows.len();
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut perm: Vec<usize> = (0..k).collect();
    permute_all(&mut perm, 0, &mut |p| {
        let worst = (0..k)
            .map(|i| l1(&rows[p[i]], &truth[i]))
            .fold(0.0f64, f64::max);
        if best.as_ref().map(|(_, b)| worst < *b).unwrap_or(true) {
            best = Some((p.to_vec(), worst));
        }
    });
    best.unwrap()
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

fn permute_all(perm: &mut Vec<usize>, at: usize, visit: &mut impl FnMut(&[usize])) {
    if at == perm.len() {
        visit(perm);
        return;
    }
    for i in at..perm.len() {
        perm.swap(at, i);
        permute_all(perm, at + 1, visit);
        perm.swap(at, i);
    }
}
