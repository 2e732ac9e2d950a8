//! Seeded substreams and the low-level samplers shared by training and inference.
//!
//! Every random decision in the crate draws from a `ChaCha8Rng` keyed by
//! (master seed, tag, a, b). Substreams are independent of scheduling, so a
//! run is reproducible at any worker count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Gamma};

pub const TAG_INIT_OMEGA: u64 = 1;
pub const TAG_DOC: u64 = 2;
pub const TAG_OMEGA: u64 = 3;
pub const TAG_SELECT: u64 = 4;
pub const TAG_FIT: u64 = 5;
pub const TAG_QUERY: u64 = 6;
pub const TAG_RERANK: u64 = 7;

/// Independent generator for the (tag, a, b) cell of the master seed's lattice.
pub fn substream(master: u64, tag: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&master.to_le_bytes());
    key[8..16].copy_from_slice(&tag.to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// Derive a fresh master seed for a nested job (e.g. per-K training runs).
pub fn derive_seed(master: u64, tag: u64, a: u64) -> u64 {
    substream(master, tag, a, 0).random()
}

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m; // empty, or all -inf (+inf propagates too)
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// ln of a Gamma(shape, 1) draw. Goes through log space for shape < 1 so that
/// tiny shapes (Dirichlet parameters like 1/K or sparse omega priors) cannot
/// underflow to zero.
pub fn sample_log_gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    assert!(shape > 0.0, "gamma shape must be positive, got {shape}");
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).unwrap();
        g.sample(rng).ln()
    } else {
        // Gamma(a) = Gamma(a+1) * U^(1/a), taken in log space.
        let g = Gamma::new(shape + 1.0, 1.0).unwrap();
        let boost: f64 = g.sample(rng);
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        boost.ln() + u.ln() / shape
    }
}

/// Dirichlet(alphas) draw, normalized in log space. Entries may round to 0.0
/// when more than ~700 nats below the largest, but the vector always sums to 1.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Vec<f64> {
    if alphas.len() == 1 {
        return vec![1.0];
    }
    let logs: Vec<f64> = alphas.iter().map(|&a| sample_log_gamma(a, rng)).collect();
    let z = logsumexp(&logs);
    logs.iter().map(|&l| (l - z).exp()).collect()
}

/// Multinomial(n, p) with p_k proportional to weights[k], via the conditional
/// binomial chain. Returns None when n > 0 but every weight is zero.
pub fn sample_multinomial<R: Rng + ?Sized>(
    n: u64,
    weights: &[f64],
    rng: &mut R,
) -> Option<Vec<u64>> {
    let k = weights.len();
    let mut out = vec![0u64; k];
    if n == 0 {
        return Some(out);
    }
    // suffix[i] = weights[i] + ... + weights[k-1], accumulated once
    let mut suffix = vec![0.0; k + 1];
    for i in (0..k).rev() {
        suffix[i] = suffix[i + 1] + weights[i];
    }
    let mut remaining = n;
    for i in 0..k {
        if remaining == 0 {
            break;
        }
        if suffix[i] <= 0.0 {
            return None; // mass exhausted but counts remain
        }
        if i == k - 1 || suffix[i + 1] <= 0.0 {
            out[i] = remaining;
            remaining = 0;
            break;
        }
        let p = (weights[i] / suffix[i]).clamp(0.0, 1.0);
        let draw = Binomial::new(remaining, p).unwrap().sample(rng);
        out[i] = draw;
        remaining -= draw;
    }
    if remaining > 0 {
        return None;
    }
    Some(out)
}
