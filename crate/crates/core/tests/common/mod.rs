#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Poisson(λ) probabilities over `0..=m_max`, built outward from the mode in log space.
pub fn poisson_pmf(lambda: f64, m_max: usize) -> Vec<f64> {
    if lambda == 0.0 {
        let mut v = vec![0.0; m_max + 1];
        v[0] = 1.0;
        return v;
    }
    let mode = (lambda.floor() as usize).min(m_max);
    let ln_fact: f64 = (1..=mode).map(|j| (j as f64).ln()).sum();
    let mut logp = vec![0.0; m_max + 1];
    logp[mode] = mode as f64 * lambda.ln() - lambda - ln_fact;
    for m in mode + 1..=m_max {
        logp[m] = logp[m - 1] + (lambda / m as f64).ln();
    }
    for m in (0..mode).rev() {
        logp[m] = logp[m + 1] - (lambda / (m + 1) as f64).ln();
    }
    logp.into_iter().map(f64::exp).collect()
}

/// `P(Poisson(λ) >= m)` for every `m` in `0..=m_max`.
pub fn poisson_upper_tails(lambda: f64, m_max: usize) -> Vec<f64> {
    let pmf = poisson_pmf(lambda, m_max + 200 + (10.0 * lambda.sqrt()) as usize);
    let mut tails = vec![0.0; pmf.len() + 1];
    for m in (0..pmf.len()).rev() {
        tails[m] = tails[m + 1] + pmf[m];
    }
    tails.truncate(m_max + 1);
    tails
}

/// Gaussian-weight cell probabilities `p_k = P(Pois(2n²) > k) − P(Pois(2(n−1)²) > k)`.
pub fn gaussian_cell_probs(n: usize) -> Vec<f64> {
    let k_max = 2 * n * n + 400;
    let outer = poisson_upper_tails(2.0 * (n * n) as f64, k_max + 1);
    let inner = poisson_upper_tails(2.0 * ((n - 1) * (n - 1)) as f64, k_max + 1);
    (0..=k_max).map(|k| outer[k + 1] - inner[k + 1]).collect()
}

/// Law of a Bernoulli sum by enumerating all `2^n` outcomes.
pub fn brute_force_pmf(p: &[f64]) -> Vec<f64> {
    let n = p.len();
    let mut pmf = vec![0.0; n + 1];
    for mask in 0u32..(1 << n) {
        let mut prob = 1.0;
        for (i, pi) in p.iter().enumerate() {
            prob *= if mask >> i & 1 == 1 { *pi } else { 1.0 - pi };
        }
        pmf[mask.count_ones() as usize] += prob;
    }
    pmf
}

pub fn random_probs(rng: &mut ChaCha8Rng, max_len: usize, max_p: f64) -> Vec<f64> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| rng.random::<f64>() * max_p).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn l1(a: &[f64], b: &[f64]) -> f64 {
    (0..a.len().max(b.len()))
        .map(|i| (a.get(i).copied().unwrap_or(0.0) - b.get(i).copied().unwrap_or(0.0)).abs())
        .sum()
}

pub fn histogram(values: impl IntoIterator<Item = usize>) -> Vec<f64> {
    let mut h: Vec<f64> = Vec::new();
    let mut n = 0.0;
    for v in values {
        if v >= h.len() {
            h.resize(v + 1, 0.0);
        }
        h[v] += 1.0;
        n += 1.0;
    }
    h.iter_mut().for_each(|x| *x /= n);
    h
}
