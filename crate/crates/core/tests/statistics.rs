//! Monte Carlo checks of the samplers and diagnostics against exact laws.

mod common;

use std::sync::Arc;

use focksep::diagnostics::{collision_frequencies, min_separation, trial_seed, ExperimentConfig};
use focksep::grid::count_cells;
use focksep::prob::{chernoff_bound, poisson_binomial_pmf, ChernoffKind};
use focksep::{AnnularGrid, HybridSampler, RadialModel, RadialWeight, RhoSolverConfig, WeightSpec};
use proptest::prelude::*;
use rand::Rng;
use rayon::prelude::*;

fn model(alpha: f64) -> Arc<RadialModel> {
    Arc::new(RadialModel::new(&RadialWeight::power(alpha).unwrap(), &RhoSolverConfig::default()).unwrap())
}

fn annulus_counts(sampler: &HybridSampler, n: usize, trials: u64, base: u64) -> Vec<usize> {
    let grid = AnnularGrid::new(1, false, sampler.window_r()).unwrap();
    (0..trials)
        .into_par_iter()
        .map(|i| count_cells(&sampler.sample(trial_seed(base, i)), &grid).unwrap().total(n) as usize)
        .collect()
}

fn ks_statistic(a: &[usize], b: &[usize]) -> f64 {
    let top = a.iter().chain(b).copied().max().unwrap_or(0);
    let cdf = |v: &[usize], m: usize| v.iter().filter(|x| **x <= m).count() as f64 / v.len() as f64;
    (0..=top).map(|m| (cdf(a, m) - cdf(b, m)).abs()).fold(0.0, f64::max)
}

#[test]
fn counts_follow_the_bernoulli_sum_law() {
    let m = model(1.5);
    let n = 4;
    let sampler = HybridSampler::new(m.clone(), n as f64, 1e-9, None).unwrap();
    let counts = annulus_counts(&sampler, n, 10_000, 5);
    let probs: Vec<f64> = sampler
        .laws()
        .iter()
        .map(|law| law.cdf((n * n) as f64) - law.cdf(((n - 1) * (n - 1)) as f64))
        .collect();
    let exact = poisson_binomial_pmf(&probs).unwrap().into_vec();
    let empirical = common::histogram(counts.iter().copied());
    let distance = common::l1(&empirical, &exact);
    let noise: f64 = (0..200u64)
        .into_par_iter()
        .map(|b| {
            let mut r = common::rng(9);
            r.set_stream(b);
            let boot = common::histogram((0..counts.len()).map(|_| counts[r.random_range(0..counts.len())]));
            common::l1(&boot, &empirical)
        })
        .collect::<Vec<_>>()
        .iter()
        .sum::<f64>()
        / 200.0;
    assert!(distance < 3.0 * noise, "L1 {distance} vs noise {noise}");
}

#[test]
fn restricting_a_larger_window_matches_sampling_directly() {
    let m = model(1.5);
    let (small, large) = (5.0, 9.0);
    let direct = HybridSampler::new(m.clone(), small, 1e-9, None).unwrap();
    let wide = HybridSampler::new(m, large, 1e-9, None).unwrap();
    let trials = 4000u64;
    let a: Vec<usize> = (0..trials).into_par_iter().map(|i| direct.sample(trial_seed(1, i)).len()).collect();
    let b: Vec<usize> = (0..trials)
        .into_par_iter()
        .map(|i| wide.sample(trial_seed(2, i)).restrict(small).len())
        .collect();
    let d = ks_statistic(&a, &b);
    // two-sample Kolmogorov-Smirnov at level 0.01
    let critical = 1.628 * (2.0 / trials as f64).sqrt();
    assert!(d < critical, "D = {d}, critical {critical}");
}

#[test]
fn large_deviations_respect_the_chernoff_bound() {
    let m = model(2.0);
    let n = 2;
    let sampler = HybridSampler::new(m.clone(), n as f64, 1e-9, None).unwrap();
    let trials = 20_000u64;
    let counts = annulus_counts(&sampler, n, trials, 3);
    let mu = m.mu_n_exact(n).unwrap().value;
    let hits = counts.iter().filter(|c| **c as f64 >= 2.0 * mu).count() as f64 / trials as f64;
    let bound = chernoff_bound(mu, 1.0, ChernoffKind::UpperTail).unwrap();
    let sigma = (bound * (1.0 - bound) / trials as f64).sqrt();
    assert!(hits <= bound + 3.0 * sigma, "P(N >= 2mu) = {hits}, bound {bound}");
}

#[test]
fn sparse_annuli_collide_at_the_quadratic_rate() {
    let mut cfg = ExperimentConfig::new(WeightSpec::Power { alpha: 0.5 }, vec![12.0], 100_000);
    cfg.n_max = 12;
    cfg.base_seed = 21;
    let report = collision_frequencies(&cfg, &RhoSolverConfig::default(), None).unwrap();
    let mut checked = 0;
    for row in report.rows.iter().filter(|r| r.mu <= 0.5 && r.proxy * cfg.trials as f64 >= 20.0) {
        let ratio = row.frequency / row.proxy;
        assert!((0.1..=10.0).contains(&ratio), "n = {}: ratio {ratio}", row.n);
        // the birthday prediction should sit inside the Wilson interval most of the time
        assert!(row.predicted > 0.5 * row.ci_low && row.predicted < 2.0 * row.ci_high, "{row:?}");
        checked += 1;
    }
    assert!(checked >= 3, "only {checked} sparse annuli had enough collisions");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn separation_never_grows_with_the_window(seed in any::<u64>()) {
        let m = model(1.5);
        let sampler = HybridSampler::new(m, 12.0, 1e-9, None).unwrap();
        let s = sampler.sample(seed);
        let mut last = f64::INFINITY;
        for r in [3.0, 5.0, 8.0, 12.0] {
            let sub = s.restrict(r);
            let sep = if sub.len() < 2 { f64::INFINITY } else { min_separation(&sub).unwrap() };
            prop_assert!(sep <= last);
            last = sep;
        }
    }
}
