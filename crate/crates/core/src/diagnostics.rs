//! Monte Carlo experiments on hybrid samples: minimum separation, per-annulus
//! cell collisions and the finite-window separation trend.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{count_cells, AnnularGrid};
use crate::prob::{poisson_binomial_pmf, uncrowded_road_prob};
use crate::radial_law::{LawCache, RadialModel};
use crate::sampler::{HybridSampler, PointSample, DEFAULT_EPS};
use crate::weight::{classify_critical_sum, ClassificationReport, RadialWeight, RhoSolverConfig, Verdict, WeightSpec};

/// Median shrink factor that counts as a shrinking trend.
pub const SHRINK_FACTOR: f64 = 0.5;
/// Largest ratio of medians that counts as a stable trend.
pub const STABLE_FACTOR: f64 = 1.5;
/// Normal quantile used for Wilson intervals.
pub const WILSON_Z: f64 = 1.959_963_984_540_054;

fn default_eps() -> f64 {
    DEFAULT_EPS
}

fn default_n_max() -> usize {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub weight: WeightSpec,
    /// Increasing window radii.
    pub r_list: Vec<f64>,
    pub trials: usize,
    /// Grid scales `l`.
    pub scales: Vec<usize>,
    /// Also count on the shifted grids.
    pub shifted: bool,
    pub base_seed: u64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    /// Largest annulus index reported by collision experiments.
    #[serde(default = "default_n_max")]
    pub n_max: usize,
}

impl ExperimentConfig {
    pub fn new(weight: WeightSpec, r_list: Vec<f64>, trials: usize) -> Self {
        Self {
            weight,
            r_list,
            trials,
            scales: vec![1],
            shifted: false,
            base_seed: 0,
            eps: DEFAULT_EPS,
            n_max: default_n_max(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::InvalidParameter("trials must be at least 1".into()));
        }
        if self.r_list.is_empty() || self.r_list.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
            return Err(Error::InvalidParameter("window radii must be positive and finite".into()));
        }
        if self.r_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("window radii must be strictly increasing".into()));
        }
        if self.scales.is_empty() || self.scales.contains(&0) {
            return Err(Error::InvalidParameter("grid scales must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {}", self.eps)));
        }
        Ok(())
    }

    pub fn r_max(&self) -> f64 {
        *self.r_list.last().expect("validated r_list is nonempty")
    }
}

/// Seed of trial `i`, derived from the base seed by SplitMix64 mixing.
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
    mix(base_seed ^ mix(trial))
}

/// Exact minimum pairwise distance.
///
/// Points are hashed into square cells of side `h`; any pair closer than `h`
/// sits in neighbouring cells, so a candidate found below `h` is the true
/// minimum. Otherwise `h` doubles.
pub fn min_separation(sample: &PointSample) -> Result<f64> {
    let pts: Vec<(f64, f64)> = sample.points.iter().map(|p| p.cartesian()).collect();
    min_distance(&pts)
}

pub fn min_distance(pts: &[(f64, f64)]) -> Result<f64> {
    if pts.len() < 2 {
        return Err(Error::TooFewPoints(pts.len()));
    }
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let span = (xmax - xmin).max(ymax - ymin);
    if span == 0.0 {
        return Ok(0.0);
    }
    let mut h = span / (pts.len() as f64).sqrt();
    loop {
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::with_capacity(pts.len());
        for (i, &(x, y)) in pts.iter().enumerate() {
            let key = (((x - xmin) / h).floor() as i64, ((y - ymin) / h).floor() as i64);
            cells.entry(key).or_default().push(i);
        }
        let mut best2 = f64::INFINITY;
        for (&(cx, cy), members) in &cells {
            for dx in -1..=1 {
                for dy in -1..=1 {
                    let Some(other) = cells.get(&(cx + dx, cy + dy)) else { continue };
                    for &i in members {
                        for &j in other {
                            if j <= i {
                                continue;
                            }
                            let (ax, ay) = pts[i];
                            let (bx, by) = pts[j];
                            best2 = best2.min((ax - bx).powi(2) + (ay - by).powi(2));
                        }
                    }
                }
            }
        }
        let best = best2.sqrt();
        if best <= h || h > 2.0 * span {
            return Ok(best);
        }
        h *= 2.0;
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0).min(p), (centre + half).min(1.0).max(p))
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    if v[lo] == v[hi] { v[lo] } else { v[lo] + (pos - lo as f64) * (v[hi] - v[lo]) }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationSummary {
    pub window_r: f64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub min: f64,
    pub max: f64,
    /// Per-trial values; `inf` when fewer than two points fall in the window.
    pub values: Vec<f64>,
}

impl SeparationSummary {
    fn from_values(window_r: f64, values: Vec<f64>) -> Self {
        Self {
            window_r,
            median: median(&values),
            q25: quantile(&values, 0.25),
            q75: quantile(&values, 0.75),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionRow {
    pub n: usize,
    pub scale_l: usize,
    pub shifted: bool,
    /// Radii `[inner, outer)` of the annulus.
    pub inner: f64,
    pub outer: f64,
    pub cells: usize,
    pub collisions: usize,
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Expected number of points in the annulus.
    pub mu: f64,
    /// `min(1, μ² / cells)`.
    pub proxy: f64,
    /// `Σ_m P(N = m) (1 − Π_{i<m} (1 − i/cells))` with the exact law of `N`.
    pub predicted: f64,
    /// Same sum with the uncrowded-road factor `(1 − m/cells)^{m−1}`.
    pub predicted_road: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionReport {
    pub weight: WeightSpec,
    pub trials: usize,
    pub base_seed: u64,
    pub window_r: f64,
    pub truncation_k: usize,
    pub rows: Vec<CollisionRow>,
    /// Sum of the empirical unit-scale, unshifted frequencies over the reported annuli.
    pub s_phi_partial: f64,
    pub min_separation: SeparationSummary,
}

/// Shared state of an experiment: model, sampler at the largest window.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub model: Arc<RadialModel>,
    pub sampler: HybridSampler,
}

impl Experiment {
    pub fn prepare(config: ExperimentConfig, solver: &RhoSolverConfig, cache: Option<&LawCache>) -> Result<Self> {
        config.validate()?;
        let weight = RadialWeight::from_spec(&config.weight)?;
        let model = Arc::new(RadialModel::new(&weight, solver)?);
        let sampler = HybridSampler::new(model.clone(), config.r_max(), config.eps, cache)?;
        Ok(Self { config, model, sampler })
    }

    pub fn samples(&self) -> Vec<PointSample> {
        (0..self.config.trials as u64)
            .into_par_iter()
            .map(|i| self.sampler.sample(trial_seed(self.config.base_seed, i)))
            .collect()
    }

    fn grids(&self) -> Result<Vec<AnnularGrid>> {
        let r = self.config.r_max();
        let mut grids = Vec::new();
        for &l in &self.config.scales {
            grids.push(AnnularGrid::new(l, false, r)?);
            if self.config.shifted {
                grids.push(AnnularGrid::new(l, true, r)?);
            }
        }
        Ok(grids)
    }

    /// Probabilities `P(|λ_k| ∈ [a, b))` for the sampled indices.
    pub fn interval_probabilities(&self, a: f64, b: f64) -> Result<Vec<f64>> {
        (0..self.sampler.truncation().k)
            .into_par_iter()
            .map(|k| {
                let norm = self.model.normalizer(k)?;
                self.model.p_k_interval(&norm, a, b)
            })
            .collect()
    }

    fn annuli(&self, grid: &AnnularGrid) -> Vec<usize> {
        let r = self.config.r_max();
        let first = if grid.shifted() { 0 } else { 1 };
        (first..=grid.n_max())
            .filter(|&n| {
                let (_, outer) = grid.annulus_bounds(n);
                outer <= r + 1e-12 && (n as f64) / (grid.scale() as f64) <= self.config.n_max as f64
            })
            .collect()
    }

    fn predict(&self, probs: &[f64], cells: usize) -> Result<(f64, f64, f64)> {
        let pmf = poisson_binomial_pmf(probs)?;
        let mu: f64 = probs.iter().sum();
        let mut exact = 0.0;
        let mut road = 0.0;
        let mut no_clash = 1.0;
        for (m, p) in pmf.probs().iter().enumerate() {
            if m >= 1 {
                no_clash *= (1.0 - (m - 1) as f64 / cells as f64).max(0.0);
            }
            exact += p * (1.0 - no_clash);
            road += p * (1.0 - uncrowded_road_prob(m.max(1), 1.0, 1.0 / cells as f64));
        }
        Ok((mu, exact, road))
    }

    pub fn collision_frequencies(&self, samples: &[PointSample]) -> Result<CollisionReport> {
        let grids = self.grids()?;
        let per_trial: Vec<Vec<Vec<usize>>> = samples
            .par_iter()
            .map(|s| grids.iter().map(|g| Ok(count_cells(s, g)?.collision_annuli())).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let mut rows = Vec::new();
        for (gi, grid) in grids.iter().enumerate() {
            let mut hits: HashMap<usize, usize> = HashMap::new();
            for trial in &per_trial {
                for &n in &trial[gi] {
                    *hits.entry(n).or_default() += 1;
                }
            }
            let annuli = self.annuli(grid);
            let computed: Vec<CollisionRow> = annuli
                .par_iter()
                .map(|&n| -> Result<CollisionRow> {
                    let (inner, outer) = grid.annulus_bounds(n);
                    let cells = grid.cells_in(n);
                    let probs = self.interval_probabilities(inner, outer)?;
                    let (mu, predicted, predicted_road) = self.predict(&probs, cells)?;
                    let collisions = hits.get(&n).copied().unwrap_or(0);
                    let (ci_low, ci_high) = wilson_interval(collisions, samples.len());
                    Ok(CollisionRow {
                        n,
                        scale_l: grid.scale(),
                        shifted: grid.shifted(),
                        inner,
                        outer,
                        cells,
                        collisions,
                        frequency: collisions as f64 / samples.len() as f64,
                        ci_low,
                        ci_high,
                        mu,
                        proxy: (mu * mu / cells as f64).min(1.0),
                        predicted,
                        predicted_road,
                    })
                })
                .collect::<Result<_>>()?;
            rows.extend(computed);
        }
        let s_phi_partial = rows
            .iter()
            .filter(|r| r.scale_l == 1 && !r.shifted)
            .map(|r| r.frequency)
            .sum();
        let seps = separations(samples);
        Ok(CollisionReport {
            weight: self.config.weight.clone(),
            trials: samples.len(),
            base_seed: self.config.base_seed,
            window_r: self.config.r_max(),
            truncation_k: self.sampler.truncation().k,
            rows,
            s_phi_partial,
            min_separation: SeparationSummary::from_values(self.config.r_max(), seps),
        })
    }
}

fn separations(samples: &[PointSample]) -> Vec<f64> {
    samples
        .par_iter()
        .map(|s| min_separation(s).unwrap_or(f64::INFINITY))
        .collect()
}

pub fn collision_frequencies(cfg: &ExperimentConfig, solver: &RhoSolverConfig, cache: Option<&LawCache>) -> Result<CollisionReport> {
    let exp = Experiment::prepare(cfg.clone(), solver, cache)?;
    let samples = exp.samples();
    exp.collision_frequencies(&samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trend {
    Shrinking,
    Stable,
    Inconclusive,
}

/// Shrinking when the last median is at most half the first; stable when all
/// medians agree within a factor 1.5.
pub fn classify_trend(medians: &[f64]) -> Trend {
    let (Some(first), Some(last)) = (medians.first(), medians.last()) else {
        return Trend::Inconclusive;
    };
    if medians.len() < 2 {
        return Trend::Inconclusive;
    }
    if first.is_finite() && *last <= SHRINK_FACTOR * first {
        return Trend::Shrinking;
    }
    let hi = medians.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = medians.iter().copied().fold(f64::INFINITY, f64::min);
    if lo > 0.0 && hi.is_finite() && hi / lo <= STABLE_FACTOR {
        return Trend::Stable;
    }
    Trend::Inconclusive
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroOneReport {
    pub weight: WeightSpec,
    pub trials: usize,
    pub base_seed: u64,
    pub analytic_verdict: Verdict,
    pub degenerate: bool,
    pub classification: ClassificationReport,
    pub empirical_trend: Trend,
    pub r_list: Vec<f64>,
    pub medians: Vec<f64>,
    pub separations: Vec<SeparationSummary>,
    pub point_counts: Vec<Vec<usize>>,
    pub collisions: CollisionReport,
}

/// Critical-sum verdict next to the finite-window trend of minimum separations.
pub fn zero_one_experiment(cfg: &ExperimentConfig, solver: &RhoSolverConfig, cache: Option<&LawCache>) -> Result<ZeroOneReport> {
    if cfg.r_list.len() < 2 {
        return Err(Error::InvalidParameter("the trend needs at least two window radii".into()));
    }
    let exp = Experiment::prepare(cfg.clone(), solver, cache)?;
    let classification = classify_critical_sum(exp.model.weight(), 256, solver)?;
    let samples = exp.samples();
    let mut separations_by_r = Vec::new();
    let mut counts = Vec::new();
    for &r in &cfg.r_list {
        let restricted: Vec<PointSample> = samples.iter().map(|s| s.restrict(r)).collect();
        counts.push(restricted.iter().map(|s| s.len()).collect());
        separations_by_r.push(SeparationSummary::from_values(r, separations(&restricted)));
    }
    let medians: Vec<f64> = separations_by_r.iter().map(|s| s.median).collect();
    let collisions = exp.collision_frequencies(&samples)?;
    Ok(ZeroOneReport {
        weight: cfg.weight.clone(),
        trials: cfg.trials,
        base_seed: cfg.base_seed,
        analytic_verdict: classification.verdict,
        degenerate: classification.degenerate,
        classification,
        empirical_trend: classify_trend(&medians),
        r_list: cfg.r_list.clone(),
        medians,
        separations: separations_by_r,
        point_counts: counts,
        collisions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{Point, SampleKind};
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn sample_of(points: &[(f64, f64)]) -> PointSample {
        PointSample {
            points: points.iter().map(|&(modulus, angle)| Point { modulus, angle, k: None }).collect(),
            window_r: 10.0,
            seed: 0,
            kind: SampleKind::Poisson,
            truncation_k: None,
        }
    }

    fn brute(pts: &[(f64, f64)]) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in i + 1..pts.len() {
                best = best.min(((pts[i].0 - pts[j].0).powi(2) + (pts[i].1 - pts[j].1).powi(2)).sqrt());
            }
        }
        best
    }

    #[test]
    fn separation_examples() {
        assert_eq!(min_separation(&sample_of(&[(0.0, 0.0), (1.0, 0.0)])).unwrap(), 1.0);
        let s = 0.7;
        let r = s / 3f64.sqrt();
        let tri = sample_of(&[(r, 0.0), (r, TAU / 3.0), (r, 2.0 * TAU / 3.0)]);
        assert!((min_separation(&tri).unwrap() - s).abs() < 1e-12);
        assert!(matches!(min_separation(&sample_of(&[(1.0, 0.0)])), Err(Error::TooFewPoints(1))));
        assert_eq!(min_separation(&sample_of(&[(1.0, 2.0), (1.0, 2.0), (3.0, 0.0)])).unwrap(), 0.0);
    }

    proptest! {
        #[test]
        fn cell_list_equals_brute_force(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 2..400)) {
            prop_assert_eq!(min_distance(&pts).unwrap(), brute(&pts));
        }

        #[test]
        fn clustered_points(n in 2usize..60, spread in 1e-6f64..1.0) {
            let pts: Vec<(f64, f64)> = (0..n).map(|i| {
                let t = i as f64 * 2.399;
                (1000.0 + spread * t.cos() * (i as f64).sqrt(), spread * t.sin() * (i as f64).sqrt())
            }).chain([(0.0, 0.0)]).collect();
            prop_assert_eq!(min_distance(&pts).unwrap(), brute(&pts));
        }
    }

    #[test]
    fn thousand_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<(f64, f64)> = (0..1000).map(|_| (rng.random::<f64>() * 20.0, rng.random::<f64>() * TAU)).collect();
        let s = sample_of(&pts);
        let cart: Vec<(f64, f64)> = s.points.iter().map(|p| p.cartesian()).collect();
        assert_eq!(min_separation(&s).unwrap(), brute(&cart));
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (10, 10), (3, 7), (500, 1000)] {
            let (lo, hi) = wilson_interval(k, n);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.403_831).abs() < 1e-5 && (hi - 0.596_169).abs() < 1e-5);
    }

    #[test]
    fn trend_rules() {
        assert_eq!(classify_trend(&[1.0, 0.6, 0.5]), Trend::Shrinking);
        assert_eq!(classify_trend(&[1.0, 1.4]), Trend::Stable);
        assert_eq!(classify_trend(&[1.0, 0.6]), Trend::Inconclusive);
        assert_eq!(classify_trend(&[f64::INFINITY, 1.0]), Trend::Inconclusive);
        assert_eq!(classify_trend(&[1.0]), Trend::Inconclusive);
    }

    #[test]
    fn trial_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|i| trial_seed(5, i)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(trial_seed(1, 0), trial_seed(2, 0));
    }

    #[test]
    fn dense_gaussian_annulus_collides() {
        let mut cfg = ExperimentConfig::new(WeightSpec::Power { alpha: 2.0 }, vec![10.0], 1000);
        cfg.n_max = 10;
        let report = collision_frequencies(&cfg, &RhoSolverConfig::default(), None).unwrap();
        let row = report.rows.iter().find(|r| r.n == 10).unwrap();
        assert!((row.mu - 38.0).abs() < 1e-6);
        assert!(row.frequency >= 0.99, "{row:?}");
        assert!(row.predicted > 0.99);
        assert!(row.ci_low <= row.frequency && row.frequency <= row.ci_high);
        let again = collision_frequencies(&ExperimentConfig { trials: 1, ..cfg.clone() }, &RhoSolverConfig::default(), None).unwrap();
        let twice = collision_frequencies(&ExperimentConfig { trials: 1, ..cfg }, &RhoSolverConfig::default(), None).unwrap();
        assert_eq!(again, twice);
    }

    #[test]
    fn sparse_annulus_rarely_collides() {
        let mut cfg = ExperimentConfig::new(WeightSpec::Power { alpha: 0.5 }, vec![10.0], 10_000);
        cfg.shifted = true;
        cfg.scales = vec![1, 2];
        let report = collision_frequencies(&cfg, &RhoSolverConfig::default(), None).unwrap();
        let row = report.rows.iter().find(|r| r.n == 10 && r.scale_l == 1 && !r.shifted).unwrap();
        assert!(row.frequency <= 0.02, "{row:?}");
        assert!(row.proxy < 0.02);
        assert!(report.rows.iter().any(|r| r.shifted && r.n == 0));
        assert!(report.rows.iter().all(|r| (0.0..=1.0).contains(&r.frequency)));
        let _ = PI;
    }
}
