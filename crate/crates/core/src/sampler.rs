//! Finite-window realizations of the hybrid process (independent moduli from the
//! modulus laws, independent uniform angles) and of the Poisson process with
//! intensity `dm / ρ²`.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quadrature::GaussLegendre;
use crate::radial_law::{LawCache, ModulusLaw, RadialModel};
use crate::report::fmt_f64;

/// Default bound on the expected number of omitted points per window.
pub const DEFAULT_EPS: f64 = 1e-9;
/// Largest truncation index attempted.
pub const MAX_TRUNCATION: usize = 5_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleKind {
    Hybrid,
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub modulus: f64,
    pub angle: f64,
    /// Index of the modulus law that produced the point; `None` for Poisson points.
    pub k: Option<usize>,
}

impl Point {
    pub fn cartesian(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (self.modulus * c, self.modulus * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSample {
    pub points: Vec<Point>,
    pub window_r: f64,
    pub seed: u64,
    pub kind: SampleKind,
    pub truncation_k: Option<usize>,
}

impl PointSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points with modulus `<= r`, as a sample over the smaller window.
    pub fn restrict(&self, r: f64) -> PointSample {
        PointSample {
            points: self.points.iter().filter(|p| p.modulus <= r).copied().collect(),
            window_r: r.min(self.window_r),
            ..self.clone()
        }
    }

    /// One JSON object per line: `{"angle":..,"k":..,"modulus":..}`.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for p in &self.points {
            let k = p.k.map_or_else(|| "null".to_string(), |k| k.to_string());
            let _ = writeln!(
                out,
                "{{\"angle\":{},\"k\":{k},\"modulus\":{}}}",
                fmt_f64(p.angle),
                fmt_f64(p.modulus)
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("modulus,angle,k\n");
        for p in &self.points {
            let k = p.k.map_or_else(String::new, |k| k.to_string());
            let _ = writeln!(out, "{},{},{k}", fmt_f64(p.modulus), fmt_f64(p.angle));
        }
        out
    }
}

/// Truncation index together with the retention probabilities `P(|λ_k| <= R)`, `k < K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub k: usize,
    pub tail_bound: f64,
    pub retention: Vec<f64>,
}

/// Smallest `K` whose bound on `Σ_{k >= K} P(|λ_k| <= R)` is below `eps`.
///
/// The retention probabilities are log-concave in `k` past their peak, so the
/// ratio of consecutive terms gives a geometric majorant of the remaining sum.
pub fn truncation_index(model: &RadialModel, window_r: f64, eps: f64) -> Result<Truncation> {
    if !(window_r > 0.0) || !window_r.is_finite() {
        return Err(Error::InvalidParameter(format!("window radius must be positive, got {window_r}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps must lie in (0, 1), got {eps}")));
    }
    let chunk = 64usize;
    let mut probs: Vec<f64> = Vec::new();
    loop {
        let start = probs.len();
        if start >= MAX_TRUNCATION {
            return Err(Error::TruncationFailure(format!(
                "no truncation below {MAX_TRUNCATION} for window {window_r}"
            )));
        }
        let block: Vec<f64> = (start..start + chunk)
            .into_par_iter()
            .map(|k| {
                let norm = model.normalizer(k)?;
                model.p_k_interval(&norm, 0.0, window_r)
            })
            .collect::<Result<_>>()?;
        for p in block {
            let k = probs.len();
            probs.push(p);
            if k == 0 || p >= probs[k - 1] {
                continue;
            }
            let prev = probs[k - 1];
            let q = p / prev;
            let bound = if p == 0.0 { 0.0 } else { p / (1.0 - q) };
            if bound < eps {
                probs.pop();
                return Ok(Truncation {
                    k,
                    tail_bound: bound,
                    retention: probs,
                });
            }
        }
    }
}

/// Hybrid sampler over a fixed window with its modulus laws prepared once.
#[derive(Debug, Clone)]
pub struct HybridSampler {
    model: Arc<RadialModel>,
    window_r: f64,
    eps: f64,
    truncation: Truncation,
    laws: Vec<ModulusLaw>,
}

impl HybridSampler {
    pub fn new(model: Arc<RadialModel>, window_r: f64, eps: f64, cache: Option<&LawCache>) -> Result<Self> {
        let truncation = truncation_index(&model, window_r, eps)?;
        let laws = (0..truncation.k)
            .into_par_iter()
            .map(|k| match cache {
                Some(c) => c.get_or_build(&model, k),
                None => model.build_law(k),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            model,
            window_r,
            eps,
            truncation,
            laws,
        })
    }

    pub fn model(&self) -> &Arc<RadialModel> {
        &self.model
    }

    pub fn window_r(&self) -> f64 {
        self.window_r
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn laws(&self) -> &[ModulusLaw] {
        &self.laws
    }

    /// Draws the sample for `seed`. Index `k` always consumes the variates of
    /// stream `k`, so the result does not depend on evaluation order and windows
    /// sharing a seed are nested.
    pub fn sample(&self, seed: u64) -> PointSample {
        let points = self
            .laws
            .iter()
            .enumerate()
            .filter_map(|(k, law)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k as u64);
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                let modulus = law.sample_modulus(u);
                (modulus <= self.window_r).then_some(Point {
                    modulus,
                    angle: v * TAU,
                    k: Some(k),
                })
            })
            .collect();
        PointSample {
            points,
            window_r: self.window_r,
            seed,
            kind: SampleKind::Hybrid,
            truncation_k: Some(self.truncation.k),
        }
    }
}

pub fn sample_hybrid(model: Arc<RadialModel>, window_r: f64, seed: u64, eps: f64) -> Result<PointSample> {
    Ok(HybridSampler::new(model, window_r, eps, None)?.sample(seed))
}

/// Poisson sampler with intensity `dm / ρ²` on the disk `|z| <= R`.
#[derive(Debug, Clone)]
pub struct PoissonSampler {
    window_r: f64,
    mass: f64,
    inverse: Pchip<f64>,
}

impl PoissonSampler {
    const CELLS: usize = 2048;

    pub fn new(model: &RadialModel, window_r: f64) -> Result<Self> {
        if !(window_r > 0.0) || !window_r.is_finite() {
            return Err(Error::InvalidParameter(format!("window radius must be positive, got {window_r}")));
        }
        // in u = r² the radial mass is π du / ρ²(√u)
        let gl = GaussLegendre::new(16);
        let u_max = window_r * window_r;
        let h = u_max / Self::CELLS as f64;
        let mut us = vec![0.0];
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for i in 0..Self::CELLS {
            let (a, b) = (h * i as f64, h * (i + 1) as f64);
            let mut cell = 0.0;
            for (u, w) in gl.mapped(a, b) {
                let rho = model.profile().rho(u.sqrt())?;
                cell += w * std::f64::consts::PI / (rho * rho);
            }
            acc += cell;
            us.push(if i + 1 == Self::CELLS { u_max } else { b });
            cum.push(acc);
        }
        let mass = acc;
        let fractions: Vec<f64> = cum.iter().map(|c| c / mass).collect();
        Ok(Self {
            window_r,
            mass,
            inverse: Pchip::new(fractions, us),
        })
    }

    /// `∫_{|z| <= R} dm / ρ²`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn window_r(&self) -> f64 {
        self.window_r
    }

    pub fn sample(&self, seed: u64, intensity_scale: f64) -> Result<PointSample> {
        if !(intensity_scale >= 0.0) || !intensity_scale.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "intensity scale must be finite and nonnegative, got {intensity_scale}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mean = intensity_scale * self.mass;
        let count = if mean > 0.0 {
            let dist = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            dist.sample(&mut rng) as usize
        } else {
            0
        };
        let points = (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let v: f64 = rng.random();
                let modulus = self.inverse.eval(u).max(0.0).sqrt().min(self.window_r);
                Point {
                    modulus,
                    angle: v * TAU,
                    k: None,
                }
            })
            .collect();
        Ok(PointSample {
            points,
            window_r: self.window_r,
            seed,
            kind: SampleKind::Poisson,
            truncation_k: None,
        })
    }
}

pub fn sample_poisson(model: &RadialModel, window_r: f64, seed: u64, intensity_scale: f64) -> Result<PointSample> {
    PoissonSampler::new(model, window_r)?.sample(seed, intensity_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::{RadialWeight, RhoSolverConfig};

    fn model(alpha: f64) -> Arc<RadialModel> {
        Arc::new(RadialModel::new(&RadialWeight::power(alpha).unwrap(), &RhoSolverConfig::default()).unwrap())
    }

    /// Smallest K with Σ_{k>=K} P(Poisson(λ) >= k+1) < eps (test oracle).
    fn poisson_truncation(lambda: f64, eps: f64) -> usize {
        let mut pmf = vec![(-lambda).exp()];
        for j in 1..2000 {
            let last = pmf[j - 1];
            pmf.push(last * lambda / j as f64);
        }
        let tails: Vec<f64> = (0..2000).map(|m| pmf[m..].iter().sum()).collect();
        (0..1990).find(|&k| tails[k + 1..].iter().sum::<f64>() < eps).unwrap()
    }

    #[test]
    fn truncation_examples() {
        let m = model(2.0);
        let k3 = truncation_index(&m, 3.0, 1e-6).unwrap().k;
        assert!((k3 as i64 - 40).abs() <= 3, "{k3}");
        assert!((k3 as i64 - poisson_truncation(18.0, 1e-6) as i64).abs() <= 1);
        assert!(truncation_index(&m, 3.0, 1e-3).unwrap().k <= k3);
        let k6 = truncation_index(&m, 6.0, 1e-6).unwrap().k;
        assert!((k6 as i64 - poisson_truncation(72.0, 1e-6) as i64).abs() <= 1, "{k6}");
        assert!(truncation_index(&m, -1.0, 1e-6).is_err());
        assert!(truncation_index(&m, 1.0, 0.0).is_err());
    }

    #[test]
    fn hybrid_mean_count_and_determinism() {
        let s = HybridSampler::new(model(2.0), 3.0, DEFAULT_EPS, None).unwrap();
        let counts: Vec<f64> = (0..1000).map(|seed| s.sample(seed).len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / 1000.0;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / 999.0;
        assert!((mean - 18.0).abs() <= 3.0 * (var / 1000.0).sqrt(), "{mean}");
        assert_eq!(s.sample(42), s.sample(42));
        let a = s.sample(7);
        assert!(a.points.iter().all(|p| p.modulus <= 3.0 && (0.0..TAU).contains(&p.angle)));
    }

    #[test]
    fn pooled_angles_are_uniform() {
        let s = HybridSampler::new(model(2.0), 3.0, DEFAULT_EPS, None).unwrap();
        let bins = 16;
        let mut hist = vec![0usize; bins];
        let mut total = 0usize;
        for seed in 0..100 {
            for p in s.sample(seed).points {
                hist[(p.angle / TAU * bins as f64) as usize] += 1;
                total += 1;
            }
        }
        let e = total as f64 / bins as f64;
        let chi2: f64 = hist.iter().map(|h| (*h as f64 - e).powi(2) / e).sum();
        // 99th percentile of chi-square with 15 degrees of freedom
        assert!(chi2 < 30.578, "{chi2}");
    }

    #[test]
    fn nested_windows() {
        let m = model(1.5);
        let big = HybridSampler::new(m.clone(), 6.0, DEFAULT_EPS, None).unwrap();
        let small = HybridSampler::new(m, 3.0, DEFAULT_EPS, None).unwrap();
        for seed in 0..20 {
            assert_eq!(big.sample(seed).restrict(3.0).points, small.sample(seed).points);
        }
    }

    #[test]
    fn poisson_sampler() {
        let m = model(2.0);
        let s = PoissonSampler::new(&m, 1.0).unwrap();
        let target = 4.0 * std::f64::consts::PI.powi(2);
        assert!((s.mass() - target).abs() < 1e-9 * target);
        let counts: Vec<f64> = (0..10_000).map(|seed| s.sample(seed, 1.0).unwrap().len() as f64).collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (counts.len() - 1) as f64;
        assert!((mean - target).abs() <= 3.0 * (target / 10_000.0).sqrt());
        assert!((var / mean - 1.0).abs() < 0.1);
        assert!(s.sample(3, 0.0).unwrap().is_empty());
        assert_eq!(s.sample(5, 1.0).unwrap(), s.sample(5, 1.0).unwrap());
        // radii are uniform in area for a constant intensity
        let pooled: Vec<f64> = (0..200).flat_map(|seed| s.sample(seed, 1.0).unwrap().points).map(|p| p.modulus * p.modulus).collect();
        let inner = pooled.iter().filter(|u| **u < 0.5).count() as f64 / pooled.len() as f64;
        assert!((inner - 0.5).abs() < 0.02);
    }

    #[test]
    fn text_exports() {
        let s = PointSample {
            points: vec![Point { modulus: 1.0, angle: 0.5, k: Some(3) }],
            window_r: 2.0,
            seed: 1,
            kind: SampleKind::Hybrid,
            truncation_k: Some(10),
        };
        assert_eq!(s.to_csv(), "modulus,angle,k\n1.0000000000000000e0,5.0000000000000000e-1,3\n");
        assert!(s.to_jsonl().starts_with("{\"angle\":5.0000000000000000e-1,\"k\":3,"));
    }
}
