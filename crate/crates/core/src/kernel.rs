//! Reproducing-kernel coefficients and the weight-normalized kernel
//! `|K(z, ζ)| e^{-φ(z) − φ(ζ)}` for the measure `e^{-2φ} dm / ρ²`.
//!
//! The series `Σ a_k² (z ζ̄)^k` has log-concave terms in `k` (the moments `Z_k`
//! are log-convex), so the ratio of the last two retained terms gives a
//! geometric majorant of the omitted tail.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::radial_law::RadialModel;
use crate::scalar::log_add_exp;

/// Hard limit on the number of series terms.
pub const MAX_K_CAP: usize = 200_000;
/// Relative size of the omitted tail accepted by [`KernelModel::normalized_kernel`].
pub const TAIL_REL_TOL: f64 = 1e-10;

/// `ln a_k² = −ln π − ln Z_k`.
pub fn log_ak2(model: &RadialModel, k: usize) -> Result<f64> {
    Ok(-PI.ln() - model.normalizer(k)?.log_z())
}

#[derive(Debug, Clone)]
pub struct KernelModel {
    model: Arc<RadialModel>,
    log_ak2: Vec<f64>,
    r_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub value: f64,
    /// Bound on the omitted tail, in the same normalization as `value`.
    pub tail_bound: f64,
}

impl KernelModel {
    /// Keeps enough coefficients for every pair of radii up to `r_max`.
    pub fn for_radius(model: Arc<RadialModel>, r_max: f64) -> Result<Self> {
        if !(r_max >= 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!("kernel radius must be finite, got {r_max}")));
        }
        let phi = model.weight().potential(r_max);
        let lr = if r_max > 0.0 { 2.0 * r_max.ln() } else { f64::NEG_INFINITY };
        let mut coeffs: Vec<f64> = Vec::new();
        let mut log_sum = f64::NEG_INFINITY;
        let mut best = f64::NEG_INFINITY;
        let chunk = 32usize;
        loop {
            let start = coeffs.len();
            if start >= MAX_K_CAP {
                return Err(Error::TailBoundFailure(format!(
                    "more than {MAX_K_CAP} kernel terms needed at radius {r_max}"
                )));
            }
            let block: Vec<f64> = (start..start + chunk)
                .into_par_iter()
                .map(|k| log_ak2(&model, k))
                .collect::<Result<_>>()?;
            for (j, la) in block.into_iter().enumerate() {
                let k = start + j;
                coeffs.push(la);
                let term = if k == 0 { la - 2.0 * phi } else { la + k as f64 * lr - 2.0 * phi };
                log_sum = log_add_exp(log_sum, term);
                best = best.max(term);
                if k >= 8 && term < best {
                    let prev = coeffs[k - 1] + (k - 1) as f64 * lr - 2.0 * phi;
                    let log_q = term - prev;
                    if log_q < 0.0 {
                        let q = log_q.exp();
                        let log_tail = term + log_q - (1.0 - q).ln();
                        if r_max == 0.0 || log_tail - log_sum < (1e-3 * TAIL_REL_TOL).ln() {
                            return Ok(Self {
                                model,
                                log_ak2: coeffs,
                                r_max,
                            });
                        }
                    }
                }
            }
        }
    }

    pub fn model(&self) -> &RadialModel {
        &self.model
    }

    pub fn k_cap(&self) -> usize {
        self.log_ak2.len() - 1
    }

    pub fn log_ak2(&self) -> &[f64] {
        &self.log_ak2
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Log-terms `ln a_k² + k ln(r1 r2) − φ(r1) − φ(r2)`.
    fn log_terms(&self, r1: f64, r2: f64, out: &mut Vec<f64>) {
        let w = self.model.weight();
        let shift = -w.potential(r1) - w.potential(r2);
        out.clear();
        let prod = r1 * r2;
        if prod == 0.0 {
            out.push(self.log_ak2[0] + shift);
            return;
        }
        let lp = prod.ln();
        out.extend(self.log_ak2.iter().enumerate().map(|(k, la)| la + k as f64 * lp + shift));
    }

    fn tail_of(terms: &[f64]) -> f64 {
        let n = terms.len();
        if n < 2 {
            return 0.0;
        }
        let log_q = terms[n - 1] - terms[n - 2];
        if log_q >= 0.0 {
            return f64::INFINITY;
        }
        let q = log_q.exp();
        (terms[n - 1] + log_q).exp() / (1.0 - q)
    }

    /// `|K(z, ζ)| e^{-φ(z) − φ(ζ)}` for `|z| = r1`, `|ζ| = r2` and angle gap `dtheta`.
    pub fn normalized_kernel(&self, r1: f64, r2: f64, dtheta: f64) -> Result<KernelValue> {
        if !(r1 >= 0.0 && r2 >= 0.0) || !r1.is_finite() || !r2.is_finite() {
            return Err(Error::Domain(format!("radii must be finite and nonnegative: {r1}, {r2}")));
        }
        let mut terms = Vec::with_capacity(self.log_ak2.len());
        self.log_terms(r1, r2, &mut terms);
        let peak = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (mut re, mut im, mut abs_sum) = (0.0, 0.0, 0.0);
        for (k, t) in terms.iter().enumerate() {
            let c = (t - peak).exp();
            let (s, co) = (k as f64 * dtheta).sin_cos();
            re += c * co;
            im += c * s;
            abs_sum += c;
        }
        let tail = Self::tail_of(&terms);
        let scale = peak.exp();
        if !(tail <= TAIL_REL_TOL * abs_sum * scale) {
            return Err(Error::TailBoundFailure(format!(
                "series truncated at k = {} is not accurate at radii ({r1}, {r2})",
                self.k_cap()
            )));
        }
        Ok(KernelValue {
            value: re.hypot(im) * scale,
            tail_bound: tail,
        })
    }

    /// Fits `ε` in `|K(z,ζ)| e^{-φ(z)-φ(ζ)} / K(z,z) e^{-2φ(z)} ≈ exp(−c (|z−ζ|/ρ)^ε)` along
    /// the circle of radius `r`, using gaps up to `max_gap_over_rho` times `ρ(r)`.
    pub fn decay_exponent_fit(&self, r: f64, max_gap_over_rho: f64, samples: usize) -> Result<DecayFit> {
        let rho = self.model.profile().rho(r)?;
        let diag = self.normalized_kernel(r, r, 0.0)?.value;
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 1..=samples.max(2) {
            let gap = rho * max_gap_over_rho * i as f64 / samples.max(2) as f64;
            if gap >= 2.0 * r {
                break;
            }
            let dtheta = 2.0 * (gap / (2.0 * r)).asin();
            let ratio = self.normalized_kernel(r, r, dtheta)?.value / diag;
            if ratio > 0.0 && ratio < 1.0 {
                xs.push((gap / rho).ln());
                ys.push((-ratio.ln()).ln());
            }
        }
        if xs.len() < 2 {
            return Err(Error::TooFewPoints(xs.len()));
        }
        let slope = crate::weight::ols_slope(&xs, &ys);
        Ok(DecayFit {
            radius: r,
            rho,
            epsilon: slope,
            points: xs.len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub radius: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub points: usize,
}

/// Quadrature resolution of [`trace_identity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceQuadrature {
    /// Gauss-Legendre panels per unit radius.
    pub panels: usize,
    /// Nodes per panel.
    pub order: usize,
    /// Minimum number of trapezoid nodes in the angle gap.
    pub angles: usize,
}

impl Default for TraceQuadrature {
    fn default() -> Self {
        Self {
            panels: 2,
            order: 24,
            angles: 256,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceIdentity {
    pub n: usize,
    pub sum_pk2: f64,
    pub double_integral: f64,
    pub rel_err: f64,
    pub mu_n: f64,
}

/// Compares `Σ_k (p_k^{(n)})²` with `∫_{I_n} ∫_{I_n} |K(z, ζ)|² dμ(z) dμ(ζ)`.
pub fn trace_identity_check(model: Arc<RadialModel>, n: usize, quad: TraceQuadrature) -> Result<TraceIdentity> {
    if n == 0 {
        return Err(Error::InvalidParameter("annulus index n starts at 1".into()));
    }
    let (a, b) = ((n - 1) as f64, n as f64);
    let (probs, _) = model.interval_probabilities(a, b, crate::radial_law::DEFAULT_K_CAP)?;
    let sum_pk2: f64 = probs.iter().map(|p| p * p).sum();
    let mu_n: f64 = probs.iter().sum();

    let km = KernelModel::for_radius(model.clone(), b)?;
    let gl = GaussLegendre::new(quad.order);
    let panels = quad.panels.max(1);
    let width = (b - a) / panels as f64;
    let mut nodes = Vec::new();
    for p in 0..panels {
        let lo = a + width * p as f64;
        for (x, w) in gl.mapped(lo, lo + width) {
            let rho = model.profile().rho(x)?;
            nodes.push((x, w * x / (rho * rho)));
        }
    }
    let m = quad.angles.max(2 * km.k_cap() + 2);
    let h = 2.0 * PI / m as f64;
    let gaps: Vec<f64> = (0..m).map(|j| h * j as f64).collect();
    let rows: Vec<f64> = nodes
        .par_iter()
        .map(|&(r1, w1)| -> Result<f64> {
            let mut row = 0.0;
            for &(r2, w2) in &nodes {
                let mut ang = 0.0;
                for &g in &gaps {
                    let v = km.normalized_kernel(r1, r2, g)?.value;
                    ang += v * v;
                }
                row += w2 * ang * h;
            }
            Ok(w1 * row)
        })
        .collect::<Result<_>>()?;
    // the outer angle contributes 2π; the inner angle is integrated over the gap
    let double_integral = 2.0 * PI * rows.iter().sum::<f64>();
    Ok(TraceIdentity {
        n,
        sum_pk2,
        double_integral,
        rel_err: (double_integral - sum_pk2).abs() / sum_pk2,
        mu_n,
    })
}

/// `∫_{I_n} K(z, z) dμ(z)` from the kernel diagonal.
pub fn diagonal_intensity_integral(model: Arc<RadialModel>, n: usize, order: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("annulus index n starts at 1".into()));
    }
    let (a, b) = ((n - 1) as f64, n as f64);
    let km = KernelModel::for_radius(model.clone(), b)?;
    let gl = GaussLegendre::new(order);
    let mut total = 0.0;
    for (r, w) in gl.mapped(a, b) {
        let rho = model.profile().rho(r)?;
        total += w * km.normalized_kernel(r, r, 0.0)?.value * 2.0 * PI * r / (rho * rho);
    }
    Ok(total)
}
