//! Laws of the squared moduli `|λ_k|²` and the exact annulus probabilities built
//! from them.
//!
//! The density of `t = |λ_k|²` is proportional to `t^k e^{-2φ(√t)} / ρ²(√t)`.
//! All integrals run in `s = ln t`, where the log-density
//! `h_k(s) = (k+1)s − 2φ(e^{s/2}) − 2 ln ρ(e^{s/2})` is unimodal and is shifted by
//! its peak before exponentiation.

use std::cell::RefCell;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Pchip;
use crate::quadrature::{gk15, integrate, Tolerance};
use crate::scalar::CompensatedSum;
use crate::weight::{RadialWeight, RhoProfile, RhoSolverConfig, DEFAULT_PROFILE_RADIUS};

/// Log-density drop (nats) below the peak that delimits the support.
const SUPPORT_DROP: f64 = 45.0;
/// Largest probability mass carried by one cell of a CDF table.
pub const CELL_MASS_CAP: f64 = 1e-3;
/// Relative accuracy demanded of every normalizer.
pub const NORMALIZER_REL_TOL: f64 = 1e-9;
const INTEGRAND_REL_TOL: f64 = 1e-11;

/// Weight plus a tabulated `ρ`, shared by every law of the process.
#[derive(Debug, Clone)]
pub struct RadialModel {
    profile: RhoProfile,
}

/// Peak location, support and normalizer of one modulus law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub k: usize,
    pub mode_s: f64,
    pub peak: f64,
    pub s_lo: f64,
    pub s_hi: f64,
    /// `ln ∫ e^{h(s) − peak} ds`.
    pub log_z_shifted: f64,
}

impl Normalizer {
    /// `ln ∫_0^∞ t^k e^{-2φ(√t)} ρ^{-2}(√t) dt`.
    pub fn log_z(&self) -> f64 {
        self.peak + self.log_z_shifted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCount {
    pub value: f64,
    pub k_cut: usize,
    pub tail_bound: f64,
}

/// Default cap on the number of indices summed by [`RadialModel::mu_n_exact`].
pub const DEFAULT_K_CAP: usize = 1_000_000;

struct ErrSlot(RefCell<Option<Error>>);

impl ErrSlot {
    fn new() -> Self {
        Self(RefCell::new(None))
    }

    fn record(&self, e: Error) {
        self.0.borrow_mut().get_or_insert(e);
    }

    fn check(self) -> Result<()> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

impl RadialModel {
    pub fn new(weight: &RadialWeight, cfg: &RhoSolverConfig) -> Result<Self> {
        Self::with_profile_radius(weight, cfg, DEFAULT_PROFILE_RADIUS)
    }

    pub fn with_profile_radius(weight: &RadialWeight, cfg: &RhoSolverConfig, r_max: f64) -> Result<Self> {
        Ok(Self {
            profile: RhoProfile::build(weight, cfg, r_max)?,
        })
    }

    pub fn weight(&self) -> &RadialWeight {
        self.profile.weight()
    }

    pub fn config(&self) -> &RhoSolverConfig {
        self.profile.config()
    }

    pub fn profile(&self) -> &RhoProfile {
        &self.profile
    }

    /// `k ln t − 2φ(√t) − 2 ln ρ(√t)`.
    pub fn log_fk_unnormalized(&self, k: usize, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
        }
        let r = t.sqrt();
        let lead = if k == 0 { 0.0 } else { k as f64 * t.ln() };
        Ok(lead - 2.0 * self.weight().potential(r) - 2.0 * self.profile.ln_rho(r)?)
    }

    /// Log-density of `s = ln t` (unnormalized).
    fn h(&self, k: usize, s: f64, slot: &ErrSlot) -> f64 {
        let r = (0.5 * s).exp();
        match self.profile.ln_rho(r) {
            Ok(lr) => (k as f64 + 1.0) * s - 2.0 * self.weight().potential(r) - 2.0 * lr,
            Err(e) => {
                slot.record(e);
                f64::NEG_INFINITY
            }
        }
    }

    pub fn normalizer(&self, k: usize) -> Result<Normalizer> {
        let slot = ErrSlot::new();
        let h = |s: f64| self.h(k, s, &slot);
        let guess = match self.weight().alpha() {
            Some(a) => (2.0 / a) * ((k as f64 + 1.0) / a).ln(),
            None => 0.0,
        };
        let mode_s = maximize_unimodal(&h, guess);
        let peak = h(mode_s);
        if !peak.is_finite() {
            slot.check()?;
            return Err(Error::NormalizationFailure(format!(
                "log-density of index {k} is not finite at its mode"
            )));
        }
        let d = 1e-3 * (1.0 + mode_s.abs());
        let curv = (h(mode_s + d) - 2.0 * peak + h(mode_s - d)) / (d * d);
        let sd = if curv < 0.0 { (-curv).sqrt().recip() } else { 1.0 };
        let s_hi = walk_out(&h, mode_s, peak, sd);
        let s_lo = walk_out(&h, mode_s, peak, -sd);
        let f = |s: f64| (h(s) - peak).exp();
        let tol = Tolerance {
            abs: 0.0,
            rel: INTEGRAND_REL_TOL,
            max_subdivisions: 4000,
        };
        let left = integrate(f, s_lo, mode_s, tol);
        let right = integrate(f, mode_s, s_hi, tol);
        slot.check()?;
        let (left, right) = match (left, right) {
            (Ok(l), Ok(r)) => (l, r),
            (Err(e), _) | (_, Err(e)) => {
                return Err(Error::NormalizationFailure(format!("index {k}: {e}")));
            }
        };
        let z = left.value + right.value;
        if (left.error + right.error) > NORMALIZER_REL_TOL * z {
            return Err(Error::NormalizationFailure(format!(
                "index {k}: relative error {} above {NORMALIZER_REL_TOL}",
                (left.error + right.error) / z
            )));
        }
        Ok(Normalizer {
            k,
            mode_s,
            peak,
            s_lo,
            s_hi,
            log_z_shifted: z.ln(),
        })
    }

    /// `P(|λ_k| ∈ [a, b))` for radii `0 <= a < b`.
    pub fn p_k_interval(&self, norm: &Normalizer, a: f64, b: f64) -> Result<f64> {
        let lo = if a > 0.0 { (2.0 * a.ln()).max(norm.s_lo) } else { norm.s_lo };
        let hi = if b.is_finite() { (2.0 * b.ln()).min(norm.s_hi) } else { norm.s_hi };
        if !(hi > lo) {
            return Ok(0.0);
        }
        let slot = ErrSlot::new();
        let k = norm.k;
        let shift = norm.peak + norm.log_z_shifted;
        let f = |s: f64| (self.h(k, s, &slot) - shift).exp();
        // pieces split at the mode keep the bell shape on one side of each panel
        let mut total = 0.0;
        let tol = Tolerance {
            abs: 1e-16,
            rel: INTEGRAND_REL_TOL,
            max_subdivisions: 4000,
        };
        if lo < norm.mode_s && norm.mode_s < hi {
            total += integrate(f, lo, norm.mode_s, tol)?.value;
            total += integrate(f, norm.mode_s, hi, tol)?.value;
        } else {
            total += integrate(f, lo, hi, tol)?.value;
        }
        slot.check()?;
        Ok(total.clamp(0.0, 1.0))
    }

    /// `p_k^{(n)} = P(|λ_k| ∈ [n−1, n))`.
    pub fn p_kn(&self, k: usize, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidParameter("annulus index n starts at 1".into()));
        }
        let norm = self.normalizer(k)?;
        self.p_k_interval(&norm, (n - 1) as f64, n as f64)
    }

    /// All nonnegligible `P(|λ_k| ∈ [a, b))`, summed until 16 consecutive indices past
    /// the peak fall below `1e-12` and the geometric tail bound is below `1e-9`.
    pub fn interval_probabilities(&self, a: f64, b: f64, k_cap: usize) -> Result<(Vec<f64>, f64)> {
        const THRESHOLD: f64 = 1e-12;
        const RUN: usize = 16;
        const TAIL_TARGET: f64 = 1e-9;
        let mut probs = Vec::new();
        let mut best = 0.0f64;
        let mut best_k = 0usize;
        let mut run = 0usize;
        let mut run_needed = RUN;
        let mut k = 0usize;
        loop {
            if k >= k_cap {
                return Err(Error::TruncationFailure(format!(
                    "index cap {k_cap} reached before the summands decayed on [{a}, {b})"
                )));
            }
            let norm = self.normalizer(k)?;
            let p = self.p_k_interval(&norm, a, b)?;
            probs.push(p);
            if p > best {
                best = p;
                best_k = k;
            }
            // the run only counts once the law's mode has moved past the interval
            let past = !b.is_finite() || norm.mode_s > 2.0 * b.ln();
            if best > 0.0 && k > best_k && p < THRESHOLD && past {
                run += 1;
            } else {
                run = 0;
            }
            if run >= run_needed {
                let prev = probs[k - 1];
                let tail = if p == 0.0 {
                    0.0
                } else if prev > 0.0 && p < prev {
                    let q = p / prev;
                    p * q / (1.0 - q)
                } else {
                    f64::INFINITY
                };
                if tail <= TAIL_TARGET {
                    return Ok((probs, tail));
                }
                run_needed *= 2;
            }
            k += 1;
        }
    }

    /// `μ_n = E[N_n] = Σ_k p_k^{(n)}`.
    pub fn mu_n_exact(&self, n: usize) -> Result<MeanCount> {
        self.mu_n_exact_with_cap(n, DEFAULT_K_CAP)
    }

    pub fn mu_n_exact_with_cap(&self, n: usize, k_cap: usize) -> Result<MeanCount> {
        if n == 0 {
            return Err(Error::InvalidParameter("annulus index n starts at 1".into()));
        }
        let (probs, tail_bound) = self.interval_probabilities((n - 1) as f64, n as f64, k_cap)?;
        let value: CompensatedSum<f64> = probs.iter().copied().collect();
        Ok(MeanCount {
            value: value.value(),
            k_cut: probs.len() - 1,
            tail_bound,
        })
    }

    /// Builds the tabulated law of `|λ_k|²`.
    pub fn build_law(&self, k: usize) -> Result<ModulusLaw> {
        let norm = self.normalizer(k)?;
        let slot = ErrSlot::new();
        let shift = norm.peak;
        let mut f = |s: f64| (self.h(k, s, &slot) - shift).exp();
        let z_shift = norm.log_z_shifted.exp();
        let initial = 64usize;
        let width = (norm.s_hi - norm.s_lo) / initial as f64;
        let mut stack: Vec<(f64, f64)> = (0..initial)
            .rev()
            .map(|i| {
                let a = norm.s_lo + width * i as f64;
                let b = if i + 1 == initial { norm.s_hi } else { a + width };
                (a, b)
            })
            .collect();
        let mut cells: Vec<(f64, f64, f64)> = Vec::new();
        let mut err_total = 0.0;
        let max_cells = 200_000;
        while let Some((a, b)) = stack.pop() {
            let est = gk15(&mut f, a, b);
            let too_heavy = est.value > CELL_MASS_CAP * z_shift;
            let too_rough = est.error > 1e-12 * z_shift && (b - a) > 1e-9 * (1.0 + a.abs());
            if too_heavy || too_rough {
                let m = 0.5 * (a + b);
                stack.push((m, b));
                stack.push((a, m));
                if cells.len() + stack.len() > max_cells {
                    return Err(Error::NormalizationFailure(format!(
                        "index {k}: CDF table exceeds {max_cells} cells"
                    )));
                }
                continue;
            }
            err_total += est.error;
            cells.push((a, b, est.value.max(0.0)));
        }
        slot.check()?;
        let total: CompensatedSum<f64> = cells.iter().map(|c| c.2).collect();
        let total = total.value();
        if err_total > NORMALIZER_REL_TOL * total {
            return Err(Error::NormalizationFailure(format!(
                "index {k}: table error {} above {NORMALIZER_REL_TOL}",
                err_total / total
            )));
        }
        let mut s_knots = vec![cells[0].0];
        let mut cdf = vec![0.0];
        let mut acc = CompensatedSum::new();
        for (i, &(_, b, m)) in cells.iter().enumerate() {
            acc.add(m);
            let last = i + 1 == cells.len();
            let fval = if last { 1.0 } else { (acc.value() / total).min(1.0) };
            if fval > *cdf.last().unwrap() || last {
                if last && fval <= *cdf.last().unwrap() {
                    s_knots.pop();
                    cdf.pop();
                }
                s_knots.push(b);
                cdf.push(fval);
            }
        }
        let t_knots = s_knots.iter().map(|s| s.exp()).collect();
        ModulusLaw::from_parts(k, norm.peak + total.ln(), s_knots, t_knots, cdf)
    }
}

/// Golden-section maximization after bracketing outward from `guess`.
fn maximize_unimodal<F: Fn(f64) -> f64>(h: &F, guess: f64) -> f64 {
    let mut step = 1.0;
    let (mut a, mut b) = (guess - step, guess + step);
    let hm = h(guess);
    let (mut ha, mut hb) = (h(a), h(b));
    // expand until both ends are below the interior point
    let mut mid = guess;
    let mut hmid = hm;
    for _ in 0..200 {
        if ha > hmid {
            step *= 2.0;
            b = mid;
            hb = hmid;
            mid = a;
            hmid = ha;
            a = mid - step;
            ha = h(a);
        } else if hb > hmid {
            step *= 2.0;
            a = mid;
            ha = hmid;
            mid = b;
            hmid = hb;
            b = mid + step;
            hb = h(b);
        } else {
            break;
        }
    }
    let _ = (ha, hb);
    let inv_phi = 0.618_033_988_749_894_9;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-10 * (1.0 + mid.abs()) {
            break;
        }
        if hc > hd {
            b = d;
            d = c;
            hd = hc;
            c = b - inv_phi * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + inv_phi * (b - a);
            hd = h(d);
        }
    }
    0.5 * (a + b)
}

/// Steps away from the mode in direction `sign(step)` until the log-density has
/// dropped by [`SUPPORT_DROP`] and the remaining tail is negligible.
fn walk_out<F: Fn(f64) -> f64>(h: &F, mode: f64, peak: f64, step: f64) -> f64 {
    let mut s = mode;
    let mut inc = step;
    for _ in 0..400 {
        s += inc;
        let v = h(s);
        if v < peak - SUPPORT_DROP {
            // local exponential decay rate bounds the remaining tail
            let dv = (h(s + 1e-3 * step.signum()) - v) / 1e-3;
            if dv < 0.0 && (v - peak).exp() / -dv < 1e-15 {
                return s;
            }
        }
        inc *= 1.5;
    }
    s
}

/// Tabulated law of `t = |λ_k|²` with a monotone-interpolated CDF.
#[derive(Debug, Clone)]
pub struct ModulusLaw {
    k: usize,
    log_z: f64,
    t_knots: Vec<f64>,
    cdf: Vec<f64>,
    forward: Pchip<f64>,
    inverse: Pchip<f64>,
}

/// Plain-data form of a [`ModulusLaw`] used for JSON caching.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusLawTable {
    pub k: usize,
    pub log_z: f64,
    pub t: Vec<f64>,
    pub cdf: Vec<f64>,
}

impl ModulusLaw {
    fn from_parts(k: usize, log_z: f64, s_knots: Vec<f64>, t_knots: Vec<f64>, cdf: Vec<f64>) -> Result<Self> {
        if s_knots.len() < 2 {
            return Err(Error::NormalizationFailure(format!("index {k}: degenerate CDF table")));
        }
        let forward = Pchip::new(s_knots.clone(), cdf.clone());
        let inverse = Pchip::new(cdf.clone(), s_knots);
        Ok(Self {
            k,
            log_z,
            t_knots,
            cdf,
            forward,
            inverse,
        })
    }

    pub fn from_table(table: ModulusLawTable) -> Result<Self> {
        let ModulusLawTable { k, log_z, t, cdf } = table;
        let ok = t.len() >= 2
            && t.len() == cdf.len()
            && t.iter().all(|v| *v > 0.0 && v.is_finite())
            && t.windows(2).all(|w| w[0] < w[1])
            && cdf.windows(2).all(|w| w[0] < w[1])
            && (cdf[0] - 0.0).abs() <= 1e-10
            && (cdf[cdf.len() - 1] - 1.0).abs() <= 1e-10;
        if !ok {
            return Err(Error::NormalizationFailure(format!(
                "cached table for index {k} violates the CDF invariants"
            )));
        }
        let s = t.iter().map(|v| v.ln()).collect();
        Self::from_parts(k, log_z, s, t, cdf)
    }

    pub fn to_table(&self) -> ModulusLawTable {
        ModulusLawTable {
            k: self.k,
            log_z: self.log_z,
            t: self.t_knots.clone(),
            cdf: self.cdf.clone(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.t_knots
    }

    pub fn cdf_values(&self) -> &[f64] {
        &self.cdf
    }

    /// `(t_lo, t_hi)` enclosing all but a negligible mass.
    pub fn support_hint(&self) -> (f64, f64) {
        (self.t_knots[0], *self.t_knots.last().unwrap())
    }

    /// `P(|λ_k|² <= t)` by monotone interpolation of the table.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        self.forward.eval(t.ln())
    }

    /// Inverse-CDF draw of the modulus `|λ_k| = √t` for a variate `u ∈ (0, 1)`.
    pub fn sample_modulus(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        (0.5 * self.inverse.eval(u)).exp()
    }

    /// Mean of `t` under the tabulated law (trapezoidal in the quantile).
    pub fn mean_t(&self) -> f64 {
        self.cdf
            .windows(2)
            .zip(self.t_knots.windows(2))
            .map(|(f, t)| (f[1] - f[0]) * 0.5 * (t[0] + t[1]))
            .sum()
    }
}

/// On-disk JSON cache of modulus-law tables keyed by weight, solver settings and index.
#[derive(Debug, Clone)]
pub struct LawCache {
    dir: PathBuf,
}

impl LawCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    /// Cache rooted at `$FOCKSEP_CACHE_DIR`, if set.
    pub fn from_env() -> Option<Self> {
        std::env::var_os("FOCKSEP_CACHE_DIR").map(|d| Self::new(PathBuf::from(d)))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn key(model: &RadialModel) -> String {
        use sha2::{Digest, Sha256};
        let cfg = serde_json::to_string(model.config()).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(model.weight().fingerprint().as_bytes());
        hasher.update(cfg.as_bytes());
        hasher.update(CELL_MASS_CAP.to_bits().to_le_bytes());
        hasher.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn path_for(&self, model: &RadialModel, k: usize) -> PathBuf {
        self.dir.join(format!("law-{}-k{k}.json", Self::key(model)))
    }

    /// Reads a cached law or builds and stores it. Unreadable entries are rebuilt.
    pub fn get_or_build(&self, model: &RadialModel, k: usize) -> Result<ModulusLaw> {
        let path = self.path_for(model, k);
        if let Ok(text) = std::fs::read_to_string(&path) {
            if let Ok(table) = serde_json::from_str::<ModulusLawTable>(&text) {
                if table.k == k {
                    if let Ok(law) = ModulusLaw::from_table(table) {
                        return Ok(law);
                    }
                }
            }
        }
        let law = model.build_law(k)?;
        std::fs::create_dir_all(&self.dir)?;
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, serde_json::to_vec(&law.to_table())?)?;
        std::fs::rename(&tmp, &path)?;
        Ok(law)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    fn gauss_model() -> RadialModel {
        RadialModel::new(&RadialWeight::power(2.0).unwrap(), &RhoSolverConfig::default()).unwrap()
    }

    /// `P(Poisson(λ) >= m)`, summed directly (test oracle).
    fn poisson_upper_tail(lambda: f64, m: usize) -> f64 {
        let mut term = (-lambda).exp();
        let mut below = 0.0;
        for j in 0..m {
            below += term;
            term *= lambda / (j + 1) as f64;
        }
        let mut above = 0.0;
        let mut j = m;
        let mut t = term;
        while t > 1e-300 || j < m + 10 {
            above += t;
            j += 1;
            t *= lambda / j as f64;
            if j > m + 100_000 {
                break;
            }
        }
        if above < 0.5 { above } else { 1.0 - below }
    }

    #[test]
    fn log_density_examples() {
        let m = gauss_model();
        let v = m.log_fk_unnormalized(0, 1.0).unwrap();
        assert!((v - (-2.0 + (4.0 * PI).ln())).abs() < 1e-10, "{v}");
        let d = m.log_fk_unnormalized(0, 2.0).unwrap() - m.log_fk_unnormalized(0, 1.0).unwrap();
        assert!((d + 2.0).abs() < 1e-12);
        let v3 = m.log_fk_unnormalized(3, 1.0).unwrap();
        assert!((v3 - v).abs() < 1e-12);
        assert!(m.log_fk_unnormalized(0, 0.0).is_err());
    }

    #[test]
    fn normalizer_of_exponential_law() {
        let m = gauss_model();
        let n = m.normalizer(0).unwrap();
        assert!((n.log_z() - (2.0 * PI).ln()).abs() < 1e-9);
        // Z_k = 4π k!/2^{k+1}
        for k in [1usize, 4, 30, 300] {
            let lf: f64 = (1..=k).map(|j| (j as f64).ln()).sum();
            let exact = (4.0 * PI).ln() + lf - (k as f64 + 1.0) * LN_2;
            let got = m.normalizer(k).unwrap().log_z();
            assert!((got - exact).abs() < 1e-9, "k={k}: {got} vs {exact}");
        }
    }

    #[test]
    fn law_matches_gamma_for_gaussian_weight() {
        let m = gauss_model();
        let law = m.build_law(0).unwrap();
        assert!((law.log_z() - (2.0 * PI).ln()).abs() < 1e-9);
        assert!((law.cdf(LN_2 / 2.0) - 0.5).abs() < 1e-7);
        assert!((law.sample_modulus(0.5) - (LN_2 / 2.0).sqrt()).abs() < 1e-6);
        let law4 = m.build_law(4).unwrap();
        assert!((law4.mean_t() - 2.5).abs() < 1e-3, "{}", law4.mean_t());
        // P(Gamma(k+1, 2) <= t) = P(Poisson(2t) >= k+1)
        for k in [0usize, 4, 50] {
            let law = m.build_law(k).unwrap();
            let worst = law
                .breakpoints()
                .iter()
                .zip(law.cdf_values())
                .map(|(&t, &f)| (f - poisson_upper_tail(2.0 * t, k + 1)).abs())
                .fold(0.0, f64::max);
            assert!(worst <= 1e-7, "k={k}: {worst}");
        }
    }

    #[test]
    fn law_table_invariants() {
        let m = RadialModel::new(&RadialWeight::power(0.5).unwrap(), &RhoSolverConfig::default()).unwrap();
        for k in [0usize, 3, 20] {
            let law = m.build_law(k).unwrap();
            let f = law.cdf_values();
            assert!(f[0].abs() <= 1e-10 && (f[f.len() - 1] - 1.0).abs() <= 1e-10);
            assert!(f.windows(2).all(|w| w[0] < w[1]));
            assert!(f.windows(2).all(|w| w[1] - w[0] <= CELL_MASS_CAP * (1.0 + 1e-9)));
            let (lo, _) = law.support_hint();
            assert!((law.sample_modulus(1e-300) - lo.sqrt()).abs() < 1e-12 * lo.sqrt().max(1.0));
        }
    }

    #[test]
    fn p_kn_examples() {
        let m = gauss_model();
        let p = m.p_kn(0, 1).unwrap();
        assert!((p - (1.0 - (-2.0f64).exp())).abs() < 1e-12);
        let p = m.p_kn(2, 1).unwrap();
        assert!((p - (1.0 - 5.0 * (-2.0f64).exp())).abs() < 1e-12);
        let total: f64 = (1..=12).map(|n| m.p_kn(0, n).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(m.p_kn(0, 0).is_err());
    }

    #[test]
    fn mu_n_for_gaussian_weight() {
        let m = gauss_model();
        for (n, exact) in [(1usize, 2.0), (2, 6.0), (5, 18.0)] {
            let mu = m.mu_n_exact(n).unwrap();
            assert!((mu.value - exact).abs() < 1e-6, "n={n}: {mu:?}");
            assert!(mu.tail_bound <= 1e-9);
        }
    }

    #[test]
    fn mu_n_cap_is_enforced() {
        let m = gauss_model();
        assert!(matches!(
            m.mu_n_exact_with_cap(5, 10),
            Err(Error::TruncationFailure(_))
        ));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = LawCache::new(dir.path());
        let m = gauss_model();
        let a = cache.get_or_build(&m, 3).unwrap();
        assert!(cache.path_for(&m, 3).exists());
        let b = cache.get_or_build(&m, 3).unwrap();
        assert_eq!(a.to_table(), b.to_table());
        std::fs::write(cache.path_for(&m, 3), "not json").unwrap();
        let c = cache.get_or_build(&m, 3).unwrap();
        assert_eq!(a.to_table(), c.to_table());
    }
}
