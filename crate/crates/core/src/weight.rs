//! Radial doubling weights, the Laplacian mass of disks, and the radius `ρ(x)` at
//! which a disk about `x` carries unit mass.
//!
//! Every weight is radial, so the mass of a disk depends only on the distance of
//! its center from the origin. Masses are integrated over circles about the origin:
//! the circle `|z| = s` meets `D(x, r)` in an arc whose angle is known in closed
//! form, which leaves a one-dimensional integral in `s`.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interp::UniformCubic;
use crate::quadrature::{integrate, GaussLegendre, Tolerance};

/// Serialized description of a weight, as read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum WeightSpec {
    /// `φ(z) = |z|^α`.
    Power { alpha: f64 },
    /// Radial Laplacian density given by `ln Δφ` at increasing radii.
    Tabulated {
        radii: Vec<f64>,
        log_laplacian: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RhoSolverConfig {
    pub rel_tol: f64,
    pub quad_rel_tol: f64,
    pub max_iter: usize,
    /// Bracketing gives up once the trial radius exceeds this.
    pub radius_cap: f64,
}

impl Default for RhoSolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            quad_rel_tol: 1e-8,
            max_iter: 200,
            radius_cap: 1e12,
        }
    }
}

impl RhoSolverConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t > 0.0 && t < 1.0;
        if !ok(self.rel_tol) || !ok(self.quad_rel_tol) {
            return Err(Error::InvalidParameter(
                "solver tolerances must lie in (0, 1)".into(),
            ));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
        }
        if !(self.radius_cap > 0.0) {
            return Err(Error::InvalidParameter("radius_cap must be positive".into()));
        }
        Ok(())
    }

    /// Same settings with both tolerances tightened by `factor`.
    pub fn refined(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol / factor,
            quad_rel_tol: self.quad_rel_tol / factor,
            ..*self
        }
    }
}

/// Default bound on `ν(D(x, 2r)) / ν(D(x, r))` checked for tabulated weights.
pub const DEFAULT_DOUBLING_BOUND: f64 = 64.0;

/// A radial subharmonic weight `φ` together with its Laplacian measure `ν = Δφ dm`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialWeight {
    spec: WeightSpec,
    repr: Repr,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Power { alpha: f64 },
    Tabulated(Box<Tabulated>),
}

impl RadialWeight {
    pub fn power(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidWeight(format!(
                "power exponent must be positive and finite, got {alpha}"
            )));
        }
        Ok(Self {
            spec: WeightSpec::Power { alpha },
            repr: Repr::Power { alpha },
        })
    }

    pub fn tabulated(radii: Vec<f64>, log_laplacian: Vec<f64>) -> Result<Self> {
        Self::tabulated_with_doubling_bound(radii, log_laplacian, DEFAULT_DOUBLING_BOUND)
    }

    pub fn tabulated_with_doubling_bound(
        radii: Vec<f64>,
        log_laplacian: Vec<f64>,
        doubling_bound: f64,
    ) -> Result<Self> {
        let tab = Tabulated::new(&radii, &log_laplacian)?;
        let w = Self {
            spec: WeightSpec::Tabulated {
                radii,
                log_laplacian,
            },
            repr: Repr::Tabulated(Box::new(tab)),
        };
        w.check_doubling(doubling_bound)?;
        Ok(w)
    }

    pub fn from_spec(spec: &WeightSpec) -> Result<Self> {
        match spec {
            WeightSpec::Power { alpha } => Self::power(*alpha),
            WeightSpec::Tabulated {
                radii,
                log_laplacian,
            } => Self::tabulated(radii.clone(), log_laplacian.clone()),
        }
    }

    pub fn spec(&self) -> &WeightSpec {
        &self.spec
    }

    /// Exponent for power weights.
    pub fn alpha(&self) -> Option<f64> {
        match self.repr {
            Repr::Power { alpha } => Some(alpha),
            Repr::Tabulated(_) => None,
        }
    }

    /// Stable content hash of the weight description (hex SHA-256 of its canonical JSON).
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(&self.spec).expect("weight spec serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// `φ(r)`, normalized so that `φ(0) = 0`.
    pub fn potential(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Power { alpha } => r.powf(*alpha),
            Repr::Tabulated(t) => t.potential(r),
        }
    }

    /// Laplacian density `Δφ(r)`.
    pub fn laplacian_density(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("radius must be finite and >= 0, got {r}")));
        }
        match &self.repr {
            Repr::Power { alpha } => {
                if r == 0.0 {
                    if *alpha < 2.0 {
                        return Err(Error::Domain(format!(
                            "Laplacian of |z|^{alpha} is singular at the origin"
                        )));
                    }
                    return Ok(if *alpha == 2.0 { 4.0 } else { 0.0 });
                }
                Ok(alpha * alpha * r.powf(alpha - 2.0))
            }
            Repr::Tabulated(t) => Ok(t.laplacian(r)),
        }
    }

    /// Density without the domain check; `+∞` at a singular origin.
    fn density_unchecked(&self, r: f64) -> f64 {
        match &self.repr {
            Repr::Power { alpha } => {
                if r == 0.0 && *alpha == 2.0 {
                    4.0
                } else {
                    alpha * alpha * r.powf(alpha - 2.0)
                }
            }
            Repr::Tabulated(t) => t.laplacian(r),
        }
    }

    /// `ν(D(0, r)) = 2π r φ'(r)`.
    pub fn central_mass(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        match &self.repr {
            Repr::Power { alpha } => TAU * alpha * r.powf(*alpha),
            Repr::Tabulated(t) => t.central_mass(r),
        }
    }

    /// `ν(D(x, r))` for a center at distance `x` from the origin.
    pub fn disk_mass(&self, x: f64, r: f64, cfg: &RhoSolverConfig) -> Result<f64> {
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain(format!("disk radius must be positive, got {r}")));
        }
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("center distance must be >= 0, got {x}")));
        }
        if x == 0.0 {
            return Ok(self.central_mass(r));
        }
        // Offsets d = s - x of the partially covered circles.
        let (inner, d_lo) = if r >= x {
            (self.central_mass(r - x), r - 2.0 * x)
        } else {
            (0.0, -r)
        };
        let half = 0.5 * (r - d_lo);
        // d = d_lo + (r - d_lo)(1 - cos u)/2 removes the square-root behaviour of the
        // arc angle at both ends. The arc is 2·acos(c) with
        // c = (s² + x² - r²)/(2sx), evaluated in half-angle form to avoid cancellation.
        let integrand = |u: f64| {
            let su = (0.5 * u).sin();
            let d = (d_lo + 2.0 * half * su * su).min(r);
            let s = x + d;
            if s <= 0.0 {
                return 0.0;
            }
            let num = ((r - d) * (r + d)).max(0.0).sqrt();
            let den = ((s + x - r) * (s + x + r)).max(0.0).sqrt();
            let arc = 4.0 * num.atan2(den);
            s * self.density_unchecked(s) * arc * half * u.sin()
        };
        let tol = Tolerance::relative(cfg.quad_rel_tol).with_abs(cfg.quad_rel_tol * inner);
        let est = integrate(integrand, 0.0, PI, tol)?;
        Ok(inner + est.value)
    }

    /// Radius `ρ(x)` with `ν(D(x, ρ(x))) = 1`.
    pub fn rho_at(&self, x: f64, cfg: &RhoSolverConfig) -> Result<f64> {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("center distance must be >= 0, got {x}")));
        }
        if x == 0.0 {
            if let Repr::Power { alpha } = self.repr {
                return Ok((TAU * alpha).powf(-1.0 / alpha));
            }
        }
        let log_mass = |log_r: f64| -> Result<f64> { Ok(self.disk_mass(x, log_r.exp(), cfg)?.ln()) };
        let seed = match self.laplacian_density(x) {
            Ok(d) if d > 0.0 && d.is_finite() => (PI * d).powf(-0.5),
            _ => 1.0,
        }
        .min(cfg.radius_cap);

        let mut lo = seed.ln();
        let mut f_lo = log_mass(lo)?;
        let mut hi = lo;
        let mut f_hi = f_lo;
        let step = std::f64::consts::LN_2;
        let cap = cfg.radius_cap.ln();
        if f_lo < 0.0 {
            while f_hi < 0.0 {
                lo = hi;
                f_lo = f_hi;
                hi += step;
                if hi > cap {
                    return Err(Error::BracketFailure(format!(
                        "disk mass about x = {x} stays below 1 up to radius {}",
                        cfg.radius_cap
                    )));
                }
                f_hi = log_mass(hi)?;
            }
        } else {
            let floor = (f64::MIN_POSITIVE.sqrt()).ln();
            while f_lo >= 0.0 {
                hi = lo;
                f_hi = f_lo;
                lo -= step;
                if lo < floor {
                    return Err(Error::BracketFailure(format!(
                        "disk mass about x = {x} exceeds 1 for vanishing radii"
                    )));
                }
                f_lo = log_mass(lo)?;
            }
        }
        let root = brent(log_mass, (lo, f_lo), (hi, f_hi), 0.5 * cfg.rel_tol, cfg.max_iter)?;
        Ok(root.exp())
    }

    fn check_doubling(&self, bound: f64) -> Result<()> {
        let cfg = RhoSolverConfig {
            quad_rel_tol: 1e-6,
            ..RhoSolverConfig::default()
        };
        let max_r = match &self.repr {
            Repr::Tabulated(t) => *t.radii.last().unwrap(),
            Repr::Power { .. } => 1.0,
        };
        let centers = [0.0, 0.25, 0.5, 1.0, 2.0, 4.0].map(|f| f * max_r);
        let radii = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 8.0].map(|f| f * max_r.max(1.0));
        for &x in &centers {
            for &r in &radii {
                let m1 = self.disk_mass(x, r, &cfg)?;
                let m2 = self.disk_mass(x, 2.0 * r, &cfg)?;
                if !(m1 > 0.0) || m2 / m1 > bound {
                    return Err(Error::InvalidWeight(format!(
                        "doubling probe failed at center {x}, radius {r}: ratio {} exceeds {bound}",
                        m2 / m1
                    )));
                }
            }
        }
        Ok(())
    }
}

impl TryFrom<WeightSpec> for RadialWeight {
    type Error = Error;

    fn try_from(spec: WeightSpec) -> Result<Self> {
        Self::from_spec(&spec)
    }
}

impl Serialize for RadialWeight {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.spec.serialize(s)
    }
}

impl<'de> Deserialize<'de> for RadialWeight {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let spec = WeightSpec::deserialize(d)?;
        Self::from_spec(&spec).map_err(serde::de::Error::custom)
    }
}

/// Brent's method on a bracket with `f(lo) < 0 <= f(hi)`; returns the abscissa.
fn brent<F>(mut f: F, lo: (f64, f64), hi: (f64, f64), xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut fa) = lo;
    let (mut b, mut fb) = hi;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::BracketFailure("endpoints do not straddle the root".into()));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0)),
                    (q0 - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::BracketFailure(format!(
        "root solve did not converge in {max_iter} iterations"
    )))
}

/// Tabulated radial Laplacian with log-linear interpolation between knots and a
/// power-law continuation past the last knot.
#[derive(Debug, Clone, PartialEq)]
struct Tabulated {
    radii: Vec<f64>,
    log_lap: Vec<f64>,
    tail_exponent: f64,
    // Fine grid carrying ν(D(0, x)), φ(x), φ'(x), φ''(x).
    xs: Vec<f64>,
    mass: Vec<f64>,
    phi: Vec<f64>,
    dphi: Vec<f64>,
    d2phi: Vec<f64>,
}

const SUBDIVISIONS: usize = 16;

impl Tabulated {
    fn new(radii: &[f64], log_lap: &[f64]) -> Result<Self> {
        if radii.len() < 2 || radii.len() != log_lap.len() {
            return Err(Error::InvalidWeight(
                "tabulated weight needs matching radii/log_laplacian arrays of length >= 2".into(),
            ));
        }
        if radii[0] < 0.0 || radii.iter().any(|r| !r.is_finite()) {
            return Err(Error::InvalidWeight("radii must be finite and >= 0".into()));
        }
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidWeight("radii must be strictly increasing".into()));
        }
        if log_lap.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidWeight("log_laplacian values must be finite".into()));
        }
        let m = radii.len();
        if radii[m - 2] <= 0.0 {
            return Err(Error::InvalidWeight(
                "the last two radii must be positive to fix the tail exponent".into(),
            ));
        }
        let tail_exponent = (log_lap[m - 1] - log_lap[m - 2]) / (radii[m - 1] / radii[m - 2]).ln();
        if tail_exponent <= -2.0 {
            return Err(Error::InvalidWeight(format!(
                "tail exponent {tail_exponent} <= -2 gives a finite Laplacian mass"
            )));
        }
        let mut t = Self {
            radii: radii.to_vec(),
            log_lap: log_lap.to_vec(),
            tail_exponent,
            xs: Vec::new(),
            mass: Vec::new(),
            phi: Vec::new(),
            dphi: Vec::new(),
            d2phi: Vec::new(),
        };
        t.build_fine_grid();
        Ok(t)
    }

    fn laplacian(&self, r: f64) -> f64 {
        let m = self.radii.len();
        if r <= self.radii[0] {
            return self.log_lap[0].exp();
        }
        if r >= self.radii[m - 1] {
            return (self.log_lap[m - 1] + self.tail_exponent * (r / self.radii[m - 1]).ln()).exp();
        }
        let i = self.radii.partition_point(|&v| v <= r) - 1;
        let w = (r - self.radii[i]) / (self.radii[i + 1] - self.radii[i]);
        (self.log_lap[i] + w * (self.log_lap[i + 1] - self.log_lap[i])).exp()
    }

    fn build_fine_grid(&mut self) {
        let mut knots = vec![0.0];
        knots.extend(self.radii.iter().copied().filter(|&r| r > 0.0));
        let mut xs = vec![0.0];
        for w in knots.windows(2) {
            for j in 1..=SUBDIVISIONS {
                xs.push(w[0] + (w[1] - w[0]) * j as f64 / SUBDIVISIONS as f64);
            }
        }
        let gl = GaussLegendre::new(16);
        let mut mass = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            let seg = gl.integrate(xs[i - 1], xs[i], |s| TAU * s * self.laplacian(s));
            mass[i] = mass[i - 1] + seg;
        }
        self.xs = xs;
        self.mass = mass;
        let mut phi = vec![0.0; self.xs.len()];
        for i in 1..self.xs.len() {
            let seg = gl.integrate(self.xs[i - 1], self.xs[i], |s| {
                self.central_mass_between(i - 1, s) / (TAU * s)
            });
            phi[i] = phi[i - 1] + seg;
        }
        self.dphi = (0..self.xs.len())
            .map(|i| {
                if self.xs[i] == 0.0 {
                    0.0
                } else {
                    self.mass[i] / (TAU * self.xs[i])
                }
            })
            .collect();
        self.d2phi = (0..self.xs.len())
            .map(|i| {
                let x = self.xs[i];
                if x == 0.0 {
                    0.5 * self.laplacian(0.0)
                } else {
                    self.laplacian(x) - self.dphi[i] / x
                }
            })
            .collect();
        self.phi = phi;
    }

    fn central_mass_between(&self, i: usize, s: f64) -> f64 {
        let gl = GaussLegendre::new(16);
        self.mass[i] + gl.integrate(self.xs[i], s, |u| TAU * u * self.laplacian(u))
    }

    fn tail_constants(&self) -> (f64, f64, f64, f64) {
        let n = self.xs.len() - 1;
        let r_l = self.xs[n];
        let lap_l = self.laplacian(r_l);
        let s2 = self.tail_exponent + 2.0;
        (r_l, lap_l, s2, self.mass[n])
    }

    fn central_mass(&self, r: f64) -> f64 {
        let n = self.xs.len() - 1;
        if r >= self.xs[n] {
            let (r_l, lap_l, s2, m_l) = self.tail_constants();
            return m_l + TAU * lap_l * r_l * r_l * ((r / r_l).powf(s2) - 1.0) / s2;
        }
        let i = self.xs.partition_point(|&v| v <= r) - 1;
        self.central_mass_between(i, r)
    }

    fn potential(&self, r: f64) -> f64 {
        let n = self.xs.len() - 1;
        if r >= self.xs[n] {
            let (r_l, lap_l, s2, m_l) = self.tail_constants();
            let c1 = (m_l - TAU * lap_l * r_l * r_l / s2) / TAU;
            return self.phi[n]
                + c1 * (r / r_l).ln()
                + lap_l * r_l * r_l * ((r / r_l).powf(s2) - 1.0) / (s2 * s2);
        }
        if r <= 0.0 {
            return 0.0;
        }
        let i = self.xs.partition_point(|&v| v <= r) - 1;
        quintic_hermite(
            self.xs[i],
            self.xs[i + 1],
            [self.phi[i], self.dphi[i], self.d2phi[i]],
            [self.phi[i + 1], self.dphi[i + 1], self.d2phi[i + 1]],
            r,
        )
    }
}

fn quintic_hermite(x0: f64, x1: f64, a: [f64; 3], b: [f64; 3], x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h5 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h3 = 0.5 * (t3 - 2.0 * t4 + t5);
    h0 * a[0] + h1 * h * a[1] + h2 * h * h * a[2] + h5 * b[0] + h4 * h * b[1] + h3 * h * h * b[2]
}

/// Verdict on the convergence of `Σ_n n / ρ⁴(n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Convergent,
    Divergent,
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub verdict: Verdict,
    /// `ρ` stays bounded along the positive axis, so points pile up at unit scale.
    pub degenerate: bool,
    pub partial_sums: Vec<f64>,
    /// Log-log slope of `n / ρ⁴(n)` over the upper three quarters of `[1, n_max]`.
    pub fitted_tail_exponent: f64,
    /// Log-log slope of `ρ(n)` over the same range.
    pub rho_growth_exponent: f64,
}

pub const DEFAULT_UNDECIDED_BAND: f64 = 0.1;
/// `ρ` growth exponents below this are treated as bounded `ρ`.
pub const DEGENERATE_GROWTH_EXPONENT: f64 = 0.01;

pub fn classify_critical_sum(
    w: &RadialWeight,
    n_max: usize,
    cfg: &RhoSolverConfig,
) -> Result<ClassificationReport> {
    classify_critical_sum_with_band(w, n_max, cfg, DEFAULT_UNDECIDED_BAND)
}

pub fn classify_critical_sum_with_band(
    w: &RadialWeight,
    n_max: usize,
    cfg: &RhoSolverConfig,
    band: f64,
) -> Result<ClassificationReport> {
    if n_max < 10 {
        return Err(Error::InvalidParameter(format!("n_max must be >= 10, got {n_max}")));
    }
    let rhos: Vec<f64> = (1..=n_max)
        .into_par_iter()
        .map(|n| w.rho_at(n as f64, cfg))
        .collect::<Result<_>>()?;
    let summands: Vec<f64> = rhos
        .iter()
        .enumerate()
        .map(|(i, r)| (i + 1) as f64 / r.powi(4))
        .collect();
    let mut acc = 0.0;
    let partial_sums = summands
        .iter()
        .map(|s| {
            acc += s;
            acc
        })
        .collect();
    let start = (n_max / 4).max(1);
    let logn: Vec<f64> = (start..=n_max).map(|n| (n as f64).ln()).collect();
    let log_s: Vec<f64> = (start..=n_max).map(|n| summands[n - 1].ln()).collect();
    let log_r: Vec<f64> = (start..=n_max).map(|n| rhos[n - 1].ln()).collect();
    let fitted_tail_exponent = ols_slope(&logn, &log_s);
    let rho_growth_exponent = ols_slope(&logn, &log_r);

    let (verdict, degenerate) = match w.alpha() {
        Some(alpha) => {
            let degenerate = alpha >= 2.0;
            let v = if alpha < 1.0 {
                Verdict::Convergent
            } else {
                Verdict::Divergent
            };
            (v, degenerate)
        }
        None => {
            if rho_growth_exponent < DEGENERATE_GROWTH_EXPONENT {
                (Verdict::Divergent, true)
            } else if fitted_tail_exponent < -1.0 - band {
                (Verdict::Convergent, false)
            } else if fitted_tail_exponent > -1.0 + band {
                (Verdict::Divergent, false)
            } else {
                (Verdict::Undecided, false)
            }
        }
    };
    Ok(ClassificationReport {
        verdict,
        degenerate,
        partial_sums,
        fitted_tail_exponent,
        rho_growth_exponent,
    })
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `ρ` tabulated on a uniform grid in `v = ln(1 + r)`, for callers that need many
/// evaluations (the modulus laws evaluate `ρ` at every quadrature node).
#[derive(Debug, Clone)]
pub struct RhoProfile {
    weight: RadialWeight,
    cfg: RhoSolverConfig,
    constant: Option<f64>,
    log_rho: UniformCubic<f64>,
    r_max: f64,
}

pub const PROFILE_STEPS_PER_UNIT: usize = 64;
pub const DEFAULT_PROFILE_RADIUS: f64 = 1e6;

impl RhoProfile {
    pub fn build(weight: &RadialWeight, cfg: &RhoSolverConfig, r_max: f64) -> Result<Self> {
        cfg.validate()?;
        if let Some(alpha) = weight.alpha() {
            if alpha == 2.0 {
                let rho = weight.rho_at(0.0, cfg)?;
                return Ok(Self {
                    weight: weight.clone(),
                    cfg: *cfg,
                    constant: Some(rho),
                    log_rho: UniformCubic::new(0.0, 1.0, vec![rho.ln(); 5]),
                    r_max: f64::INFINITY,
                });
            }
        }
        let v_max = r_max.ln_1p();
        let steps = ((v_max * PROFILE_STEPS_PER_UNIT as f64).ceil() as usize).max(8);
        let h = v_max / steps as f64;
        let log_rho: Vec<f64> = (0..=steps)
            .into_par_iter()
            .map(|i| weight.rho_at((i as f64 * h).exp_m1(), cfg).map(f64::ln))
            .collect::<Result<_>>()?;
        Ok(Self {
            weight: weight.clone(),
            cfg: *cfg,
            constant: None,
            log_rho: UniformCubic::new(0.0, h, log_rho),
            r_max,
        })
    }

    pub fn weight(&self) -> &RadialWeight {
        &self.weight
    }

    pub fn config(&self) -> &RhoSolverConfig {
        &self.cfg
    }

    /// `ln ρ(r)`; past the tabulated range the root solve is run directly.
    pub fn ln_rho(&self, r: f64) -> Result<f64> {
        if let Some(c) = self.constant {
            return Ok(c.ln());
        }
        if r <= self.r_max {
            Ok(self.log_rho.eval(r.ln_1p()))
        } else {
            Ok(self.weight.rho_at(r, &self.cfg)?.ln())
        }
    }

    pub fn rho(&self, r: f64) -> Result<f64> {
        self.ln_rho(r).map(f64::exp)
    }
}
