//! Sums of independent Bernoulli variables: exact laws and the bounds used to
//! compare them with Poisson variables.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{CompensatedSum, Real};

/// Probability mass function on `{0, 1, ..., M}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf<T> {
    probs: Vec<T>,
}

impl<T: Real> Pmf<T> {
    /// Wraps raw masses; rejects negative or non-finite entries.
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if let Some(i) = probs.iter().position(|p| !(*p >= T::zero()) || !p.is_finite()) {
            return Err(Error::InvalidParameter(format!("pmf entry {i} is not a finite nonnegative number")));
        }
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<T> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Mass at `m` (zero outside the stored range).
    pub fn at(&self, m: usize) -> T {
        self.probs.get(m).copied().unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.probs.iter().copied().collect::<CompensatedSum<T>>().value()
    }

    pub fn mean(&self) -> T {
        self.probs
            .iter()
            .enumerate()
            .map(|(m, p)| T::from_usize_lossy(m) * *p)
            .collect::<CompensatedSum<T>>()
            .value()
    }

    /// `P(X >= m)`.
    pub fn upper_tail(&self, m: usize) -> T {
        self.probs.iter().skip(m).copied().collect::<CompensatedSum<T>>().value()
    }

    /// `P(X <= m)`.
    pub fn lower_tail(&self, m: usize) -> T {
        self.probs.iter().take(m + 1).copied().collect::<CompensatedSum<T>>().value()
    }
}

fn check_probabilities<T: Real>(p: &[T]) -> Result<()> {
    match p.iter().position(|x| !(*x >= T::zero() && *x <= T::one())) {
        Some(i) => Err(Error::InvalidParameter(format!("probability {i} is outside [0, 1]: {}", p[i]))),
        None => Ok(()),
    }
}

/// Exact law of `Σ ξ_i` with `ξ_i ~ Bernoulli(p_i)` by iterative convolution.
/// Zero probabilities are skipped, so the support has one more point than there
/// are nonzero entries.
pub fn poisson_binomial_pmf<T: Real>(p: &[T]) -> Result<Pmf<T>> {
    check_probabilities(p)?;
    let active: Vec<T> = p.iter().copied().filter(|x| *x > T::zero()).collect();
    let mut cur = vec![T::zero(); active.len() + 1];
    // running compensation terms keep long convolutions accurate
    let mut comp = vec![T::zero(); active.len() + 1];
    cur[0] = T::one();
    for (i, &q) in active.iter().enumerate() {
        let stay = T::one() - q;
        for m in (0..=i + 1).rev() {
            let carried = if m > 0 { (cur[m - 1] + comp[m - 1]) * q } else { T::zero() };
            let kept = if m <= i { (cur[m] + comp[m]) * stay } else { T::zero() };
            let (s, e) = crate::scalar::two_sum(kept, carried);
            cur[m] = s;
            comp[m] = e;
        }
    }
    let probs = cur.iter().zip(&comp).map(|(a, b)| (*a + *b).max(T::zero())).collect();
    Pmf::new(probs)
}

/// Poisson masses on `0..=m_max` plus the mass left beyond `m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedPoisson<T> {
    pub pmf: Pmf<T>,
    pub remainder: T,
}

fn ln_factorial<T: Real>(m: usize) -> T {
    (2..=m).map(|j| T::from_usize_lossy(j).ln()).collect::<CompensatedSum<T>>().value()
}

/// `e^{-μ} μ^m / m!` for `m <= m_max`, built outward from the mode in log space.
pub fn poisson_pmf<T: Real>(mu: T, m_max: usize) -> Result<TruncatedPoisson<T>> {
    if !(mu >= T::zero()) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("Poisson mean must be finite and nonnegative, got {mu}")));
    }
    if mu == T::zero() {
        let mut probs = vec![T::zero(); m_max + 1];
        probs[0] = T::one();
        return Ok(TruncatedPoisson {
            pmf: Pmf::new(probs)?,
            remainder: T::zero(),
        });
    }
    let mode = mu.floor().to_usize().unwrap_or(usize::MAX);
    let ln_mu = mu.ln();
    let log_at = |m: usize| -mu + T::from_usize_lossy(m) * ln_mu - ln_factorial::<T>(m);
    let anchor = mode.min(m_max);
    let mut probs = vec![T::zero(); m_max + 1];
    let mut lp = log_at(anchor);
    probs[anchor] = lp.exp();
    for m in (0..anchor).rev() {
        lp = lp + T::from_usize_lossy(m + 1).ln() - ln_mu;
        probs[m] = lp.exp();
    }
    lp = log_at(anchor);
    for (m, slot) in probs.iter_mut().enumerate().skip(anchor + 1) {
        lp = lp + ln_mu - T::from_usize_lossy(m).ln();
        *slot = lp.exp();
    }
    let remainder = if m_max >= mode {
        // terms past the mode decrease geometrically
        let mut lt = log_at(m_max);
        let mut acc = CompensatedSum::new();
        let mut m = m_max;
        loop {
            m += 1;
            lt = lt + ln_mu - T::from_usize_lossy(m).ln();
            let term = lt.exp();
            acc.add(term);
            if term <= acc.value() * T::epsilon() * T::lit(1e-3) || term < T::min_positive_value() {
                break;
            }
        }
        acc.value()
    } else {
        let head: CompensatedSum<T> = probs.iter().copied().collect();
        (T::one() - head.value()).max(T::zero())
    };
    Ok(TruncatedPoisson {
        pmf: Pmf::new(probs)?,
        remainder,
    })
}

/// `Σ_m |P_m − Q_m|` with implicit zero padding (twice the total-variation distance).
pub fn tv_distance<T: Real>(p: &Pmf<T>, q: &Pmf<T>) -> T {
    let n = p.len().max(q.len());
    (0..n)
        .map(|m| (p.at(m) - q.at(m)).abs())
        .collect::<CompensatedSum<T>>()
        .value()
}

/// `2 Σ p_i²`.
pub fn lecam_bound<T: Real>(p: &[T]) -> Result<T> {
    check_probabilities(p)?;
    Ok(T::lit(2.0) * p.iter().map(|x| *x * *x).collect::<CompensatedSum<T>>().value())
}

/// L1 distance between the Poisson-binomial law of `p` and the Poisson law of the
/// same mean, with the Poisson tail beyond the support counted in full.
pub fn lecam_distance<T: Real>(p: &[T]) -> Result<T> {
    let pb = poisson_binomial_pmf(p)?;
    let mu = p.iter().copied().collect::<CompensatedSum<T>>().value();
    let po = poisson_pmf(mu, pb.len().saturating_sub(1))?;
    Ok(tv_distance(&pb, &po.pmf) + po.remainder)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChernoffKind {
    /// `P(X >= (1+δ)μ)`.
    UpperTail,
    /// `P(X <= (1−δ)μ)`.
    LowerTail,
    /// `P(|X − μ| >= δμ)`.
    TwoSided,
}

pub fn chernoff_bound<T: Real>(mu: T, delta: T, kind: ChernoffKind) -> Result<T> {
    if !(mu > T::zero()) || !mu.is_finite() {
        return Err(Error::InvalidParameter(format!("Chernoff mean must be positive, got {mu}")));
    }
    let ok = match kind {
        ChernoffKind::UpperTail => delta > T::zero() && delta.is_finite(),
        ChernoffKind::LowerTail | ChernoffKind::TwoSided => delta > T::zero() && delta < T::one(),
    };
    if !ok {
        return Err(Error::InvalidParameter(format!("δ = {delta} out of range for {kind:?}")));
    }
    let d2m = delta * delta * mu;
    let v = match kind {
        ChernoffKind::UpperTail => (-d2m / (T::lit(2.0) + delta)).exp(),
        ChernoffKind::LowerTail => (-d2m / T::lit(2.0)).exp(),
        ChernoffKind::TwoSided => T::lit(2.0) * (-d2m / T::lit(3.0)).exp(),
    };
    Ok(v.min(T::one()).max(T::zero()))
}

/// `max(0, 1 − md/L)^{m−1}`: the chance that `m` uniform points on a circle of
/// length `L` keep pairwise gaps of at least `d`, in its uncrowded-road form.
pub fn uncrowded_road_prob<T: Real>(m: usize, length: T, d: T) -> T {
    if m <= 1 {
        return T::one();
    }
    let base = (T::one() - T::from_usize_lossy(m) * d / length).max(T::zero());
    base.powi((m - 1) as i32)
}

/// `sup_k [(1 − p_k) − Π_{j≠k} (1 − p_j)]`, computed with prefix and suffix products.
pub fn exclusion_defect<T: Real>(p: &[T]) -> Result<T> {
    check_probabilities(p)?;
    let n = p.len();
    let mut prefix = vec![T::one(); n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] * (T::one() - p[i]);
    }
    let mut suffix = T::one();
    let mut best = T::neg_infinity();
    for k in (0..n).rev() {
        let others = prefix[k] * suffix;
        best = best.max((T::one() - p[k]) - others);
        suffix *= T::one() - p[k];
    }
    Ok(if n == 0 { T::zero() } else { best })
}
