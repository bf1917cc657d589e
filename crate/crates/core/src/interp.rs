//! Monotone piecewise-cubic (Fritsch–Carlson / PCHIP) interpolation.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip<T> {
    xs: Vec<T>,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> Pchip<T> {
    /// `xs` must be strictly increasing with at least two entries.
    pub fn new(xs: Vec<T>, ys: Vec<T>) -> Self {
        assert_eq!(xs.len(), ys.len());
        assert!(xs.len() >= 2, "need two knots");
        debug_assert!(xs.windows(2).all(|w| w[0] < w[1]));
        let n = xs.len();
        let h: Vec<T> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![T::zero(); n];
        if n == 2 {
            slopes[0] = delta[0];
            slopes[1] = delta[0];
        } else {
            for i in 1..n - 1 {
                let (d0, d1) = (delta[i - 1], delta[i]);
                if d0 == T::zero() || d1 == T::zero() || (d0 > T::zero()) != (d1 > T::zero()) {
                    slopes[i] = T::zero();
                } else {
                    let w1 = T::lit(2.0) * h[i] + h[i - 1];
                    let w2 = h[i] + T::lit(2.0) * h[i - 1];
                    slopes[i] = (w1 + w2) / (w1 / d0 + w2 / d1);
                }
            }
            slopes[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slopes[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Self { xs, ys, slopes }
    }

    pub fn xs(&self) -> &[T] {
        &self.xs
    }

    pub fn ys(&self) -> &[T] {
        &self.ys
    }

    /// Interpolated value; clamps to the end values outside the knot range.
    pub fn eval(&self, x: T) -> T {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0];
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1];
        }
        let i = self.xs.partition_point(|&v| v <= x) - 1;
        self.eval_in(i, x)
    }

    /// Evaluation with linear extension using the end slopes.
    pub fn eval_extrapolated(&self, x: T) -> T {
        let n = self.xs.len();
        if x < self.xs[0] {
            return self.ys[0] + self.slopes[0] * (x - self.xs[0]);
        }
        if x > self.xs[n - 1] {
            return self.ys[n - 1] + self.slopes[n - 1] * (x - self.xs[n - 1]);
        }
        self.eval(x)
    }

    fn eval_in(&self, i: usize, x: T) -> T {
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        h00 * self.ys[i] + h10 * h * self.slopes[i] + h01 * self.ys[i + 1] + h11 * h * self.slopes[i + 1]
    }
}

fn end_slope<T: Real>(h0: T, h1: T, d0: T, d1: T) -> T {
    let s = ((T::lit(2.0) * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if (s > T::zero()) != (d0 > T::zero()) || s == T::zero() {
        T::zero()
    } else if (d0 > T::zero()) != (d1 > T::zero()) && s.abs() > (T::lit(3.0) * d0).abs() {
        T::lit(3.0) * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reproduces_knots_and_linear_data() {
        let xs = vec![0.0, 1.0, 2.5, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x + 1.0).collect();
        let p = Pchip::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(p.eval(*x), *y);
        }
        assert!((p.eval(1.7) - 4.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn preserves_monotonicity(steps in proptest::collection::vec((0.01f64..2.0, 0.0f64..3.0), 2..30),
                                  probes in proptest::collection::vec(0.0f64..1.0, 50)) {
            let mut xs = vec![0.0];
            let mut ys = vec![0.0];
            for (dx, dy) in &steps {
                xs.push(xs.last().unwrap() + dx);
                ys.push(ys.last().unwrap() + dy);
            }
            let p = Pchip::new(xs.clone(), ys);
            let span = *xs.last().unwrap();
            let mut probes: Vec<f64> = probes.iter().map(|u| u * span).collect();
            probes.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let vals: Vec<f64> = probes.iter().map(|&x| p.eval(x)).collect();
            for w in vals.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-12);
            }
        }
    }
}

/// Cubic Hermite interpolation on a uniform grid with fourth-order finite-difference
/// slopes. Used for smooth tabulated functions where monotonicity is not a concern.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformCubic<T> {
    x0: T,
    step: T,
    ys: Vec<T>,
    slopes: Vec<T>,
}

impl<T: Real> UniformCubic<T> {
    pub fn new(x0: T, step: T, ys: Vec<T>) -> Self {
        let n = ys.len();
        assert!(n >= 5, "need at least five samples");
        let twelve_h = T::lit(12.0) * step;
        let two_h = T::lit(2.0) * step;
        let mut slopes = vec![T::zero(); n];
        for i in 0..n {
            slopes[i] = if i >= 2 && i + 2 < n {
                (ys[i - 2] - T::lit(8.0) * ys[i - 1] + T::lit(8.0) * ys[i + 1] - ys[i + 2]) / twelve_h
            } else if i == 0 {
                (-T::lit(3.0) * ys[0] + T::lit(4.0) * ys[1] - ys[2]) / two_h
            } else if i == n - 1 {
                (T::lit(3.0) * ys[n - 1] - T::lit(4.0) * ys[n - 2] + ys[n - 3]) / two_h
            } else {
                (ys[i + 1] - ys[i - 1]) / two_h
            };
        }
        Self { x0, step, ys, slopes }
    }

    pub fn x_max(&self) -> T {
        self.x0 + self.step * T::from_usize_lossy(self.ys.len() - 1)
    }

    /// Value at `x`; `x` is clamped into the grid range.
    pub fn eval(&self, x: T) -> T {
        let n = self.ys.len();
        let pos = ((x - self.x0) / self.step).max(T::zero());
        let i = pos.floor().to_usize().unwrap_or(n - 1).min(n - 2);
        let t = (pos - T::from_usize_lossy(i)).min(T::one());
        let t2 = t * t;
        let t3 = t2 * t;
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let h = self.step;
        (two * t3 - three * t2 + T::one()) * self.ys[i]
            + (t3 - two * t2 + t) * h * self.slopes[i]
            + (-two * t3 + three * t2) * self.ys[i + 1]
            + (t3 - t2) * h * self.slopes[i + 1]
    }
}

#[cfg(test)]
mod uniform_tests {
    use super::*;

    #[test]
    fn uniform_cubic_is_fourth_order_accurate() {
        let err_at = |h: f64| {
            let n = (3.0 / h) as usize + 1;
            let ys: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
            let c = UniformCubic::new(0.0, h, ys);
            (0..200)
                .map(|j| {
                    let x = 0.3 + 2.4 * j as f64 / 199.0;
                    (c.eval(x) - x.sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let e1 = err_at(0.1);
        let e2 = err_at(0.05);
        assert!(e1 < 1e-5);
        assert!(e1 / e2 > 12.0, "ratio {}", e1 / e2);
    }
}
