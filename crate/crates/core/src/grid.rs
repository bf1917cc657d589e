//! Annular cell systems: annuli of width `1/l` split into `l·n` equal angular
//! sectors, optionally shifted by half a cell in both directions.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::PointSample;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnularGrid {
    scale_l: usize,
    shifted: bool,
    r_max: f64,
}

impl AnnularGrid {
    pub fn new(scale_l: usize, shifted: bool, r_max: f64) -> Result<Self> {
        if scale_l == 0 {
            return Err(Error::InvalidParameter("grid scale must be at least 1".into()));
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParameter(format!("grid radius must be positive, got {r_max}")));
        }
        Ok(Self {
            scale_l,
            shifted,
            r_max,
        })
    }

    pub fn scale(&self) -> usize {
        self.scale_l
    }

    pub fn shifted(&self) -> bool {
        self.shifted
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// `[inner, outer)` radii of annulus `n`.
    pub fn annulus_bounds(&self, n: usize) -> (f64, f64) {
        let l = self.scale_l as f64;
        if self.shifted {
            if n == 0 {
                (0.0, 0.5 / l)
            } else {
                ((n as f64 - 0.5) / l, (n as f64 + 0.5) / l)
            }
        } else {
            ((n as f64 - 1.0) / l, n as f64 / l)
        }
    }

    /// Number of angular cells in annulus `n`.
    pub fn cells_in(&self, n: usize) -> usize {
        if self.shifted && n == 0 { 1 } else { self.scale_l * n }
    }

    /// Index of the outermost annulus whose inner radius does not exceed `r_max`.
    pub fn n_max(&self) -> usize {
        let l = self.scale_l as f64;
        if self.shifted {
            (l * self.r_max + 0.5).floor() as usize
        } else {
            (l * self.r_max).floor() as usize + 1
        }
    }

    /// The cell `(n, k)` holding the point with the given modulus and angle.
    pub fn cell_of<T: Real>(&self, modulus: T, angle: T) -> Result<(usize, usize)> {
        if !(modulus >= T::zero()) || !modulus.is_finite() || !angle.is_finite() {
            return Err(Error::Domain(format!("bad point ({modulus}, {angle})")));
        }
        let l = T::from_usize_lossy(self.scale_l);
        let half = T::lit(0.5);
        let scaled = modulus * l;
        let n = if self.shifted { (scaled + half).floor() } else { scaled.floor() + T::one() };
        let n = n.to_usize().ok_or_else(|| Error::OutOfRange(format!("modulus {modulus} is too large")))?;
        if n > self.n_max() {
            return Err(Error::OutOfRange(format!(
                "modulus {modulus} lies beyond the grid radius {}",
                self.r_max
            )));
        }
        if self.shifted && n == 0 {
            return Ok((0, 1));
        }
        let mut wrapped = angle % T::two_pi();
        if wrapped < T::zero() {
            wrapped += T::two_pi();
        }
        let mut frac = wrapped / T::two_pi();
        if frac >= T::one() {
            frac = T::zero();
        }
        let m = self.cells_in(n);
        let mf = T::from_usize_lossy(m);
        let k = if self.shifted {
            let k = (frac * mf + half).floor().to_usize().unwrap_or(0);
            if k == 0 || k > m { m } else { k }
        } else {
            ((frac * mf).floor().to_usize().unwrap_or(0) + 1).min(m)
        };
        Ok((n, k))
    }
}

/// Per-annulus totals `N_n` and occupied-cell counts `X_{n,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCounts {
    grid: AnnularGrid,
    totals: Vec<u64>,
    cells: HashMap<(usize, usize), u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub scale_l: usize,
    pub shifted: bool,
    pub totals: BTreeMap<usize, u64>,
    pub max_occupancy: BTreeMap<usize, u64>,
}

impl CellCounts {
    pub fn grid(&self) -> &AnnularGrid {
        &self.grid
    }

    /// `N_n`.
    pub fn total(&self, n: usize) -> u64 {
        self.totals.get(n).copied().unwrap_or(0)
    }

    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    /// `X_{n,k}`.
    pub fn count(&self, n: usize, k: usize) -> u64 {
        self.cells.get(&(n, k)).copied().unwrap_or(0)
    }

    pub fn occupied(&self) -> usize {
        self.cells.len()
    }

    /// Occupied cells sorted by `(n, k)`.
    pub fn sorted_cells(&self) -> Vec<((usize, usize), u64)> {
        let mut v: Vec<_> = self.cells.iter().map(|(c, x)| (*c, *x)).collect();
        v.sort_unstable();
        v
    }

    pub fn max_occupancy(&self, n: usize) -> u64 {
        (1..=self.grid.cells_in(n).max(1))
            .filter_map(|k| self.cells.get(&(n, k)))
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Annuli with at least one cell holding two or more points.
    pub fn collision_annuli(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.cells.iter().filter(|(_, x)| **x >= 2).map(|((n, _), _)| *n).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn summary(&self) -> CellSummary {
        let mut max_occupancy = BTreeMap::new();
        for (&(n, _), &x) in &self.cells {
            let e = max_occupancy.entry(n).or_insert(0);
            *e = (*e).max(x);
        }
        CellSummary {
            scale_l: self.grid.scale_l,
            shifted: self.grid.shifted,
            totals: self
                .totals
                .iter()
                .enumerate()
                .filter(|(_, t)| **t > 0)
                .map(|(n, t)| (n, *t))
                .collect(),
            max_occupancy,
        }
    }

    /// `n,k,count` rows for occupied cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,k,count\n");
        for ((n, k), x) in self.sorted_cells() {
            let _ = writeln!(out, "{n},{k},{x}");
        }
        out
    }
}

/// Counts points per cell.
pub fn count_points<T: Real>(points: impl IntoIterator<Item = (T, T)>, grid: &AnnularGrid) -> Result<CellCounts> {
    let mut totals = vec![0u64; grid.n_max() + 1];
    let mut cells = HashMap::new();
    for (m, a) in points {
        let (n, k) = grid.cell_of(m, a)?;
        totals[n] += 1;
        *cells.entry((n, k)).or_insert(0) += 1;
    }
    Ok(CellCounts {
        grid: *grid,
        totals,
        cells,
    })
}

pub fn count_cells(sample: &PointSample, grid: &AnnularGrid) -> Result<CellCounts> {
    if sample.window_r > grid.r_max {
        return Err(Error::OutOfRange(format!(
            "sample window {} exceeds grid radius {}",
            sample.window_r, grid.r_max
        )));
    }
    count_points(sample.points.iter().map(|p| (p.modulus, p.angle)), grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn cell_examples() {
        let g = AnnularGrid::new(1, false, 10.0).unwrap();
        assert_eq!(g.cell_of(1.5, PI).unwrap(), (2, 2));
        assert_eq!(g.cell_of(0.0, 0.0).unwrap(), (1, 1));
        assert_eq!(g.cell_of(1.0, 0.0).unwrap(), (2, 1));
        assert_eq!(g.cell_of(1.5, TAU).unwrap(), (2, 1));
        assert!(matches!(g.cell_of(11.5, 0.0), Err(Error::OutOfRange(_))));
        let s = AnnularGrid::new(1, true, 10.0).unwrap();
        assert_eq!(s.cell_of(0.3, 2.0).unwrap(), (0, 1));
        assert_eq!(s.cell_of(0.5, 0.0).unwrap(), (1, 1));
        // sector 1 of the shifted ring n=2 straddles angle π/2
        assert_eq!(s.cell_of(2.0, PI / 2.0).unwrap(), (2, 1));
        assert_eq!(s.cell_of(2.0, 0.1).unwrap(), (2, 2));
        let f = AnnularGrid::new(3, false, 2.0).unwrap();
        assert_eq!(f.cell_of(0.5, PI).unwrap(), (2, 4));
        assert!(AnnularGrid::new(0, false, 1.0).is_err());
    }

    #[test]
    fn counting_examples() {
        let g = AnnularGrid::new(1, false, 5.0).unwrap();
        let c = count_points([(0.5, 0.1), (1.5, 0.1), (2.5, 4.0)], &g).unwrap();
        assert_eq!(c.occupied(), 3);
        assert_eq!((c.total(1), c.total(2), c.total(3)), (1, 1, 1));
        assert!(c.collision_annuli().is_empty());
        let c = count_points([(1.5, 1.0), (1.5, 1.0)], &g).unwrap();
        assert_eq!(c.count(2, 1), 2);
        assert_eq!(c.collision_annuli(), vec![2]);
        assert_eq!(c.to_csv(), "n,k,count\n2,1,2\n");
    }

    #[test]
    fn matches_brute_force_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<(f64, f64)> = (0..10_000).map(|_| (rng.random::<f64>() * 7.9, rng.random::<f64>() * TAU)).collect();
        for shifted in [false, true] {
            let g = AnnularGrid::new(3, shifted, 8.0).unwrap();
            let c = count_points(pts.iter().copied(), &g).unwrap();
            for n in 0..=g.n_max() {
                let (lo, hi) = g.annulus_bounds(n);
                let m = g.cells_in(n);
                if !shifted && n == 0 {
                    continue;
                }
                for k in 1..=m {
                    let brute = pts
                        .iter()
                        .filter(|(r, a)| {
                            if *r < lo || *r >= hi {
                                return false;
                            }
                            if shifted && n == 0 {
                                return true;
                            }
                            let f = a / TAU * m as f64;
                            if shifted {
                                let c = (k as f64 - 0.5, k as f64 + 0.5);
                                (f >= c.0 && f < c.1) || (k == m && (f < 0.5 || f >= m as f64 - 0.5))
                            } else {
                                f >= (k - 1) as f64 && f < k as f64
                            }
                        })
                        .count() as u64;
                    assert_eq!(c.count(n, k), brute, "shifted={shifted} n={n} k={k}");
                }
                assert_eq!((1..=m).map(|k| c.count(n, k)).sum::<u64>(), c.total(n));
            }
            assert_eq!(c.totals().iter().sum::<u64>(), 10_000);
        }
    }

    #[test]
    fn cells_of_an_annulus_have_equal_area() {
        let g = AnnularGrid::new(2, false, 3.0).unwrap();
        let n = 4;
        let (lo, hi) = g.annulus_bounds(n);
        let m = g.cells_in(n);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut hits = vec![0usize; m + 1];
        let mut inside = 0usize;
        let draws = 2_000_000;
        for _ in 0..draws {
            let (x, y) = (rng.random::<f64>() * 2.0 * hi - hi, rng.random::<f64>() * 2.0 * hi - hi);
            let r = x.hypot(y);
            if r < lo || r >= hi {
                continue;
            }
            inside += 1;
            let (nn, k) = g.cell_of(r, y.atan2(x).rem_euclid(TAU)).unwrap();
            assert_eq!(nn, n);
            hits[k] += 1;
        }
        let box_area = 4.0 * hi * hi;
        let ann = PI * (hi * hi - lo * lo);
        let est = inside as f64 / draws as f64 * box_area;
        assert!((est / ann - 1.0).abs() < 0.01);
        for &h in &hits[1..] {
            assert!((h as f64 * m as f64 / inside as f64 - 1.0).abs() < 0.05);
        }
    }

    proptest! {
        #[test]
        fn coarse_totals_sum_fine_totals(pts in prop::collection::vec((0.0f64..5.99, 0.0f64..TAU), 0..200)) {
            let coarse = count_points(pts.iter().copied(), &AnnularGrid::new(1, false, 6.0).unwrap()).unwrap();
            let fine = count_points(pts.iter().copied(), &AnnularGrid::new(2, false, 6.0).unwrap()).unwrap();
            for n in 1..=6 {
                prop_assert_eq!(coarse.total(n), fine.total(2 * n - 1) + fine.total(2 * n));
            }
        }

        #[test]
        fn every_point_has_one_cell(r in 0.0f64..9.9, a in 0.0f64..TAU, l in 1usize..5, shifted: bool) {
            let g = AnnularGrid::new(l, shifted, 10.0).unwrap();
            let (n, k) = g.cell_of(r, a).unwrap();
            let (lo, hi) = g.annulus_bounds(n);
            prop_assert!(r >= lo && r < hi);
            prop_assert!(k >= 1 && k <= g.cells_in(n));
        }
    }
}
