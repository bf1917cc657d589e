use focksep::weight::ols_slope;
use focksep::{RadialWeight, RhoSolverConfig};
use proptest::prelude::*;

fn cfg() -> RhoSolverConfig {
    RhoSolverConfig::default()
}

/// A smooth tabulated weight whose Laplacian density rises from 1 to r^{1/2}.
fn bumpy_table() -> RadialWeight {
    let radii: Vec<f64> = (0..=50).map(|i| 0.1 * 1.2f64.powi(i)).collect();
    let log_lap = radii.iter().map(|r| 0.5 * (1.0 + r).ln() + 0.2 * (r.ln()).sin()).collect();
    RadialWeight::tabulated(radii, log_lap).unwrap()
}

fn weights() -> Vec<RadialWeight> {
    let mut w: Vec<RadialWeight> = [0.5, 1.0, 1.5, 2.0, 3.0].iter().map(|&a| RadialWeight::power(a).unwrap()).collect();
    w.push(bumpy_table());
    w
}

#[test]
fn rho_grows_sublinearly() {
    let xs: Vec<f64> = (0..=20).map(|i| 10f64 * 100f64.powf(i as f64 / 20.0)).collect();
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    for w in weights() {
        let lr: Vec<f64> = xs.iter().map(|&x| w.rho_at(x, &cfg()).unwrap().ln()).collect();
        let slope = ols_slope(&lx, &lr);
        assert!(slope < 1.0, "{:?}: slope {slope}", w.spec());
    }
}

#[test]
fn gaussian_rho_is_flat_to_tolerance() {
    let w = RadialWeight::power(2.0).unwrap();
    let r0 = w.rho_at(0.0, &cfg()).unwrap();
    for x in [0.3, 2.0, 17.0, 450.0] {
        assert!((w.rho_at(x, &cfg()).unwrap() / r0 - 1.0).abs() < cfg().rel_tol * 10.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rho_is_one_lipschitz(wi in 0usize..6, x in 0.0f64..60.0, dx in 0.0f64..20.0) {
        let w = &weights()[wi];
        let (a, b) = (w.rho_at(x, &cfg()).unwrap(), w.rho_at(x + dx, &cfg()).unwrap());
        prop_assert!((a - b).abs() <= dx + 2.0 * cfg().rel_tol * a.max(b), "{a} {b} {dx}");
    }

    #[test]
    fn rho_is_locally_comparable(wi in 0usize..6, x in 0.0f64..200.0, frac in -1.0f64..1.0) {
        let w = &weights()[wi];
        let r = w.rho_at(x, &cfg()).unwrap();
        let y = (x + frac * r).abs();
        let ratio = w.rho_at(y, &cfg()).unwrap() / r;
        prop_assert!((1.0 / 3.0..=3.0).contains(&ratio), "ratio {ratio} at x = {x}, y = {y}");
    }

    #[test]
    fn disk_mass_increases_and_hits_one_at_rho(wi in 0usize..6, x in 0.0f64..100.0, r in 0.01f64..20.0, grow in 1.01f64..3.0) {
        let w = &weights()[wi];
        let small = w.disk_mass(x, r, &cfg()).unwrap();
        let large = w.disk_mass(x, r * grow, &cfg()).unwrap();
        prop_assert!(large > small, "{small} >= {large}");
        let at_rho = w.disk_mass(x, w.rho_at(x, &cfg()).unwrap(), &cfg()).unwrap();
        prop_assert!((at_rho - 1.0).abs() <= 10.0 * cfg().rel_tol + cfg().quad_rel_tol, "{at_rho}");
    }
}
