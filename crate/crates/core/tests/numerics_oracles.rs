use std::f64::consts::E;

use approx::assert_relative_eq;
use chainlab::numerics::*;
use chainlab::{GrowthSolution32, GrowthSolution64};

#[test]
fn c1_is_e() {
    let s: GrowthSolution64 = solve_phi_psi(1).unwrap();
    assert_relative_eq!(s.phi_c, E, epsilon = 1e-10);
    assert_relative_eq!(s.beta_c, 1.0 / (1.0 + E), epsilon = 1e-10);
}

#[test]
fn phi_decreases_towards_one() {
    let phis: Vec<f64> = (1..=64).map(|c| solve_phi_psi::<f64>(c).unwrap().phi_c).collect();
    assert!(phis.windows(2).all(|w| w[1] < w[0]));
    assert!(phis.iter().all(|&p| p > 1.0));
    // The large-c asymptote tightens as c grows.
    let gap = |c: u64| (solve_phi_psi::<f64>(c).unwrap().phi_c - phi_large_c_approx(c as f64)).abs();
    assert!(gap(256) < gap(16));
}

#[test]
fn single_precision_agrees() {
    for c in [1u64, 2, 5, 10, 40] {
        let a: GrowthSolution32 = solve_phi_psi(c).unwrap();
        let b: GrowthSolution64 = solve_phi_psi(c).unwrap();
        assert_relative_eq!(a.phi_c as f64, b.phi_c, epsilon = 1e-4);
        assert_relative_eq!(a.beta_c as f64, b.beta_c, epsilon = 1e-4);
    }
}

#[test]
fn zero_delay_threshold_is_beta_c() {
    for c in [1u64, 3, 9] {
        let t = beta_star::<f64>(c, 0.0).unwrap();
        assert_relative_eq!(t.beta_star, solve_phi_psi::<f64>(c).unwrap().beta_c, epsilon = 1e-12);
        let d = beta_star::<f64>(c, 0.5).unwrap();
        let phi = solve_phi_psi::<f64>(c).unwrap().phi_c;
        let g = (-0.5f64).exp();
        assert_relative_eq!(d.beta_star, g / (g + phi), epsilon = 1e-12);
    }
    assert!(beta_star::<f64>(1, -1.0).is_err());
}

#[test]
fn flawed_rate_small_g_closed_forms() {
    assert_eq!(r_g_flawed::<f64>(0).unwrap(), 1.0);
    // g = 1: 2r^2 - 4r + 1 = 0.
    assert_relative_eq!(r_g_flawed::<f64>(1).unwrap(), 1.0 + 0.5f64.sqrt(), epsilon = 1e-10);
}

#[test]
fn corrected_rate_g0_is_a_single_chain() {
    let r = r_g_corrected(0, 20_000.0, 1);
    // Poisson(1) growth: sd of the rate is about 1/sqrt(18000).
    assert!((r - 1.0).abs() < 0.03, "{r}");
}

#[test]
fn stationary_law_and_a1() {
    let pi = d1_stationary::<f64>(30);
    assert_relative_eq!(pi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    assert_relative_eq!(a1::<f64>(), 1.0 / (E - 2.0), epsilon = 1e-12);
    assert_relative_eq!(a1_tilde::<f64>(), 4.0 / (3.0 * E * E - 19.0), epsilon = 1e-12);
    // The conjecture at D = 1 is 2 / sqrt(2).
    assert_relative_eq!(a_d_conjectured::<f64>(1), 2f64.sqrt(), epsilon = 1e-12);
}

#[test]
fn tail_bound_is_a_probability() {
    let b: f64 = tail_bound(1, 0.0).unwrap();
    assert_relative_eq!(b, 1.0, epsilon = 1e-12);
    let (b1, b2): (f64, f64) = (tail_bound(1, 1.0).unwrap(), tail_bound(1, 2.0).unwrap());
    assert!(b2 < b1 && b1 < 1.0);
    assert_relative_eq!(b1 * b1, b2, epsilon = 1e-12);
}
