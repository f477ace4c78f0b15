//! Growth-rate constants and security thresholds.
//!
//! Rates are normalised to one block per unit time per mining lineage;
//! callers scale by the actual rate.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::seed::rng_from_seed;
use crate::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum NumericsError {
    #[error("root of {what} not bracketed on [{lo}, {hi}]")]
    Bracket { what: &'static str, lo: f64, hi: f64 },
    #[error("c = {c}: fixed-point phi {fixed_point} and theta-route phi {theta_route} disagree")]
    CrossValidation { c: u64, fixed_point: f64, theta_route: f64 },
    #[error("{0} did not converge")]
    NonConvergence(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Solved growth constants for one correlation parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthSolution<T> {
    pub c: u64,
    pub phi_c: T,
    pub psi_c: T,
    pub theta_star: T,
    pub beta_c: T,
}

impl<T: Scalar> GrowthSolution<T> {
    /// Growth per block of correlation window.
    pub fn eta_c(&self) -> T {
        self.phi_c / T::from_count(self.c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DelayThreshold<T> {
    pub lambda_h_delta: T,
    pub g_factor: T,
    pub beta_star: T,
}

/// Bisection for a sign change of `f` on `[lo, hi]`. Runs until the bracket
/// stops shrinking, so the result is as precise as `T` allows.
fn bisect<T: Scalar>(what: &'static str, mut lo: T, mut hi: T, f: impl Fn(T) -> T) -> Result<T, NumericsError> {
    let (flo, fhi) = (f(lo), f(hi));
    if flo == T::zero() {
        return Ok(lo);
    }
    if fhi == T::zero() {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || flo.is_nan() || fhi.is_nan() {
        return Err(NumericsError::Bracket {
            what,
            lo: lo.to_f64().unwrap_or(f64::NAN),
            hi: hi.to_f64().unwrap_or(f64::NAN),
        });
    }
    let lo_positive = flo > T::zero();
    for _ in 0..T::MAX_BISECTIONS {
        let mid = lo + (hi - lo) / T::lit(2.0);
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == T::zero() {
            return Ok(mid);
        }
        if (fm > T::zero()) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo + (hi - lo) / T::lit(2.0))
}

fn c_as<T: Scalar>(c: u64) -> Result<T, NumericsError> {
    if c == 0 {
        return Err(NumericsError::InvalidArgument("c must be at least 1".into()));
    }
    Ok(T::from_count(c))
}

/// Log moment generating function of the `c`-step inter-fork time, at unit
/// rate: `-ln(-θ) - (c-1) ln(1-θ)`.
pub fn lambda_c<T: Scalar>(theta: T, c: u64) -> T {
    let cm1 = T::from_count(c - 1);
    -(-theta).ln() - cm1 * (T::one() - theta).ln()
}

/// `Λ_c(θ) - θ Λ_c'(θ)` (with the `-1` moved across); zero at θ*.
pub fn theta_residual<T: Scalar>(theta: T, c: u64) -> T {
    let cm1 = T::from_count(c - 1);
    let one = T::one();
    lambda_c(theta, c) + one - cm1 * theta / (one - theta)
}

/// The unique negative root of `theta_residual`.
pub fn solve_theta_star<T: Scalar>(c: u64) -> Result<T, NumericsError> {
    c_as::<T>(c)?;
    if c == 1 {
        return Ok(-T::E());
    }
    // The residual is -> +inf as θ -> 0- and negative at θ = -e for c >= 2.
    let hi = -T::min_positive_value().sqrt();
    bisect("theta*", -T::E(), hi, |t| theta_residual(t, c))
}

/// φ from θ*: `-cθ / (ln(-θ) + (c-1) ln(1-θ))`.
pub fn phi_from_theta<T: Scalar>(theta: T, c: u64) -> T {
    let cf = T::from_count(c);
    -cf * theta / (-lambda_c(theta, c))
}

/// The positive root ψ of `cφψ² - c(1-φ)ψ - 1 = 0`.
pub fn psi_of_phi<T: Scalar>(phi: T, c: u64) -> T {
    let cf = T::from_count(c);
    let b = cf * (T::one() - phi);
    let disc = (b * b + T::lit(4.0) * cf * phi).sqrt();
    if b >= T::zero() {
        (b + disc) / (T::lit(2.0) * cf * phi)
    } else {
        // Rationalised form avoids cancellation for φ > 1.
        T::lit(2.0) / (disc - b)
    }
}

/// The fixed-point function whose root in φ (with ψ = ψ(φ)) is φ_c.
pub fn f_c<T: Scalar>(phi: T, psi: T, c: u64) -> T {
    let one = T::one();
    let cf = T::from_count(c);
    -one / phi + one + psi + (one + psi) * (one / (phi * (one + psi))).ln()
        + (one + cf * psi).ln() / cf
        + psi * (one + one / (cf * psi)).ln()
}

fn cross_tolerance<T: Scalar>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(1000.0))
}

/// φ_c by the fixed-point route alone.
pub fn phi_fixed_point<T: Scalar>(c: u64) -> Result<T, NumericsError> {
    c_as::<T>(c)?;
    if c == 1 {
        return Ok(T::E());
    }
    let lo = T::one() + T::epsilon().sqrt();
    bisect("F_c", lo, T::E(), |phi| f_c(phi, psi_of_phi(phi, c), c))
}

/// Solves both formulations, cross-checks them and returns the constants.
pub fn solve_phi_psi<T: Scalar>(c: u64) -> Result<GrowthSolution<T>, NumericsError> {
    let theta_star = solve_theta_star::<T>(c)?;
    let phi_theta = phi_from_theta(theta_star, c);
    let phi_fp = phi_fixed_point::<T>(c)?;
    if (phi_fp - phi_theta).abs() > cross_tolerance::<T>() {
        return Err(NumericsError::CrossValidation {
            c,
            fixed_point: phi_fp.to_f64().unwrap_or(f64::NAN),
            theta_route: phi_theta.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(GrowthSolution {
        c,
        phi_c: phi_fp,
        psi_c: psi_of_phi(phi_fp, c),
        theta_star,
        beta_c: T::one() / (T::one() + phi_fp),
    })
}

/// Large-`c` asymptote `1 + sqrt(ln c / c)`; `c` may be any real ≥ 2.
pub fn phi_large_c_approx<T: Scalar>(c: T) -> T {
    T::one() + (c.ln() / c).sqrt()
}

/// Security threshold under network delay: `g / (g + φ_c)`, `g = e^{-λ_h Δ}`.
pub fn beta_star<T: Scalar>(c: u64, lambda_h_delta: T) -> Result<DelayThreshold<T>, NumericsError> {
    if !(lambda_h_delta >= T::zero()) {
        return Err(NumericsError::InvalidArgument("lambda_h_delta must be non-negative".into()));
    }
    let phi = solve_phi_psi::<T>(c)?.phi_c;
    let g = (-lambda_h_delta).exp();
    Ok(DelayThreshold { lambda_h_delta, g_factor: g, beta_star: g / (g + phi) })
}

/// Upper bound on `P(D(t) ≥ φ_c λ t + c x)`: `exp(Λ_c(θ*) x)`.
pub fn tail_bound<T: Scalar>(c: u64, x: T) -> Result<T, NumericsError> {
    let theta = solve_theta_star::<T>(c)?;
    Ok((lambda_c(theta, c) * x).exp())
}

/// Residual of the g-greedy growth equations with `x_0 = 1`, propagated by
/// the recurrence.
fn r_g_flawed_residual<T: Scalar>(r: T, g: u32) -> T {
    let two = T::lit(2.0);
    let mut prev = T::one();
    let mut cur = two * r - T::one();
    for _ in 1..g {
        let next = two * r * (cur - prev) - cur;
        prev = cur;
        cur = next;
    }
    cur - r * (cur - prev)
}

/// Growth rate from the g-greedy equations that treat each level's block
/// count as deterministic. Returns the largest root above one.
///
/// These equations over-count: for `g = 8` they exceed `e`, the growth rate
/// of an unrestricted tree.
pub fn r_g_flawed<T: Scalar>(g: u32) -> Result<T, NumericsError> {
    if g == 0 {
        return Ok(T::one());
    }
    let f = |r: T| r_g_flawed_residual(r, g);
    let (lo, hi, steps) = (1.0, 3.5, 5000);
    let mut best = None;
    let mut prev_r = T::lit(lo);
    let mut prev_f = f(prev_r);
    for k in 1..=steps {
        let r = T::lit(lo + (hi - lo) * k as f64 / steps as f64);
        let fr = f(r);
        if fr == T::zero() || (fr.signum() != prev_f.signum() && k > 1) {
            best = Some((prev_r, r));
        }
        prev_r = r;
        prev_f = fr;
    }
    let (a, b) = best.ok_or(NumericsError::NonConvergence("r_g_flawed grid scan"))?;
    bisect("R_g", a, b, f)
}

/// Knobs for [`r_g_mean_field`].
#[derive(Clone, Copy, Debug)]
pub struct MeanFieldOpts {
    pub step: f64,
    pub horizon: f64,
    pub threshold: f64,
}

impl Default for MeanFieldOpts {
    fn default() -> Self {
        Self { step: 1e-3, horizon: 300.0, threshold: 1.0 }
    }
}

/// Front speed of the expected-count equations `dx_l/dt = x_{l-1}` where
/// only levels within `g` of the front `L(t)` mine and the front advances
/// when `x_{L+1}` reaches the threshold. Explicit Euler; the slope of
/// `L(t)` is fitted over the second half of the horizon.
pub fn r_g_mean_field<T: Scalar>(g: u32, opts: MeanFieldOpts) -> Result<T, NumericsError> {
    let dt = T::lit(opts.step);
    let thr = T::lit(opts.threshold);
    let steps = (opts.horizon / opts.step).ceil() as usize;
    let g = g as usize;
    let mut x = vec![T::zero(); (opts.horizon * 4.0) as usize + 64];
    x[0] = T::one();
    let mut front = 0usize;
    let mut hist: Vec<(f64, f64)> = Vec::new();
    let mut d = vec![T::zero(); g + 1];
    for k in 1..=steps {
        let lo = front.saturating_sub(g);
        let n = front - lo + 1;
        d[..n].copy_from_slice(&x[lo..=front]);
        for (i, di) in d[..n].iter().enumerate() {
            x[lo + i + 1] = x[lo + i + 1] + dt * *di;
        }
        let t = k as f64 * opts.step;
        while front + 1 < x.len() - 1 && x[front + 1] >= thr {
            front += 1;
            hist.push((t, front as f64));
        }
        if front + 2 >= x.len() {
            return Err(NumericsError::NonConvergence("r_g_mean_field level buffer"));
        }
    }
    let tail: Vec<_> = hist.into_iter().filter(|(t, _)| *t > opts.horizon / 2.0).collect();
    if tail.len() < 2 {
        return Err(NumericsError::NonConvergence("r_g_mean_field front"));
    }
    Ok(T::lit(least_squares_slope(&tail)))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Chain growth rate of honest g-greedy mining, estimated by simulating the
/// exact block-count process: every block within `g` levels of the top
/// mines at unit rate. Only the counts at the `g + 1` window levels matter,
/// so the simulation is exact in distribution. The first tenth of the
/// horizon is discarded as burn-in.
pub fn r_g_corrected(g: u32, horizon: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let w = g as usize + 1;
    // counts[0] is level L - g, counts[g] is the top level L.
    let mut counts = vec![0u64; w];
    counts[g as usize] = 1;
    let mut total: u64 = 1;
    let (mut t, mut top) = (0.0, 0u64);
    let burn = horizon * 0.1;
    let mut top_at_burn = None;
    while t < horizon {
        t += -(1.0 - rng.random::<f64>()).ln() / total as f64;
        if top_at_burn.is_none() && t > burn {
            top_at_burn = Some(top);
        }
        let mut r = rng.random_range(0..total);
        let mut k = 0;
        while r >= counts[k] {
            r -= counts[k];
            k += 1;
        }
        if k + 1 < w {
            counts[k + 1] += 1;
            total += 1;
        } else {
            total -= counts[0];
            counts.rotate_left(1);
            counts[w - 1] = 1;
            total += 1;
            top += 1;
        }
    }
    (top - top_at_burn.unwrap_or(0)) as f64 / (horizon - burn)
}

/// Tip growth rate `1/(e-2)` of 1-distance-greedy mining at unit total rate.
pub fn a1<T: Scalar>() -> T {
    T::one() / (T::E() - T::lit(2.0))
}

/// Tip growth rate `4/(3e²-19)` when honest power is split over two balanced
/// 1-distance-greedy chains.
pub fn a1_tilde<T: Scalar>() -> T {
    let e = T::E();
    T::lit(4.0) / (T::lit(3.0) * e * e - T::lit(19.0))
}

/// `(D+1) / ((D+1)!)^{1/(D+1)}`: a conjectured D-distance growth rate from
/// prior work. Not a verified constant.
pub fn a_d_conjectured<T: Scalar>(dist_d: u32) -> T {
    let n = dist_d as u64 + 1;
    let log_fact: T = (1..=n).map(T::from_count).map(T::ln).fold(T::zero(), |a, b| a + b);
    T::from_count(n) / (log_fact / T::from_count(n)).exp()
}

/// Stationary law of the tip-count chain (`W → W+1` at rate 1, `W → 1` at
/// rate `W`), truncated to `n_max` states.
pub fn d1_stationary<T: Scalar>(n_max: usize) -> Vec<T> {
    let pi1 = T::one() / (T::lit(2.0) * (T::E() - T::lit(2.0)));
    let mut out = Vec::with_capacity(n_max);
    let mut fact = T::lit(2.0); // (n+1)! at n = 1
    for n in 1..=n_max {
        if n > 1 {
            fact = fact * T::from_count(n as u64 + 1);
        }
        out.push(T::lit(2.0) * pi1 / fact);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TipChain {
    /// All honest power on one 1-distance-greedy tree.
    PlainD1,
    /// Honest power split evenly over two balanced trees.
    BalancedD1,
}

/// Simulates the tip-count Markov chain and returns chain-height growth per
/// unit time at unit total honest rate.
pub fn ctmc_tip_sim(kind: TipChain, horizon: f64, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let (mut t, mut height) = (0.0, 0u64);
    match kind {
        TipChain::PlainD1 => {
            // W tips; new sibling at rate 1 (mining on the parent), new
            // height at rate W.
            let mut w = 1u64;
            loop {
                let rate = 1.0 + w as f64;
                t += -(1.0 - rng.random::<f64>()).ln() / rate;
                if t > horizon {
                    break;
                }
                if rng.random::<f64>() * rate < 1.0 {
                    w += 1;
                } else {
                    w = 1;
                    height += 1;
                }
            }
        }
        TipChain::BalancedD1 => {
            // Z tips over both trees at half rate each; a new height leaves
            // the new tip plus the matching block on the other tree.
            let mut z = 2u64;
            loop {
                let up = 0.5 * z as f64;
                let rate = 1.0 + up;
                t += -(1.0 - rng.random::<f64>()).ln() / rate;
                if t > horizon {
                    break;
                }
                if rng.random::<f64>() * rate < 1.0 {
                    z += 1;
                } else {
                    z = 2;
                    height += 1;
                }
            }
        }
    }
    height as f64 / horizon
}

/// Number of blocks ahead a node can predict its own eligibility.
pub fn prediction_window(c: u64) -> u64 {
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lambda_c_values() {
        assert_abs_diff_eq!(lambda_c(-std::f64::consts::E, 1), -1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lambda_c(-1.0f64, 1), 0.0);
        assert_abs_diff_eq!(lambda_c(-1.0f64, 2), -(2.0f64.ln()), epsilon = 1e-15);
    }

    #[test]
    fn theta_star_c1_and_residual() {
        let t: f64 = solve_theta_star(1).unwrap();
        assert_abs_diff_eq!(t, -std::f64::consts::E, epsilon = 1e-10);
        for c in [2, 3, 7, 10, 50, 256] {
            let t: f64 = solve_theta_star(c).unwrap();
            assert!(t < 0.0);
            assert!(theta_residual(t, c).abs() < 1e-10, "c={c}");
        }
    }

    #[test]
    fn phi_c1_is_e() {
        let s: GrowthSolution<f64> = solve_phi_psi(1).unwrap();
        assert_abs_diff_eq!(s.phi_c, std::f64::consts::E, epsilon = 1e-12);
        assert_abs_diff_eq!(s.psi_c, 1.0 / std::f64::consts::E, epsilon = 1e-12);
    }

    #[test]
    fn f32_solver_agrees_with_f64() {
        for c in [1, 2, 5, 10] {
            let a: GrowthSolution<f32> = solve_phi_psi(c).unwrap();
            let b: GrowthSolution<f64> = solve_phi_psi(c).unwrap();
            assert!((a.phi_c as f64 - b.phi_c).abs() < 1e-4, "c={c}");
        }
    }

    #[test]
    fn zero_c_rejected() {
        assert!(solve_phi_psi::<f64>(0).is_err());
    }

    #[test]
    fn large_c_approx() {
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(phi_large_c_approx(e), 1.0 + 1.0 / e.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn beta_star_limits() {
        let d: DelayThreshold<f64> = beta_star(1, 0.0).unwrap();
        assert_abs_diff_eq!(d.beta_star, 1.0 / (1.0 + std::f64::consts::E), epsilon = 1e-12);
        let d: DelayThreshold<f64> = beta_star(1, 60.0).unwrap();
        assert!(d.beta_star < 1e-25);
        assert!(beta_star::<f64>(1, -1.0).is_err());
    }

    #[test]
    fn r_g_flawed_small_cases() {
        assert_eq!(r_g_flawed::<f64>(0).unwrap(), 1.0);
        assert_abs_diff_eq!(r_g_flawed::<f64>(1).unwrap(), 1.0 + 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn mean_field_g0_is_one() {
        let r: f64 = r_g_mean_field(0, MeanFieldOpts::default()).unwrap();
        assert_abs_diff_eq!(r, 1.0, epsilon = 2e-3);
    }

    #[test]
    fn corrected_rg_g0_is_one() {
        assert_abs_diff_eq!(r_g_corrected(0, 2000.0, 1), 1.0, epsilon = 0.1);
    }

    #[test]
    fn a_d_conjectured_d1() {
        assert_abs_diff_eq!(a_d_conjectured::<f64>(1), 2.0 / 2f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn prediction_window_is_c() {
        assert_eq!(prediction_window(1), 1);
        assert_eq!(prediction_window(10), 10);
    }
}
