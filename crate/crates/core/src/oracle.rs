//! Exact pre-shock solutions of inviscid Burgers by characteristics.
//!
//! Before the first shock the map `x₀ ↦ x₀ + t u₀(x₀)` is strictly increasing, so
//! `u(x, t) = u₀(x₀)` at its unique preimage of `x`.

use crate::error::{Error, Result};

/// Shock time `-1 / min u₀'` measured from the initial time.
pub fn blowup_time_burgers(u0_deriv_min: f64) -> Result<f64> {
    if !(u0_deriv_min < 0.0) {
        return Err(Error::Domain(format!(
            "initial data with min slope {u0_deriv_min} never forms a shock"
        )));
    }
    Ok(-1.0 / u0_deriv_min)
}

/// Number of probes used to confirm the characteristic map is monotone on the bracket.
const MONOTONE_PROBES: usize = 64;

/// `u(x, t)` for inviscid Burgers with datum `u0`, solved to absolute `tol` in `x₀`.
pub fn eval_characteristics(u0: &dyn Fn(f64) -> f64, t: f64, x: f64, tol: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(u0(x));
    }
    if !(t > 0.0 && tol > 0.0) {
        return Err(Error::Domain(format!("need t > 0 and tol > 0, got t = {t}, tol = {tol}")));
    }
    let map = |x0: f64| x0 + t * u0(x0) - x;

    // |x₀ - x| = t|u₀(x₀)|, so a bracket is found by widening around x.
    let mut width = t * u0(x).abs().max(1e-3);
    let (mut lo, mut hi) = (x - width, x + width);
    let mut expansions = 0;
    while !(map(lo) <= 0.0 && map(hi) >= 0.0) {
        width *= 2.0;
        lo = x - width;
        hi = x + width;
        expansions += 1;
        if expansions > 200 {
            return Err(Error::Domain(format!("no characteristic reaches x = {x} at t = {t}")));
        }
    }

    let mut prev = map(lo);
    for i in 1..=MONOTONE_PROBES {
        let v = map(lo + (hi - lo) * i as f64 / MONOTONE_PROBES as f64);
        if v < prev {
            return Err(Error::RootNotUnique { lo, hi });
        }
        prev = v;
    }

    let bisect_tol = tol.min(1e-13 * (1.0 + x.abs()));
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if map(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let mut x0 = 0.5 * (lo + hi);

    // One Newton polish with a centred-difference slope.
    let h = 1e-6 * (1.0 + x0.abs());
    let slope = 1.0 + t * (u0(x0 + h) - u0(x0 - h)) / (2.0 * h);
    if slope > 0.0 {
        let candidate = x0 - map(x0) / slope;
        if (candidate - x0).abs() <= hi - lo + bisect_tol {
            x0 = candidate;
        }
    }
    Ok(u0(x0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blowup_times() {
        assert_eq!(blowup_time_burgers(-1.0).unwrap(), 1.0);
        assert_eq!(blowup_time_burgers(-4.0).unwrap(), 0.25);
        let eps = 0.05;
        assert!((blowup_time_burgers(-1.0 / eps).unwrap() - eps).abs() < 1e-15);
        assert!(blowup_time_burgers(0.0).is_err());
        assert!(blowup_time_burgers(2.0).is_err());
    }

    #[test]
    fn identity_at_time_zero() {
        let u0 = |x: f64| x.cos();
        assert_eq!(eval_characteristics(&u0, 0.0, 0.3, 1e-12).unwrap(), 0.3f64.cos());
    }

    #[test]
    fn linear_datum() {
        let u0 = |x: f64| -x;
        let v = eval_characteristics(&u0, 0.5, 0.7, 1e-13).unwrap();
        assert!((v + 1.4).abs() < 1e-12);
    }

    #[test]
    fn sine_against_fixed_point() {
        let u0 = |x: f64| -x.sin();
        // x₀ = x + t sin x₀ is a contraction for t < 1.
        let (t, x) = (0.5f64, 0.3f64);
        let mut x0 = x;
        for _ in 0..200 {
            x0 = x + t * x0.sin();
        }
        let v = eval_characteristics(&u0, t, x, 1e-14).unwrap();
        assert!((v - u0(x0)).abs() < 1e-12);
    }

    #[test]
    fn detects_shock() {
        let u0 = |x: f64| -x.sin();
        assert!(matches!(eval_characteristics(&u0, 1.5, 0.0, 1e-12), Err(Error::RootNotUnique { .. })));
    }
}
