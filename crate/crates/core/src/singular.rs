//! Principal-value evaluation of the fractional Laplacian on the real line.
//!
//! With `s = 1 + 2α` and the symmetric difference
//! `N(r) = 2f(x) - f(x + r) - f(x - r)`, the principal value becomes the proper integral
//! `(-Δ)^α f(x) = C_α ∫_0^∞ N(r) r^{-s} dr`. Near `r = 0` the even expansion
//! `N(r) = a r² + b r⁴ + O(r⁶)` is integrated exactly; the rest goes to adaptive
//! Gauss–Kronrod with a tail rule chosen by the caller.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fraclap::{c_alpha, Alpha};
use crate::profiles::ProfileNu;
use crate::quadrature::integrate;
use crate::special::hurwitz_zeta;

/// How the integrand behaves beyond the explicit integration range.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    /// `f(x ± r) = 0` for `r > cutoff`.
    Vanishing,
    /// `f` is periodic with period `2·half_period`; the lattice of images is summed
    /// exactly through the Hurwitz zeta function and `cutoff` is ignored.
    Periodic { half_period: f64 },
    /// `f(η) → 0` as `|η| → ∞`, with localized structure of width `scale` around each
    /// of `features`; the range beyond `cutoff` is mapped onto `(0, 1]`.
    Decaying { features: Vec<f64>, scale: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PvOptions {
    /// Radius of the analytically integrated core around the evaluation point.
    pub inner_radius: f64,
    pub cutoff: f64,
    /// Absolute tolerance on the integral before multiplication by `C_α`.
    pub tol: f64,
    pub max_pieces: usize,
    pub tail: Tail,
}

impl PvOptions {
    pub fn new(tail: Tail, cutoff: f64, tol: f64) -> Self {
        Self { inner_radius: 1e-3, cutoff, tol, max_pieces: 20_000, tail }
    }
}

/// Geometric breakpoints `lo, 2lo, 4lo, …, hi`.
fn geometric(lo: f64, hi: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut r = 2.0 * lo;
    while r < hi {
        pts.push(r);
        r *= 2.0;
    }
    pts.push(hi);
    pts
}

/// Sum of the image kernels `Σ_{m≠0} |r + 2Pm|^{-s}` for `0 ≤ r ≤ P`.
fn image_kernel(r: f64, s: f64, half_period: f64) -> f64 {
    let p2 = 2.0 * half_period;
    let t = r / p2;
    p2.powf(-s) * (hurwitz_zeta(s, 1.0 + t) + hurwitz_zeta(s, 1.0 - t))
}

pub fn flap_singular_point(f: &dyn Fn(f64) -> f64, x: f64, a: Alpha, opts: &PvOptions) -> Result<f64> {
    let s = 1.0 + a.order();
    let two_alpha = a.order();
    let fx = f(x);
    let pair = |r: f64| 2.0 * fx - f(x + r) - f(x - r);
    let delta = opts.inner_radius;
    if !(delta > 0.0 && opts.tol > 0.0) {
        return Err(Error::Domain("inner radius and tolerance must be positive".into()));
    }

    // Core: fit N ≈ a r² + b r⁴ from N(δ) and N(δ/2).
    let n1 = pair(delta);
    let n2 = pair(0.5 * delta);
    let b4 = (n1 - 4.0 * n2) / (delta.powi(4) * (1.0 - 0.25));
    let a2 = (n1 - b4 * delta.powi(4)) / (delta * delta);
    let core_moment2 = a2 * delta.powi(3) / 3.0 + b4 * delta.powi(5) / 5.0;
    let mut total = a2 * delta.powf(3.0 - s) / (3.0 - s) + b4 * delta.powf(5.0 - s) / (5.0 - s);

    match &opts.tail {
        Tail::Vanishing => {
            let r = opts.cutoff.max(2.0 * delta);
            let (v, _) = integrate(|r| pair(r) * r.powf(-s), &geometric(delta, r), opts.tol, opts.max_pieces)?;
            total += v + fx * r.powf(-two_alpha) / a.value();
        }
        Tail::Periodic { half_period } => {
            let p = *half_period;
            if !(p > 2.0 * delta) {
                return Err(Error::Domain(format!("half period {p} too small for inner radius {delta}")));
            }
            total += core_moment2 * image_kernel(0.0, s, p);
            let (v, _) = integrate(
                |r| pair(r) * (r.powf(-s) + image_kernel(r, s, p)),
                &geometric(delta, p),
                opts.tol,
                opts.max_pieces,
            )?;
            total += v;
        }
        Tail::Decaying { features, scale } => {
            let mut pts = geometric(delta, opts.cutoff.max(2.0 * delta));
            let mut reach = opts.cutoff;
            for &b in features {
                let rb = (x - b).abs();
                let mut w = *scale;
                pts.push(rb);
                while w < rb.max(*scale) * 4.0 {
                    pts.push(rb + w);
                    if rb - w > delta {
                        pts.push(rb - w);
                    }
                    w *= 2.0;
                }
                reach = reach.max(rb + w);
            }
            pts.retain(|&r| r >= delta && r <= reach);
            pts.push(reach);
            pts.sort_by(f64::total_cmp);
            pts.dedup();
            let (v, _) = integrate(|r| pair(r) * r.powf(-s), &pts, opts.tol, opts.max_pieces)?;
            total += v;
            // Beyond `reach`: 2f(x) integrates exactly; the remainder maps onto v ∈ (0, 1]
            // through r = reach · v^{-1/(2α)}, which turns r^{-s} dr into a constant measure.
            total += fx * reach.powf(-two_alpha) / a.value();
            let weight = reach.powf(-two_alpha) / two_alpha;
            let (v, _) = integrate(
                |v: f64| {
                    let r = reach * v.powf(-1.0 / two_alpha);
                    -(f(x + r) + f(x - r))
                },
                &[0.0, 1e-6, 1e-3, 0.1, 1.0],
                opts.tol / weight,
                opts.max_pieces,
            )?;
            total += weight * v;
        }
    }
    Ok(c_alpha(a) * total)
}

#[derive(Debug, Clone, Serialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub samples: Vec<(f64, f64)>,
}

/// Least-squares slope and intercept of `ln|v|` against `ln x`.
pub fn loglog_fit(samples: &[(f64, f64)]) -> Result<(f64, f64)> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(x, v)| *x > 0.0 && *v != 0.0 && v.is_finite())
        .map(|&(x, v)| (x.ln(), v.abs().ln()))
        .collect();
    linear_fit(&pts)
}

/// Ordinary least squares `y ≈ slope·x + intercept`.
pub fn linear_fit(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 2 {
        return Err(Error::FitFailure(format!("need at least two points, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailure("abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `(-Δ)^α Ψ'` at a single point, with `Ψ'` taken on the whole line.
pub fn flap_psi_prime(a: Alpha, x: f64) -> Result<f64> {
    let psi = ProfileNu::stable();
    let f = move |y: f64| psi.jet(y)[1];
    let scale = x.abs().max(1.0);
    let magnitude = scale.powf(-2.0 / 3.0 - a.order());
    let opts = PvOptions {
        inner_radius: 1e-3 * scale.min(10.0),
        cutoff: 4.0 * scale,
        tol: 1e-10 * magnitude,
        max_pieces: 50_000,
        tail: Tail::Decaying { features: vec![0.0], scale: 0.5 },
    };
    flap_singular_point(&f, x, a, &opts)
}

/// Log–log slope of `(-Δ)^α Ψ'` over the sample abscissae.
pub fn flap_psi_prime_decay(a: Alpha, xs: &[f64]) -> Result<DecayFit> {
    if xs.len() < 2 {
        return Err(Error::Domain("need at least two abscissae".into()));
    }
    let (lo, hi) = xs.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &x| (l.min(x), h.max(x)));
    if hi < 100.0 * lo {
        return Err(Error::Domain(format!("abscissae span [{lo}, {hi}], less than two decades")));
    }
    let samples = xs
        .iter()
        .map(|&x| flap_psi_prime(a, x).map(|v| (x, v)))
        .collect::<Result<Vec<_>>>()?;
    let (slope, intercept) = loglog_fit(&samples)?;
    Ok(DecayFit { slope, intercept, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn constant_has_zero_laplacian() {
        let a = Alpha::new(0.3).unwrap();
        let opts = PvOptions::new(Tail::Periodic { half_period: PI }, PI, 1e-12);
        let v = flap_singular_point(&|_| 2.0, 0.4, a, &opts).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn sine_is_an_eigenfunction() {
        for &alpha in &[0.1, 0.25, 0.4] {
            let a = Alpha::new(alpha).unwrap();
            let opts = PvOptions::new(Tail::Periodic { half_period: PI }, PI, 1e-12);
            let v = flap_singular_point(&f64::sin, PI / 2.0, a, &opts).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "alpha={alpha}: {v}");
            let v = flap_singular_point(&|x| (3.0 * x).cos(), 0.2, a, &opts).unwrap();
            assert!((v - 3f64.powf(2.0 * alpha) * 0.6f64.cos()).abs() < 1e-9, "alpha={alpha}: {v}");
        }
    }

    #[test]
    fn compact_support_matches_vanishing_tail() {
        // Outside the support the operator reduces to -C_α ∫ f(η)|x-η|^{-s} dη.
        let a = Alpha::new(0.25).unwrap();
        let bump = |x: f64| if x.abs() < 1.0 { (-1.0 / (1.0 - x * x)).exp() } else { 0.0 };
        let opts = PvOptions::new(Tail::Vanishing, 2.0, 1e-13);
        let x = 3.0;
        let direct = -c_alpha(a)
            * integrate(|e| bump(e) * (x - e).abs().powf(-1.5), &[-1.0, 0.0, 1.0], 1e-14, 1000).unwrap().0;
        let pv = flap_singular_point(&bump, x, a, &PvOptions { cutoff: 5.0, ..opts }).unwrap();
        assert!((pv - direct).abs() < 1e-10, "{pv} {direct}");
    }

    #[test]
    fn lorentzian_on_the_line() {
        // f = 1/(1+x²) has Fourier transform π e^{-|k|}, so
        // (-Δ)^α f(x) = Γ(1+2α) (1+x²)^{-(1+2α)/2} cos((1+2α) atan x).
        let f = |x: f64| 1.0 / (1.0 + x * x);
        for &alpha in &[0.1, 0.25, 0.4] {
            let a = Alpha::new(alpha).unwrap();
            let s = 1.0 + 2.0 * alpha;
            for &x in &[0.0f64, 0.7, 3.0, 50.0] {
                let exact = statrs::function::gamma::gamma(s) * (1.0 + x * x).powf(-0.5 * s) * (s * x.atan()).cos();
                let opts = PvOptions::new(Tail::Decaying { features: vec![0.0], scale: 0.5 }, 8.0, 1e-13);
                let v = flap_singular_point(&f, x, a, &opts).unwrap();
                assert!((v - exact).abs() < 1e-9, "alpha={alpha} x={x}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn psi_prime_at_origin_is_negative() {
        for &alpha in &[0.1, 0.2, 0.3, 0.4] {
            let v = flap_psi_prime(Alpha::new(alpha).unwrap(), 0.0).unwrap();
            assert!(v < 0.0, "alpha={alpha}: {v}");
        }
    }

    #[test]
    fn decay_requires_two_decades() {
        assert!(flap_psi_prime_decay(Alpha::new(0.2).unwrap(), &[10.0, 100.0]).is_err());
        assert!(flap_psi_prime_decay(Alpha::new(0.2).unwrap(), &[10.0]).is_err());
    }

    #[test]
    fn fits() {
        let (s, c) = linear_fit(&[(0.0, 1.0), (1.0, 3.0), (2.0, 5.0)]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }
}
