//! Special functions not covered by `statrs`.

/// `B_{2j} / (2j)!` for `j = 1..=8`.
const BERNOULLI_OVER_FACTORIAL: [f64; 8] = [
    1.0 / 12.0,
    -1.0 / 720.0,
    1.0 / 30240.0,
    -1.0 / 1209600.0,
    1.0 / 47900160.0,
    -691.0 / 1307674368000.0,
    1.0 / 74724249600.0,
    -3617.0 / 10670622842880000.0,
];

/// Hurwitz zeta `ζ(s, q) = Σ_{k≥0} (q + k)^{-s}` for `s > 1`, `q > 0`.
///
/// Direct summation of the first ten terms followed by Euler–Maclaurin on the rest.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    debug_assert!(s > 1.0 && q > 0.0);
    const HEAD: usize = 10;
    let mut sum = 0.0;
    for k in 0..HEAD {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + HEAD as f64;
    let a_s = a.powf(-s);
    sum += a * a_s / (s - 1.0) + 0.5 * a_s;
    // Term j carries s(s+1)…(s+2j-2) a^{-s-2j+1}.
    let mut rising = s;
    let mut power = a_s / a;
    let inv_a2 = 1.0 / (a * a);
    for (j, coef) in BERNOULLI_OVER_FACTORIAL.iter().enumerate() {
        let term = coef * rising * power;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            break;
        }
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power *= inv_a2;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute(s: f64, q: f64) -> f64 {
        // Partial sum plus the midpoint-rule tail ∫_{q+K-1/2}^∞ x^{-s} dx.
        let k = 200_000;
        let mut sum = 0.0;
        for i in (0..k).rev() {
            sum += (q + i as f64).powf(-s);
        }
        sum + (q + k as f64 - 0.5).powf(1.0 - s) / (s - 1.0)
    }

    #[test]
    fn riemann_values() {
        assert!((hurwitz_zeta(2.0, 1.0) - PI * PI / 6.0).abs() < 1e-14);
        assert!((hurwitz_zeta(2.0, 0.5) - PI * PI / 2.0).abs() < 1e-13);
        assert!((hurwitz_zeta(4.0, 1.0) - PI.powi(4) / 90.0).abs() < 1e-14);
    }

    #[test]
    fn agrees_with_brute_force() {
        for &s in &[1.2, 1.5, 1.6, 1.8] {
            for &q in &[0.5, 1.0, 1.25, 1.999] {
                let exact = brute(s, q);
                assert!((hurwitz_zeta(s, q) - exact).abs() < 1e-9 * exact, "s={s} q={q}");
            }
        }
    }

    #[test]
    fn shift_recurrence() {
        for &s in &[1.3, 1.7] {
            for &q in &[0.1, 0.7, 1.5] {
                let lhs = hurwitz_zeta(s, q);
                let rhs = q.powf(-s) + hurwitz_zeta(s, q + 1.0);
                assert!((lhs - rhs).abs() < 1e-13 * lhs);
            }
        }
    }
}
