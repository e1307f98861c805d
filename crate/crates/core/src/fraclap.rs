//! The fractional Laplacian `(-Δ)^α` as a Fourier multiplier, its singular-integral
//! normalization, and the `L^∞` interpolation estimate.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::grid::{Field, Grid, Spectrum};

pub use crate::singular::{flap_psi_prime_decay, flap_singular_point, DecayFit, PvOptions, Tail};

/// Dissipation exponent, restricted to the supercritical range `0 < α < 1/2`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value < 0.5 {
            Ok(Self(value))
        } else {
            Err(Error::Domain(format!("alpha must lie in (0, 1/2), got {value}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Exponent `2α` of the Fourier symbol.
    pub fn order(self) -> f64 {
        2.0 * self.0
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;
    fn try_from(v: f64) -> Result<Self> {
        Alpha::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> f64 {
        a.0
    }
}

/// Normalization `C_α = 4^α Γ(α + 1/2) / (√π |Γ(-α)|)` of the singular integral.
pub fn c_alpha(a: Alpha) -> f64 {
    let x = a.value();
    4f64.powf(x) * gamma(x + 0.5) / (std::f64::consts::PI.sqrt() * gamma(-x).abs())
}

/// Symbol `|k|^{2α}`, zero at `k = 0`.
pub fn symbol(a: Alpha, k: f64) -> f64 {
    if k == 0.0 {
        0.0
    } else {
        k.abs().powf(a.order())
    }
}

pub fn flap_spectrum(s: &Spectrum, a: Alpha) -> Spectrum {
    s.scale_by(true, |k| symbol(a, k))
}

pub fn flap_spectral(f: &Field, a: Alpha) -> Field {
    flap_spectrum(&f.spectrum(), a).to_field()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct InterpolationBound {
    pub lhs: f64,
    pub rhs: f64,
}

impl InterpolationBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Constant `C_α (1/α + 1/(1 - 2α))` of the interpolation estimate.
pub fn interpolation_constant(a: Alpha) -> f64 {
    let x = a.value();
    c_alpha(a) * (1.0 / x + 1.0 / (1.0 - 2.0 * x))
}

/// `‖(-Δ)^α f‖_∞` against `K ‖f‖_∞^{1-2α} ‖f'‖_∞^{2α}` with the explicit constant.
pub fn interpolation_bound(f: &Field, a: Alpha) -> InterpolationBound {
    let spec = f.spectrum();
    let lhs = flap_spectrum(&spec, a).to_field().max_abs();
    let sup = f.max_abs();
    let grad = spec.derivative(1).to_field().max_abs();
    let rhs = if sup == 0.0 {
        0.0
    } else {
        interpolation_constant(a) * sup.powf(1.0 - a.order()) * grad.powf(a.order())
    };
    InterpolationBound { lhs, rhs }
}

/// Mean-free random trigonometric polynomial with modes `1..=max_mode`, amplitudes
/// decaying like `1/m`, normalized to unit sup norm.
pub fn random_band_limited(grid: Grid, max_mode: usize, rng: &mut impl Rng) -> Field {
    let k0 = std::f64::consts::PI / grid.half_length();
    let modes: Vec<(f64, f64, f64)> = (1..=max_mode)
        .map(|m| {
            let amp = rng.gen_range(-1.0..1.0) / m as f64;
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            (m as f64 * k0, amp, phase)
        })
        .collect();
    let f = grid.sample(|x| modes.iter().map(|&(k, amp, ph)| amp * (k * x + ph).cos()).sum());
    let peak = f.max_abs();
    if peak == 0.0 {
        f
    } else {
        f.map(|v| v / peak)
    }
}

/// Sum of smooth compactly supported bumps `a·exp(1 - 1/(1 - r²))`, `r = (x - c)/w`,
/// all supported inside the central half of a periodic window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BumpField {
    pub half_length: f64,
    /// `(center, width, amplitude)`.
    pub bumps: Vec<(f64, f64, f64)>,
}

impl BumpField {
    pub fn random(half_length: f64, count: usize, rng: &mut impl Rng) -> Self {
        let bumps = (0..count)
            .map(|_| {
                let w = half_length * rng.gen_range(0.1..0.25);
                let c = rng.gen_range(-0.5 * half_length + w..0.5 * half_length - w);
                (c, w, rng.gen_range(-1.0..1.0))
            })
            .collect();
        Self { half_length, bumps }
    }

    /// Periodic evaluation with period `2L`.
    pub fn eval(&self, x: f64) -> f64 {
        let p = 2.0 * self.half_length;
        let x = x - p * ((x + self.half_length) / p).floor();
        self.bumps
            .iter()
            .map(|&(c, w, a)| {
                let r = (x - c) / w;
                if r.abs() < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn sample(&self, grid: Grid) -> Field {
        grid.sample(|x| self.eval(x))
    }
}

/// Largest difference between the spectral operator on `grid` and the periodic
/// principal-value integral at `points`, relative to `max |(-Δ)^α f|` on the grid.
pub fn cross_validate(f: &BumpField, grid: Grid, a: Alpha, points: &[f64]) -> Result<f64> {
    if grid.half_length() != f.half_length {
        return Err(Error::Domain("field and grid periods differ".into()));
    }
    let spec = flap_spectrum(&f.sample(grid).spectrum(), a);
    let scale = spec.to_field().max_abs();
    if scale == 0.0 {
        return Ok(0.0);
    }
    let opts = PvOptions {
        inner_radius: 1e-3 * f.half_length,
        cutoff: f.half_length,
        tol: 1e-12 * scale,
        max_pieces: 50_000,
        tail: Tail::Periodic { half_period: f.half_length },
    };
    let mut worst: f64 = 0.0;
    for &x in points {
        let pv = flap_singular_point(&|y| f.eval(y), x, a, &opts)?;
        worst = worst.max((pv - spec.eval_at(x)).abs() / scale);
    }
    Ok(worst)
}

/// `|⟨(-Δ)^α f, g⟩ - ⟨f, (-Δ)^α g⟩|` relative to `‖(-Δ)^α f‖ ‖g‖ + ‖f‖ ‖(-Δ)^α g‖`.
pub fn adjoint_defect(f: &Field, g: &Field, a: Alpha) -> f64 {
    let lf = flap_spectral(f, a);
    let lg = flap_spectral(g, a);
    let scale = lf.l2() * g.l2() + f.l2() * lg.l2();
    if scale == 0.0 {
        0.0
    } else {
        (lf.dot(g) - f.dot(&lg)).abs() / scale
    }
}

/// `⟨(-Δ)^α f, f⟩ / (‖(-Δ)^α f‖ ‖f‖)`, which is never negative.
pub fn positivity_ratio(f: &Field, a: Alpha) -> f64 {
    let lf = flap_spectral(f, a);
    let scale = lf.l2() * f.l2();
    if scale == 0.0 {
        0.0
    } else {
        lf.dot(f) / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `ln Γ(x)` for `x > 0` by upward shifting and the Stirling series.
    fn ln_gamma_stirling(mut x: f64) -> f64 {
        let mut shift = 0.0;
        while x < 20.0 {
            shift -= x.ln();
            x += 1.0;
        }
        let inv = 1.0 / x;
        let inv2 = inv * inv;
        let series = inv
            * (1.0 / 12.0
                - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))));
        shift + (x - 0.5) * x.ln() - x + 0.5 * std::f64::consts::TAU.ln() + series
    }

    fn c_alpha_oracle(a: f64) -> f64 {
        // |Γ(-a)| = Γ(1 - a) / a.
        let log = a * 4f64.ln() + ln_gamma_stirling(a + 0.5)
            - 0.5 * std::f64::consts::PI.ln()
            - (ln_gamma_stirling(1.0 - a) - a.ln());
        log.exp()
    }

    #[test]
    fn alpha_range() {
        assert!(Alpha::new(0.0).is_err());
        assert!(Alpha::new(0.5).is_err());
        assert!(Alpha::new(f64::NAN).is_err());
        assert_eq!(Alpha::new(0.2).unwrap().value(), 0.2);
    }

    #[test]
    fn c_alpha_values() {
        let quarter = c_alpha(Alpha::new(0.25).unwrap());
        assert!((quarter - 0.19947).abs() < 5e-6, "{quarter}");
        for &a in &[0.05, 0.1, 0.2, 0.25, 0.3, 0.4, 0.45] {
            let v = c_alpha(Alpha::new(a).unwrap());
            assert!((v - c_alpha_oracle(a)).abs() <= 1e-12 * v, "a={a}");
        }
        assert!(c_alpha(Alpha::new(1e-6).unwrap()) < 1e-5);
    }

    #[test]
    fn eigenfunctions_and_constants() {
        let g = Grid::new(128, std::f64::consts::PI).unwrap();
        let a = Alpha::new(0.3).unwrap();
        for k in 1..=60 {
            let f = g.sample(|x| (k as f64 * x).sin());
            let out = flap_spectral(&f, a);
            let scale = (k as f64).powf(0.6);
            for (j, x) in g.points().into_iter().enumerate() {
                assert!((out.values[j] - scale * (k as f64 * x).sin()).abs() <= 1e-12 * scale);
            }
        }
        let c = g.sample(|_| 3.5);
        assert!(flap_spectral(&c, a).max_abs() < 1e-12);
    }

    #[test]
    fn interpolation_for_sine() {
        let g = Grid::new(64, std::f64::consts::PI).unwrap();
        let a = Alpha::new(0.25).unwrap();
        let b = interpolation_bound(&g.sample(f64::sin), a);
        assert!((b.lhs - 1.0).abs() < 1e-12);
        assert!((b.rhs - 6.0 * c_alpha(a)).abs() < 1e-12);
        assert!((b.rhs - 1.197).abs() < 1e-3);
        assert!(b.holds());
        let z = interpolation_bound(&g.zeros(), a);
        assert_eq!((z.lhs, z.rhs), (0.0, 0.0));
    }

    #[test]
    fn bumps_are_periodic_and_supported() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = BumpField::random(2.0, 4, &mut rng);
        for &(c, w, _) in &f.bumps {
            assert!(c.abs() + w <= 1.0 + 1e-12);
        }
        assert_eq!(f.eval(1.5), 0.0);
        assert!((f.eval(0.3) - f.eval(4.3)).abs() < 1e-14);
    }

    #[test]
    fn spectral_matches_principal_value_on_a_bump() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = BumpField::random(std::f64::consts::PI, 3, &mut rng);
        let g = Grid::new(2048, std::f64::consts::PI).unwrap();
        let err = cross_validate(&f, g, Alpha::new(0.25).unwrap(), &[-2.0, 0.1, 0.9, 2.5]).unwrap();
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn adjoint_and_positive() {
        let g = Grid::new(256, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_band_limited(g, 20, &mut rng);
        let h = random_band_limited(g, 20, &mut rng);
        let a = Alpha::new(0.3).unwrap();
        assert!(adjoint_defect(&f, &h, a) < 1e-12);
        assert!(positivity_ratio(&f, a) > 0.0);
        assert_eq!(positivity_ratio(&g.zeros(), a), 0.0);
    }

    #[test]
    fn random_fields_are_normalized() {
        let g = Grid::new(256, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = random_band_limited(g, 12, &mut rng);
        assert!((f.max_abs() - 1.0).abs() < 1e-15);
        assert!(f.values.iter().sum::<f64>().abs() < 1e-10);
    }
}
