//! Periodic grids, sampled fields and their Fourier view.
//!
//! The grid covers `[-L, L)` with `n` points `x_j = -L + j·dx`. Mode `m` of the
//! discrete transform carries wavenumber `k_m = m·π/L` for `m ≤ n/2` and
//! `(m - n)·π/L` above it. The Nyquist mode is treated as a cosine: it is kept
//! by even-order multipliers and dropped by odd ones.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<RwLock<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(p) = cache.read().expect("plan cache poisoned").get(&n) {
        return p.clone();
    }
    let mut planner = FftPlanner::new();
    let p = (planner.plan_fft_forward(n), planner.plan_fft_inverse(n));
    cache.write().expect("plan cache poisoned").entry(n).or_insert(p).clone()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_length: f64,
}

impl Grid {
    pub fn new(n: usize, half_length: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::Domain(format!("grid size must be a power of two >= 16, got {n}")));
        }
        if !(half_length.is_finite() && half_length > 0.0) {
            return Err(Error::Domain(format!("grid half-length must be positive, got {half_length}")));
        }
        Ok(Self { n, half_length })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.n as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length + j as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Index of the grid point at the origin.
    pub fn origin_index(&self) -> usize {
        self.n / 2
    }

    /// Signed mode number of FFT slot `m`.
    pub fn mode(&self, m: usize) -> i64 {
        if m <= self.n / 2 {
            m as i64
        } else {
            m as i64 - self.n as i64
        }
    }

    pub fn wavenumber(&self, m: usize) -> f64 {
        self.mode(m) as f64 * std::f64::consts::PI / self.half_length
    }

    pub fn is_nyquist(&self, m: usize) -> bool {
        m == self.n / 2
    }

    /// Largest resolved wavenumber magnitude.
    pub fn max_wavenumber(&self) -> f64 {
        (self.n / 2) as f64 * std::f64::consts::PI / self.half_length
    }

    /// Maps `x` into `[-L, L)`.
    pub fn wrap(&self, x: f64) -> f64 {
        let p = 2.0 * self.half_length;
        (x + self.half_length).rem_euclid(p) - self.half_length
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: *self, values: (0..self.n).map(|j| f(self.x(j))).collect() }
    }

    pub fn zeros(&self) -> Field {
        Field { grid: *self, values: vec![0.0; self.n] }
    }
}

/// Spectral coefficients on a grid, normalized so that `u(x) = Σ c_m e^{i k_m (x + L)}`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::Domain(format!(
                "field has {} samples for a grid of {}",
                values.len(),
                grid.n()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn spectrum(&self) -> Spectrum {
        let n = self.grid.n();
        let mut buf: Vec<Complex64> = self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        plans(n).0.process(&mut buf);
        let inv = 1.0 / n as f64;
        for c in &mut buf {
            *c *= inv;
        }
        Spectrum { grid: self.grid, coeffs: buf }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, f64) {
        self.values
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |best, (j, v)| if v < best.1 { (j, v) } else { best })
    }

    /// Discrete `L²` norm `(dx Σ u_j²)^{1/2}`.
    pub fn l2(&self) -> f64 {
        (self.grid.spacing() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// Discrete inner product `dx Σ u_j v_j`.
    pub fn dot(&self, other: &Field) -> f64 {
        self.grid.spacing() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn derivative(&self, order: u32) -> Field {
        self.spectrum().derivative(order).to_field()
    }

    /// Trigonometric interpolant evaluated off-grid.
    pub fn eval_at(&self, x: f64) -> f64 {
        self.spectrum().eval_at(x)
    }

    /// Samples of `x ↦ u(x + a)`, exact for the trigonometric interpolant.
    pub fn shifted(&self, a: f64) -> Field {
        self.spectrum().shifted(a).to_field()
    }
}

impl Spectrum {
    pub fn to_field(&self) -> Field {
        let n = self.grid.n();
        let mut buf = self.coeffs.clone();
        plans(n).1.process(&mut buf);
        Field { grid: self.grid, values: buf.iter().map(|c| c.re).collect() }
    }

    /// Applies a real multiplier `m(k)`; `keep_nyquist` is false for odd symbols.
    pub fn scale_by(&self, keep_nyquist: bool, symbol: impl Fn(f64) -> f64) -> Spectrum {
        let g = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                if g.is_nyquist(m) && !keep_nyquist {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * symbol(g.wavenumber(m))
                }
            })
            .collect();
        Spectrum { grid: g, coeffs }
    }

    pub fn derivative(&self, order: u32) -> Spectrum {
        if order == 0 {
            return self.clone();
        }
        let g = self.grid;
        let unit = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                if g.is_nyquist(m) && order % 2 == 1 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * unit * g.wavenumber(m).powi(order as i32)
                }
            })
            .collect();
        Spectrum { grid: g, coeffs }
    }

    /// Zeroes modes with `|m| > n/3`.
    pub fn dealiased(&self) -> Spectrum {
        let g = self.grid;
        let cut = g.n() / 3;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| if g.mode(m).unsigned_abs() as usize > cut { Complex64::new(0.0, 0.0) } else { c })
            .collect();
        Spectrum { grid: g, coeffs }
    }

    pub fn shifted(&self, a: f64) -> Spectrum {
        let g = self.grid;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(m, &c)| {
                let k = g.wavenumber(m);
                if g.is_nyquist(m) {
                    c * (k * a).cos()
                } else {
                    c * Complex64::from_polar(1.0, k * a)
                }
            })
            .collect();
        Spectrum { grid: g, coeffs }
    }

    /// Value of the trigonometric interpolant at `x`, in `O(n)`.
    pub fn eval_at(&self, x: f64) -> f64 {
        let g = self.grid;
        let n = g.n();
        let theta = std::f64::consts::PI * (x + g.half_length()) / g.half_length();
        let step = Complex64::from_polar(1.0, theta);
        let mut phase = Complex64::new(1.0, 0.0);
        let mut acc = self.coeffs[0].re;
        for m in 1..n / 2 {
            phase *= step;
            if m % 64 == 0 {
                // Re-anchor the recurrence to keep its rounding error bounded.
                phase = Complex64::from_polar(1.0, theta * m as f64);
            }
            let pos = self.coeffs[m];
            let neg = self.coeffs[n - m];
            acc += (pos * phase + neg * phase.conj()).re;
        }
        acc + self.coeffs[n / 2].re * (theta * (n / 2) as f64).cos()
    }

    /// Largest coefficient magnitude among modes with `|m| ≥ frac·n/2`, relative to the largest overall.
    pub fn tail_fraction(&self, frac: f64) -> f64 {
        let g = self.grid;
        let threshold = (frac * (g.n() / 2) as f64) as u64;
        let mut peak = 0.0f64;
        let mut tail = 0.0f64;
        for (m, c) in self.coeffs.iter().enumerate() {
            let a = c.norm();
            peak = peak.max(a);
            if g.mode(m).unsigned_abs() >= threshold {
                tail = tail.max(a);
            }
        }
        if peak == 0.0 {
            0.0
        } else {
            tail / peak
        }
    }
}
