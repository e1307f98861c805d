//! Dynamic rescaling: evolution of `W(y, s)` under the modulated equation
//!
//! `∂_s W = W/2 - g_W ∂_y W - β_τ e^{-s/2} κ̇ - β_τ e^{(3α-1)s} (-Δ)^α W`,
//! `g_W = β_τ (W + e^{s/2}(κ - ξ̇)) + 3y/2`,
//!
//! where `u(x, t) = e^{-s/2} W((x - ξ) e^{3s/2}, s) + κ` and `s = -log(τ - t)`.
//! The modulation rates come from requiring `W(0) = 0`, `∂_y W(0) = -1` and
//! `∂_y² W(0) = 0` to be stationary:
//!
//! * `τ̇ = -D (Λ∂_y W)(0)`, with `D = e^{(3α-1)s}`, `Λ = (-Δ)^α`;
//! * `E := e^{s/2}(κ - ξ̇) = -D (Λ∂_y² W)(0) / ∂_y³W(0)`;
//! * `κ̇ = e^{s/2}(E - D (ΛW)(0))`.
//!
//! The periodic `y`-window has an absorbing layer in its outer 5% standing in for
//! the decaying far field. After each step the constraints are restored exactly by
//! shifting, offsetting and rescaling `W`, with the changes absorbed into `ξ`, `κ`
//! and `τ`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::{symbol, Alpha};
use crate::grid::{Field, Grid, Spectrum};
use crate::physical::{cutoff, PhysState};
use crate::profiles::{ProfileNu, MAX_DERIVATIVE};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    pub s: f64,
    pub tau: f64,
    pub xi: f64,
    pub kappa: f64,
    pub tau_dot: f64,
    pub xi_dot: f64,
    pub kappa_dot: f64,
    pub beta_tau: f64,
}

impl ModulationState {
    /// Start of a run at `t = -e^{-s₀}` with `τ = ξ = 0`.
    pub fn initial(s0: f64, kappa0: f64) -> Self {
        Self { s: s0, tau: 0.0, xi: 0.0, kappa: kappa0, tau_dot: 0.0, xi_dot: 0.0, kappa_dot: 0.0, beta_tau: 1.0 }
    }

    /// Physical time `t = τ - e^{-s}`.
    pub fn t(&self) -> f64 {
        self.tau - (-self.s).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfSimState {
    pub w: Field,
    pub m: ModulationState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimConfig {
    /// `None` drops the dissipation entirely.
    pub alpha: Option<Alpha>,
    pub sponge_strength: f64,
    /// Width of the absorbing layer as a fraction of the half-window.
    pub sponge_fraction: f64,
    pub third_deriv_floor: f64,
    pub cfl: f64,
    pub max_ds: f64,
    pub renorm_tol: f64,
    pub renorm_max_iter: usize,
}

impl Default for SelfSimConfig {
    fn default() -> Self {
        Self {
            alpha: None,
            sponge_strength: 200.0,
            sponge_fraction: 0.1,
            third_deriv_floor: 1.0,
            cfl: 0.5,
            max_ds: 1e-2,
            renorm_tol: 1e-9,
            renorm_max_iter: 20,
        }
    }
}

/// Rates and the point values they are built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tau_dot: f64,
    pub xi_dot: f64,
    pub kappa_dot: f64,
    pub beta_tau: f64,
    /// `e^{s/2}(κ - ξ̇)`.
    pub shift_speed: f64,
    /// `e^{(3α-1)s}`.
    pub damping: f64,
    /// `((-Δ)^α W)(0)`, `((-Δ)^α ∂_y W)(0)`, `((-Δ)^α ∂_y² W)(0)`.
    pub flap0: [f64; 3],
    pub w3: f64,
}

/// Grid-dependent data shared by every step of a run.
#[derive(Debug, Clone)]
pub struct SelfSimSolver {
    pub grid: Grid,
    pub cfg: SelfSimConfig,
    y: Vec<f64>,
    sponge: Vec<f64>,
    flap_symbol: Vec<f64>,
}

fn ramp(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        a / (a + (-1.0 / (1.0 - t)).exp())
    }
}

/// `Σ_m c_m (i k_m)^order m(k_m) e^{i k_m L}`: the value at `y = 0` of a filtered derivative.
fn value_at_origin(spec: &Spectrum, order: u32, weight: impl Fn(f64) -> f64) -> f64 {
    let g = spec.grid;
    let mut acc = 0.0;
    for (m, c) in spec.coeffs.iter().enumerate() {
        if g.is_nyquist(m) && order % 2 == 1 {
            continue;
        }
        let k = g.wavenumber(m);
        let sign = if g.mode(m) % 2 == 0 { 1.0 } else { -1.0 };
        let factor = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        } * k.powi(order as i32)
            * weight(k)
            * sign;
        acc += (c * factor).re;
    }
    acc
}

impl SelfSimSolver {
    pub fn new(grid: Grid, cfg: SelfSimConfig) -> Self {
        let l = grid.half_length();
        let width = cfg.sponge_fraction * l;
        let layer: Vec<f64> = grid.points().iter().map(|&v| ramp((v.abs() - (l - width)) / width)).collect();
        let y = grid.points().iter().zip(&layer).map(|(v, r)| v * (1.0 - r)).collect();
        let sponge = layer.iter().map(|r| cfg.sponge_strength * r).collect();
        let flap_symbol = (0..grid.n())
            .map(|m| cfg.alpha.map_or(0.0, |a| symbol(a, grid.wavenumber(m))))
            .collect();
        Self { grid, cfg, y, sponge, flap_symbol }
    }

    /// Multiplier falling from 1 at `0.75 L` to 0 at the inner edge of the absorbing layer.
    pub fn taper(&self, y: f64) -> f64 {
        let l = self.grid.half_length();
        let edge = (1.0 - self.cfg.sponge_fraction) * l;
        let start = 0.75 * l;
        1.0 - ramp((y.abs() - start) / (edge - start))
    }

    /// Region free of the absorbing layer.
    pub fn interior(&self) -> f64 {
        self.grid.half_length() * (1.0 - self.cfg.sponge_fraction)
    }

    fn log_damping(&self, s: f64) -> Option<f64> {
        self.cfg.alpha.map(|a| (3.0 * a.value() - 1.0) * s)
    }

    fn flap_field(&self, spec: &Spectrum) -> Field {
        let coeffs = spec.coeffs.iter().zip(&self.flap_symbol).map(|(c, w)| c * w).collect();
        Spectrum { grid: spec.grid, coeffs }.to_field()
    }

    pub fn rates_from(&self, spec: &Spectrum, s: f64, kappa: f64) -> Result<Rates> {
        let w3 = value_at_origin(spec, 3, |_| 1.0);
        if w3.abs() < self.cfg.third_deriv_floor || !w3.is_finite() {
            return Err(Error::DegenerateProfile { value: w3.abs(), floor: self.cfg.third_deriv_floor });
        }
        let (damping, flap0) = match self.cfg.alpha {
            Some(a) => {
                let sym = |k: f64| symbol(a, k);
                let d = self.log_damping(s).expect("alpha present").exp();
                (d, [value_at_origin(spec, 0, sym), value_at_origin(spec, 1, sym), value_at_origin(spec, 2, sym)])
            }
            None => (0.0, [0.0; 3]),
        };
        let tau_dot = -damping * flap0[1];
        if !(tau_dot < 1.0) {
            return Err(Error::Renormalization(format!("tau_dot = {tau_dot} leaves the modulated regime")));
        }
        let beta_tau = 1.0 / (1.0 - tau_dot);
        let shift_speed = -damping * flap0[2] / w3;
        let half = (0.5 * s).exp();
        let kappa_dot = half * (shift_speed - damping * flap0[0]);
        let xi_dot = kappa - shift_speed / half;
        Ok(Rates { tau_dot, xi_dot, kappa_dot, beta_tau, shift_speed, damping, flap0, w3 })
    }

    pub fn modulation_rates(&self, st: &SelfSimState) -> Result<Rates> {
        self.rates_from(&st.w.spectrum(), st.m.s, st.m.kappa)
    }

    /// `∂_s W` together with the rates used to form it.
    pub fn rhs_with(&self, w: &Field, s: f64, kappa: f64) -> Result<(Field, Rates)> {
        let spec = w.spectrum();
        let r = self.rates_from(&spec, s, kappa)?;
        let wy = spec.derivative(1).to_field();
        let lap = if self.cfg.alpha.is_some() { Some(self.flap_field(&spec)) } else { None };
        let forcing = r.beta_tau * (r.shift_speed - r.damping * r.flap0[0]);
        let values = (0..self.grid.n())
            .map(|j| {
                let wj = w.values[j];
                let g = r.beta_tau * (wj + r.shift_speed) + 1.5 * self.y[j];
                let diss = lap.as_ref().map_or(0.0, |l| r.beta_tau * r.damping * l.values[j]);
                0.5 * wj - g * wy.values[j] - forcing - diss - self.sponge[j] * wj
            })
            .collect();
        Ok((Field { grid: self.grid, values }, r))
    }

    pub fn rhs(&self, st: &SelfSimState) -> Result<Field> {
        Ok(self.rhs_with(&st.w, st.m.s, st.m.kappa)?.0)
    }

    /// Step limit `cfl · dy / max|g_W|`.
    pub fn stable_ds(&self, st: &SelfSimState) -> Result<f64> {
        let r = self.modulation_rates(st)?;
        let gmax = (0..self.grid.n())
            .map(|j| (r.beta_tau * (st.w.values[j] + r.shift_speed) + 1.5 * self.y[j]).abs())
            .fold(0.0, f64::max);
        Ok((self.cfg.cfl * self.grid.spacing() / gmax).min(self.cfg.max_ds))
    }

    /// One RK4 step in `s` for `W` and the modulation variables, without renormalization.
    pub fn advance(&self, st: &SelfSimState, ds: f64) -> Result<SelfSimState> {
        let eval = |w: &Field, s: f64, kappa: f64| -> Result<(Field, [f64; 3], Rates)> {
            let (dw, r) = self.rhs_with(w, s, kappa)?;
            let jac = r.beta_tau * (-s).exp();
            Ok((dw, [r.tau_dot * jac, r.xi_dot * jac, r.kappa_dot * jac], r))
        };
        let m = st.m;
        let lin = |a: &Field, k: &Field, h: f64| a.zip_map(k, |x, y| x + h * y);
        let (k1, q1, r1) = eval(&st.w, m.s, m.kappa)?;
        let (k2, q2, _) = eval(&lin(&st.w, &k1, 0.5 * ds), m.s + 0.5 * ds, m.kappa + 0.5 * ds * q1[2])?;
        let (k3, q3, _) = eval(&lin(&st.w, &k2, 0.5 * ds), m.s + 0.5 * ds, m.kappa + 0.5 * ds * q2[2])?;
        let (k4, q4, _) = eval(&lin(&st.w, &k3, ds), m.s + ds, m.kappa + ds * q3[2])?;
        let w = Field {
            grid: self.grid,
            values: (0..self.grid.n())
                .map(|j| {
                    st.w.values[j]
                        + ds / 6.0 * (k1.values[j] + 2.0 * (k2.values[j] + k3.values[j]) + k4.values[j])
                })
                .collect(),
        };
        if !w.is_finite() {
            return Err(Error::Instability { time: m.s + ds });
        }
        let incr = |i: usize| ds / 6.0 * (q1[i] + 2.0 * (q2[i] + q3[i]) + q4[i]);
        let mut next = ModulationState {
            s: m.s + ds,
            tau: m.tau + incr(0),
            xi: m.xi + incr(1),
            kappa: m.kappa + incr(2),
            ..m
        };
        // Rates at the start of the step are what a caller sees for the current state.
        next.tau_dot = r1.tau_dot;
        next.xi_dot = r1.xi_dot;
        next.kappa_dot = r1.kappa_dot;
        next.beta_tau = r1.beta_tau;
        Ok(SelfSimState { w, m: next })
    }

    /// Restores `W(0) = 0`, `∂_y W(0) = -1`, `∂_y² W(0) = 0`.
    pub fn renormalize(&self, st: &SelfSimState) -> Result<SelfSimState> {
        let mut w = st.w.clone();
        let mut m = st.m;
        let t = m.t();
        let o = self.grid.origin_index();
        for _ in 0..self.cfg.renorm_max_iter {
            // Origin shift: Newton on ∂_y² W(y*) = 0.
            let spec = w.spectrum();
            let d2 = spec.derivative(2);
            let d3 = spec.derivative(3);
            let mut ystar = 0.0;
            let mut converged = false;
            for _ in 0..self.cfg.renorm_max_iter {
                let f = if ystar == 0.0 { value_at_origin(&spec, 2, |_| 1.0) } else { d2.eval_at(ystar) };
                let fp = if ystar == 0.0 { value_at_origin(&spec, 3, |_| 1.0) } else { d3.eval_at(ystar) };
                if fp == 0.0 || !fp.is_finite() {
                    return Err(Error::Renormalization("vanishing third derivative at the origin".into()));
                }
                let step = f / fp;
                ystar -= step;
                if step.abs() <= 1e-14 || f.abs() <= 1e-3 * self.cfg.renorm_tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::Renormalization("origin shift did not converge in the iteration budget".into()));
            }
            if ystar != 0.0 {
                w = spec.shifted(ystar).to_field();
                m.xi += ystar * (-1.5 * m.s).exp();
            }

            // Offset into κ.
            let w0 = w.values[o];
            if w0 != 0.0 {
                for v in &mut w.values {
                    *v -= w0;
                }
                m.kappa += (-0.5 * m.s).exp() * w0;
            }

            // Rescaling into τ, to first order in log λ.
            let wy = w.derivative(1);
            let lambda = -wy.values[o];
            if !(lambda > 0.0) {
                return Err(Error::Renormalization(format!("slope at the origin has the wrong sign: {}", -lambda)));
            }
            let delta = lambda.ln();
            if delta != 0.0 {
                for j in 0..self.grid.n() {
                    w.values[j] += delta * (0.5 * w.values[j] - 1.5 * self.y[j] * wy.values[j]);
                }
                m.s += delta;
                m.tau = t + (-m.s).exp();
            }

            let res = constraint_residuals(&w);
            if res.iter().all(|r| *r <= self.cfg.renorm_tol) {
                return Ok(SelfSimState { w, m });
            }
        }
        Err(Error::Renormalization(format!(
            "constraint residuals {:?} above {:e} after {} passes",
            constraint_residuals(&w),
            self.cfg.renorm_tol,
            self.cfg.renorm_max_iter
        )))
    }

    pub fn step_selfsim(&self, st: &SelfSimState, ds: f64) -> Result<SelfSimState> {
        let advanced = self.advance(st, ds)?;
        self.renormalize(&advanced)
    }

    /// `η(y e^{-3s₀/2}) Ψ(y)` times the window taper: the physical initial datum
    /// `ε^{1/2} η(x) Ψ(x ε^{-3/2}) + κ₀` seen in self-similar variables. An infinite
    /// physical half-length drops the cutoff.
    pub fn initial_state(&self, s0: f64, kappa0: f64, phys_half_length: f64) -> SelfSimState {
        let psi = ProfileNu::stable();
        let shrink = (-1.5 * s0).exp();
        let eta = |x: f64| if phys_half_length.is_finite() { cutoff(x, phys_half_length) } else { 1.0 };
        let w = self.grid.sample(|y| eta(y * shrink) * psi.eval(y) * self.taper(y));
        SelfSimState { w, m: ModulationState::initial(s0, kappa0) }
    }
}

/// `[|W(0)|, |∂_y W(0) + 1|, |∂_y² W(0)|]`.
pub fn constraint_residuals(w: &Field) -> [f64; 3] {
    let spec = w.spectrum();
    [
        w.values[w.grid.origin_index()].abs(),
        (value_at_origin(&spec, 1, |_| 1.0) + 1.0).abs(),
        value_at_origin(&spec, 2, |_| 1.0).abs(),
    ]
}

/// `∂_y^3 W(0)`.
pub fn third_derivative_at_origin(w: &Field) -> f64 {
    value_at_origin(&w.spectrum(), 3, |_| 1.0)
}

/// Resamples `u(·, t)` onto the `y`-grid: `W(y) = e^{s/2}(u(ξ + y e^{-3s/2}) - κ)` with
/// `s = -log(τ - t)`.
pub fn to_selfsim(u: &PhysState, m: &ModulationState, grid_y: Grid) -> Result<SelfSimState> {
    let gap = m.tau - u.t;
    if !(gap > 0.0) {
        return Err(Error::Domain(format!("t = {} is not before tau = {}", u.t, m.tau)));
    }
    let s = -gap.ln();
    let spec = u.u.spectrum();
    let shrink = (-1.5 * s).exp();
    let grow = (0.5 * s).exp();
    let w = grid_y.sample(|y| grow * (spec.eval_at(m.xi + y * shrink) - m.kappa));
    Ok(SelfSimState { w, m: ModulationState { s, ..*m } })
}

/// `u(x) = e^{-s/2} W((x - ξ) e^{3s/2}) + κ` on `grid_x`, at `t = τ - e^{-s}`.
pub fn from_selfsim(st: &SelfSimState, grid_x: Grid) -> PhysState {
    let spec = st.w.spectrum();
    let m = st.m;
    let stretch = (1.5 * m.s).exp();
    let shrink = (-0.5 * m.s).exp();
    let u = grid_x.sample(|x| shrink * spec.eval_at((x - m.xi) * stretch) + m.kappa);
    PhysState { u, t: m.t() }
}

/// Per-snapshot scalar diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimRecord {
    pub s: f64,
    pub t: f64,
    pub tau: f64,
    pub xi: f64,
    pub kappa: f64,
    pub tau_dot: f64,
    pub xi_dot: f64,
    pub kappa_dot: f64,
    pub beta_tau: f64,
    pub res_w0: f64,
    pub res_w1: f64,
    pub res_w2: f64,
    pub w3: f64,
    /// `‖∂_y W‖_∞` outside the absorbing layer.
    pub max_wy: f64,
    /// `‖W - Ψ_ν‖_∞` on `|y| ≤ 1` and `|y| ≤ 10`, with `ν = ∂_y³W(0)`.
    pub dist_psi_1: f64,
    pub dist_psi_10: f64,
    /// `‖∂_y^k W‖_{L²}` for `k = 1..=6`.
    pub dnorms: [f64; 6],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SelfSimStop {
    EndTime,
    TauDotLimit,
    StepLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimRunControl {
    pub s_end: f64,
    pub snapshot_every: f64,
    /// Stop once `τ̇` exceeds this value (for runs where the modulation breaks down).
    pub tau_dot_limit: Option<f64>,
    pub max_steps: usize,
}

impl Default for SelfSimRunControl {
    fn default() -> Self {
        Self { s_end: 10.0, snapshot_every: 0.01, tau_dot_limit: None, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone)]
pub struct SelfSimRun {
    pub grid: Grid,
    pub cfg: SelfSimConfig,
    pub snapshots: Vec<SelfSimState>,
    pub records: Vec<SelfSimRecord>,
    pub stop: SelfSimStop,
}

/// Max of `|W - Ψ_ν|` over grid points with `|y| ≤ window`.
pub fn distance_to_profile(w: &Field, nu: f64, window: f64) -> f64 {
    let Ok(p) = ProfileNu::new(nu) else { return f64::INFINITY };
    let g = w.grid;
    (0..g.n())
        .filter(|&j| g.x(j).abs() <= window)
        .map(|j| (w.values[j] - p.eval(g.x(j))).abs())
        .fold(0.0, f64::max)
}

impl SelfSimSolver {
    pub fn record(&self, st: &SelfSimState) -> Result<SelfSimRecord> {
        let r = self.modulation_rates(st)?;
        let res = constraint_residuals(&st.w);
        let spec = st.w.spectrum();
        let mut dnorms = [0.0; 6];
        let mut max_wy = 0.0f64;
        let inside = self.interior();
        for (k, d) in dnorms.iter_mut().enumerate() {
            let f = spec.derivative(k as u32 + 1).to_field();
            if k == 0 {
                max_wy = (0..self.grid.n())
                    .filter(|&j| self.grid.x(j).abs() <= inside)
                    .map(|j| f.values[j].abs())
                    .fold(0.0, f64::max);
            }
            *d = f.l2();
        }
        Ok(SelfSimRecord {
            s: st.m.s,
            t: st.m.t(),
            tau: st.m.tau,
            xi: st.m.xi,
            kappa: st.m.kappa,
            tau_dot: r.tau_dot,
            xi_dot: r.xi_dot,
            kappa_dot: r.kappa_dot,
            beta_tau: r.beta_tau,
            res_w0: res[0],
            res_w1: res[1],
            res_w2: res[2],
            w3: r.w3,
            max_wy,
            dist_psi_1: distance_to_profile(&st.w, r.w3, 1.0),
            dist_psi_10: distance_to_profile(&st.w, r.w3, 10.0),
            dnorms,
        })
    }

    fn with_rates(&self, mut st: SelfSimState) -> Result<SelfSimState> {
        let r = self.modulation_rates(&st)?;
        st.m.tau_dot = r.tau_dot;
        st.m.xi_dot = r.xi_dot;
        st.m.kappa_dot = r.kappa_dot;
        st.m.beta_tau = r.beta_tau;
        Ok(st)
    }

    /// Renormalizes the initial state, then steps to `s_end` storing snapshots.
    pub fn run(&self, st0: &SelfSimState, ctl: &SelfSimRunControl) -> Result<SelfSimRun> {
        let mut st = self.with_rates(self.renormalize(st0)?)?;
        let mut snapshots = vec![st.clone()];
        let mut records = vec![self.record(&st)?];
        let mut next_snap = st.m.s + ctl.snapshot_every;
        let mut stop = SelfSimStop::StepLimit;
        for _ in 0..ctl.max_steps {
            if st.m.s >= ctl.s_end - 1e-9 * ctl.snapshot_every {
                stop = SelfSimStop::EndTime;
                break;
            }
            let mut ds = self.stable_ds(&st)?.min(ctl.s_end - st.m.s);
            // Land on the snapshot grid when it is within reach.
            if next_snap - st.m.s < ds && next_snap > st.m.s {
                ds = next_snap - st.m.s;
            }
            st = self.with_rates(self.step_selfsim(&st, ds)?)?;
            if st.m.s >= next_snap - 1e-9 * ctl.snapshot_every || st.m.s >= ctl.s_end {
                records.push(self.record(&st)?);
                snapshots.push(st.clone());
                while next_snap <= st.m.s + 1e-9 * ctl.snapshot_every {
                    next_snap += ctl.snapshot_every;
                }
            }
            if let Some(limit) = ctl.tau_dot_limit {
                if st.m.tau_dot > limit {
                    if snapshots.last().map(|x| x.m.s) != Some(st.m.s) {
                        records.push(self.record(&st)?);
                        snapshots.push(st.clone());
                    }
                    stop = SelfSimStop::TauDotLimit;
                    break;
                }
            }
        }
        Ok(SelfSimRun { grid: self.grid, cfg: self.cfg, snapshots, records, stop })
    }
}

/// Max-norm mismatch of one differentiated equation on the interior.
#[derive(Debug, Clone, Serialize)]
pub struct EquationResidual {
    pub name: String,
    pub max_residual: f64,
    pub at_origin: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub ds: f64,
    pub equations: Vec<EquationResidual>,
}

impl ResidualReport {
    pub fn get(&self, name: &str) -> Option<&EquationResidual> {
        self.equations.iter().find(|e| e.name == name)
    }
}

/// Evaluates the differentiated forms of the modulated equation, with `∂_s` taken
/// by a five-point difference over unrenormalized RK4 steps of size `ds`.
///
/// Equations are written `(∂_s + damping) f + g_W ∂_y f = forcing`; the report
/// holds the largest `|lhs - rhs|` over `|y|` inside the undamped interior.
pub fn derivative_residuals(solver: &SelfSimSolver, st: &SelfSimState, ds: f64) -> Result<ResidualReport> {
    let plus1 = solver.advance(st, ds)?;
    let plus2 = solver.advance(&plus1, ds)?;
    let minus1 = solver.advance(st, -ds)?;
    let minus2 = solver.advance(&minus1, -ds)?;
    let derivs = |w: &Field| -> Vec<Field> {
        let spec = w.spectrum();
        (0..=7).map(|k| spec.derivative(k).to_field()).collect()
    };
    let (dp1, dp2, dm1, dm2) = (derivs(&plus1.w), derivs(&plus2.w), derivs(&minus1.w), derivs(&minus2.w));
    let dt_of = |k: usize, j: usize| {
        (-dp2[k].values[j] + 8.0 * dp1[k].values[j] - 8.0 * dm1[k].values[j] + dm2[k].values[j]) / (12.0 * ds)
    };

    let spec = st.w.spectrum();
    let d: Vec<Field> = (0..=7).map(|k| spec.derivative(k).to_field()).collect();
    let r = solver.rates_from(&spec, st.m.s, st.m.kappa)?;
    let lap: Vec<Field> = (0..=6)
        .map(|k| {
            if solver.cfg.alpha.is_some() {
                solver.flap_field(&spec.derivative(k))
            } else {
                solver.grid.zeros()
            }
        })
        .collect();
    let (b, dd, e, td) = (r.beta_tau, r.damping, r.shift_speed, r.tau_dot);
    let forcing_const = (-0.5 * st.m.s).exp() * r.kappa_dot;
    let psi = ProfileNu::stable();
    let inside = solver.interior();
    let g = solver.grid;
    let o = g.origin_index();

    let names = ["first", "second", "third", "sixth", "difference", "difference_first", "difference_fourth"];
    let mut worst = [0.0f64; 7];
    let mut origin = [0.0f64; 7];
    for j in 0..g.n() {
        let y = g.x(j);
        if y.abs() > inside {
            continue;
        }
        let w = |k: usize| d[k].values[j];
        let lw = |k: usize| dd * lap[k].values[j];
        let gw = b * (w(0) + e) + 1.5 * y;
        let jet: [f64; MAX_DERIVATIVE + 1] = psi.jet(y);
        let ps = |k: usize| jet[k];
        let wt = |k: usize| w(k) - ps(k);

        let res = [
            dt_of(1, j) + (1.0 + b * w(1)) * w(1) + gw * w(2) + b * lw(1),
            dt_of(2, j) + (2.5 + 3.0 * b * w(1)) * w(2) + gw * w(3) + b * lw(2),
            dt_of(3, j) + (4.0 + 4.0 * b * w(1)) * w(3) + gw * w(4) + b * (lw(3) + 3.0 * w(2) * w(2)),
            dt_of(6, j) + (8.5 + 7.0 * b * w(1)) * w(6)
                + gw * w(7)
                + b * (lw(6) + 35.0 * w(3) * w(4) + 21.0 * w(2) * w(5)),
            dt_of(0, j) + (-0.5 + b * ps(1)) * wt(0)
                + gw * wt(1)
                + b * (forcing_const + lw(0) + ps(1) * (td * ps(0) + e)),
            dt_of(1, j) + (1.0 + b * (wt(1) + 2.0 * ps(1))) * wt(1)
                + gw * wt(2)
                + b * (lw(1) + (e + wt(0) + td * ps(0)) * ps(2) + td * ps(1) * ps(1)),
            dt_of(4, j) + (5.5 + 5.0 * b * w(1)) * wt(4)
                + gw * (w(5) - ps(5))
                + b * (lw(4)
                    + (e + wt(0) + td * ps(0)) * ps(5)
                    + 5.0 * wt(1) * ps(4)
                    + 10.0 * wt(2) * ps(3)
                    + 10.0 * wt(3) * ps(2)
                    + 10.0 * wt(2) * wt(3)
                    + 5.0 * td * ps(1) * ps(4)
                    + 10.0 * td * ps(2) * ps(3)),
        ];
        for i in 0..7 {
            worst[i] = worst[i].max(res[i].abs());
            if j == o {
                origin[i] = res[i].abs();
            }
        }
    }
    Ok(ResidualReport {
        ds,
        equations: names
            .iter()
            .enumerate()
            .map(|(i, n)| EquationResidual { name: n.to_string(), max_residual: worst[i], at_origin: origin[i] })
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solver(alpha: Option<f64>) -> SelfSimSolver {
        let grid = Grid::new(2048, 40.0).unwrap();
        let cfg = SelfSimConfig { alpha: alpha.map(|a| Alpha::new(a).unwrap()), ..Default::default() };
        SelfSimSolver::new(grid, cfg)
    }

    #[test]
    fn burgers_profile_is_stationary_without_dissipation() {
        let sv = solver(None);
        let st = sv.initial_state(8.0, 0.0, 1e9);
        let dw = sv.rhs(&st).unwrap();
        let lim = 0.25 * sv.grid.half_length();
        let worst = (0..sv.grid.n())
            .filter(|&j| sv.grid.x(j).abs() <= lim)
            .map(|j| dw.values[j].abs())
            .fold(0.0, f64::max);
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn rates_for_the_profile() {
        let sv = solver(Some(0.2));
        let st = sv.initial_state(5.0, 0.0, 1e9);
        let r = sv.modulation_rates(&st).unwrap();
        assert!(r.tau_dot > 0.0);
        assert!(r.shift_speed.abs() < 1e-10);
        assert!(r.beta_tau > 1.0);
    }

    #[test]
    fn stationarity_at_origin() {
        let sv = solver(Some(0.25));
        let st = sv.initial_state(4.0, 0.3, 1e9);
        let dw = sv.rhs(&st).unwrap();
        let o = sv.grid.origin_index();
        assert!(dw.values[o].abs() < 1e-10);
        let slope = dw.derivative(1).values[o];
        assert!(slope.abs() < 1e-8, "{slope}");
        let curv = dw.derivative(2).values[o];
        assert!(curv.abs() < 1e-8, "{curv}");
    }

    #[test]
    fn degenerate_profile_is_rejected() {
        let sv = solver(Some(0.2));
        let w = sv.grid.sample(|y| -y * (-y * y / 50.0).exp());
        let st = SelfSimState { w, m: ModulationState::initial(3.0, 0.0) };
        assert!(matches!(sv.modulation_rates(&st), Err(Error::DegenerateProfile { .. })));
    }

    #[test]
    fn renormalization_restores_constraints() {
        let sv = solver(Some(0.2));
        let mut st = sv.initial_state(4.0, 0.0, 1e9);
        let w = st.w.shifted(0.01).map(|v| 1.02 * v + 0.003);
        st.w = w;
        let t = st.m.t();
        let out = sv.renormalize(&st).unwrap();
        let res = constraint_residuals(&out.w);
        assert!(res.iter().all(|r| *r < 1e-10), "{res:?}");
        assert!((out.m.t() - t).abs() < 1e-15);
        assert!(out.m.xi != 0.0 && out.m.kappa != 0.0);
    }

    #[test]
    fn round_trip_through_physical_variables() {
        let sv = solver(Some(0.2));
        let st = sv.initial_state(3.0, 0.2, 1e9);
        let m = ModulationState { xi: 0.0, ..st.m };
        let stretch = (-1.5 * m.s).exp();
        let gx = Grid::new(2048, 40.0 * stretch).unwrap();
        let phys = from_selfsim(&SelfSimState { w: st.w.clone(), m }, gx);
        let back = to_selfsim(&phys, &m, sv.grid).unwrap();
        for (a, b) in st.w.values.iter().zip(&back.w.values) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!((m.tau - phys.t - (-m.s).exp()).abs() < 1e-15);
        let late = PhysState { u: phys.u.clone(), t: m.tau + 1.0 };
        assert!(to_selfsim(&late, &m, sv.grid).is_err());
    }

    #[test]
    fn zero_field_maps_to_constant() {
        let sv = solver(None);
        let st = SelfSimState { w: sv.grid.zeros(), m: ModulationState::initial(2.0, 0.7) };
        let phys = from_selfsim(&st, Grid::new(64, 1.0).unwrap());
        assert!(phys.u.values.iter().all(|v| (v - 0.7).abs() < 1e-15));
    }
}
