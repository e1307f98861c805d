//! Pseudo-spectral evolution of `∂_t u + ∂_x(u²/2) + (-Δ)^α u = 0` up to gradient blowup.
//!
//! Time stepping is the integrating-factor RK4 scheme: the dissipation is carried
//! exactly by `e^{-|k|^{2α} dt}` and the de-aliased conservative flux by RK4.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fraclap::{symbol, Alpha};
use crate::grid::{Field, Grid, Spectrum};
use crate::profiles::eval_psi;
use crate::singular::linear_fit;

/// The constants that fix the initial data and the bootstrap regions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapParams {
    pub alpha: f64,
    pub epsilon: f64,
    #[serde(rename = "M")]
    pub m_big: f64,
    pub h: f64,
    pub m: f64,
    pub ell: f64,
    pub q: f64,
    pub s0: f64,
}

impl BootstrapParams {
    pub fn new(alpha: f64, epsilon: f64, m_big: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        if !(m_big > 1.0) || m_big.ln() <= 1.0 {
            return Err(Error::Domain(format!("M must exceed e so that h < 1, got {m_big}")));
        }
        if !(0.0..0.5).contains(&alpha) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1/2), got {alpha}")));
        }
        let gap = 1.0 - 3.0 * alpha;
        Ok(Self {
            alpha,
            epsilon,
            m_big,
            h: m_big.ln().powi(-2),
            m: 3.0 / 16.0 * gap,
            ell: 7.0 / 8.0 * gap,
            q: (2.0 / 3.0 * gap).min(1.0 / 6.0),
            s0: -epsilon.ln(),
        })
    }

    /// Upper bound `ε^{(8/9)(1 - 3α)}` on the blowup time.
    pub fn blowup_time_bound(&self) -> f64 {
        self.epsilon.powf(8.0 / 9.0 * (1.0 - 3.0 * self.alpha))
    }
}

/// `C^∞` step rising from 0 at `t ≤ 0` to 1 at `t ≥ 1`.
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Cutoff `η(x) = 1 - S((|x| - L/4)/(L/4))` with `S(t) = e^{-1/t}/(e^{-1/t} + e^{-1/(1-t)})`:
/// identically 1 on `|x| ≤ L/4` and 0 on `|x| ≥ L/2`.
pub fn cutoff(x: f64, half_length: f64) -> f64 {
    let q = 0.25 * half_length;
    1.0 - smooth_step((x.abs() - q) / q)
}

/// `u₀(x) = ε^{1/2} η(x) Ψ(x ε^{-3/2}) + κ₀` on the grid.
pub fn make_initial_data(p: &BootstrapParams, kappa0: f64, grid: Grid) -> Result<Field> {
    let eps = p.epsilon;
    let required = eps.powf(1.5) * p.h / 8.0;
    if grid.spacing() > required {
        return Err(Error::Resolution { spacing: grid.spacing(), required });
    }
    let inner = eps.powf(-1.5);
    let l = grid.half_length();
    let u0 = grid.sample(|x| eps.sqrt() * cutoff(x, l) * eval_psi(x * inner) + kappa0);
    let origin = grid.origin_index();
    let slope = u0.derivative(1).values[origin];
    if (u0.values[origin] - kappa0).abs() > 1e-12 * (1.0 + kappa0.abs())
        || (slope * eps + 1.0).abs() > 1e-3
    {
        return Err(Error::Resolution { spacing: grid.spacing(), required });
    }
    Ok(u0)
}

/// Right-hand side selection; `alpha = None` is inviscid Burgers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub alpha: Option<Alpha>,
    pub advection: bool,
}

impl Model {
    pub fn fractal(alpha: Option<Alpha>) -> Self {
        Self { alpha, advection: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysState {
    pub u: Field,
    pub t: f64,
}

fn nonlinear(u_hat: &Spectrum) -> Spectrum {
    let u = u_hat.to_field();
    let flux = u.map(|v| 0.5 * v * v).spectrum().dealiased();
    let mut d = flux.derivative(1);
    for c in &mut d.coeffs {
        *c = -*c;
    }
    d
}

fn axpy(y: &Spectrum, a: Complex64, x: &Spectrum) -> Spectrum {
    Spectrum { grid: y.grid, coeffs: y.coeffs.iter().zip(&x.coeffs).map(|(yi, xi)| yi + a * xi).collect() }
}

fn scaled(factors: &[f64], x: &Spectrum) -> Spectrum {
    Spectrum { grid: x.grid, coeffs: x.coeffs.iter().zip(factors).map(|(c, f)| c * f).collect() }
}

/// One integrating-factor RK4 step of size `dt`.
pub fn step_with(st: &PhysState, model: &Model, dt: f64) -> Result<PhysState> {
    let grid = st.u.grid;
    let rate: Vec<f64> = (0..grid.n())
        .map(|m| model.alpha.map_or(0.0, |a| symbol(a, grid.wavenumber(m))))
        .collect();
    let full: Vec<f64> = rate.iter().map(|r| (-r * dt).exp()).collect();
    let half: Vec<f64> = rate.iter().map(|r| (-0.5 * r * dt).exp()).collect();
    let u_hat = st.u.spectrum();

    let next = if model.advection {
        let h = Complex64::new(0.5 * dt, 0.0);
        let a = nonlinear(&u_hat);
        let b = nonlinear(&scaled(&half, &axpy(&u_hat, h, &a)));
        let c = nonlinear(&axpy(&scaled(&half, &u_hat), h, &b));
        let d = nonlinear(&axpy(&scaled(&full, &u_hat), Complex64::new(dt, 0.0), &scaled(&half, &c)));
        let mut out = scaled(&full, &u_hat);
        let w = dt / 6.0;
        for m in 0..grid.n() {
            out.coeffs[m] += w * (full[m] * a.coeffs[m] + 2.0 * half[m] * (b.coeffs[m] + c.coeffs[m]) + d.coeffs[m]);
        }
        out
    } else {
        scaled(&full, &u_hat)
    };
    let u = next.to_field();
    let t = st.t + dt;
    if !u.is_finite() {
        return Err(Error::Instability { time: t });
    }
    Ok(PhysState { u, t })
}

pub fn step(st: &PhysState, a: Option<Alpha>, dt: f64) -> Result<PhysState> {
    step_with(st, &Model::fractal(a), dt)
}

/// `max |f(x) - f(z)| / |x - z|^β` over pairs at dyadic separations up to `window`,
/// plus the widest separation that fits inside it.
pub fn holder_seminorm(f: &Field, beta: f64, window: f64) -> f64 {
    assert!(beta > 0.0 && beta < 1.0, "Hölder exponent must lie in (0, 1)");
    let dx = f.grid.spacing();
    let n = f.values.len();
    let widest = ((window / dx) * (1.0 + 1e-12)).floor() as usize;
    let widest = widest.min(n - 1);
    let mut seps = Vec::new();
    let mut d = 1;
    while d <= widest {
        seps.push(d);
        d *= 2;
    }
    if widest > 0 && seps.last() != Some(&widest) {
        seps.push(widest);
    }
    let mut best = 0.0f64;
    for &d in &seps {
        let weight = (d as f64 * dx).powf(-beta);
        let v = &f.values;
        let mut local = 0.0f64;
        for j in 0..n - d {
            local = local.max((v[j + d] - v[j]).abs());
        }
        best = best.max(local * weight);
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunControl {
    /// Stop once `‖∂_x u‖_∞` exceeds this multiple of its initial value.
    pub grad_cap: f64,
    pub cfl: f64,
    /// `dt ≤ grad_step / ‖∂_x u‖_∞`.
    pub grad_step: f64,
    /// Stop once the spectral tail exceeds this fraction of the peak coefficient.
    pub tail_limit: f64,
    /// Start of the monitored band, as a fraction of the de-aliasing cutoff.
    pub tail_band: f64,
    pub min_dt: f64,
    pub max_steps: usize,
    pub holder_window: f64,
    /// A snapshot is stored whenever the gradient grows by this factor.
    pub snapshot_growth: f64,
}

impl Default for RunControl {
    fn default() -> Self {
        Self {
            grad_cap: 1e6,
            cfl: 0.5,
            grad_step: 0.25,
            tail_limit: 1e-9,
            tail_band: 0.75,
            min_dt: 1e-14,
            max_steps: 2_000_000,
            holder_window: f64::INFINITY,
            snapshot_growth: 1.25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysSample {
    pub t: f64,
    pub dt: f64,
    pub max_u: f64,
    pub max_grad: f64,
    pub argmin_grad_x: f64,
    pub holder13: f64,
    pub holder04: f64,
    pub l2_u: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    GradientCap,
    Resolution,
    TimeStepUnderflow,
    StepLimit,
    EndTime,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhysTrace {
    pub samples: Vec<PhysSample>,
    pub stop: Option<StopReason>,
    #[serde(skip)]
    pub snapshots: Vec<PhysState>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupFit {
    #[serde(rename = "T_star_hat")]
    pub t_star_hat: f64,
    pub x_star_hat: f64,
    pub fit_residual: f64,
    pub last_valid_t: f64,
    /// Slope of `1/‖∂_x u‖_∞` against `t` over the fit window (`-1` for Burgers).
    pub slope: f64,
    pub window_start: f64,
}

/// Sub-cell location of the minimum of `∂_x u` by a parabola through three samples.
fn argmin_location(grad: &Field) -> f64 {
    let (j, _) = grad.argmin();
    let n = grad.values.len();
    let (l, c, r) = (grad.values[(j + n - 1) % n], grad.values[j], grad.values[(j + 1) % n]);
    let denom = l - 2.0 * c + r;
    let offset = if denom > 0.0 { (0.5 * (l - r) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    grad.grid.x(j) + offset * grad.grid.spacing()
}

fn sample_of(st: &PhysState, dt: f64, window: f64) -> (PhysSample, Spectrum) {
    let spec = st.u.spectrum();
    let grad = spec.derivative(1).to_field();
    let window = window.min(st.u.grid.half_length());
    (
        PhysSample {
            t: st.t,
            dt,
            max_u: st.u.max_abs(),
            max_grad: grad.max_abs(),
            argmin_grad_x: argmin_location(&grad),
            holder13: holder_seminorm(&st.u, 1.0 / 3.0, window),
            holder04: holder_seminorm(&st.u, 0.4, window),
            l2_u: st.u.l2(),
        },
        spec,
    )
}

/// Integrates until the gradient cap, the resolution guard or `end_time` stops the run.
pub fn integrate(
    u0: &Field,
    t0: f64,
    model: &Model,
    ctl: &RunControl,
    end_time: Option<f64>,
) -> Result<PhysTrace> {
    let grid = u0.grid;
    let band = ctl.tail_band / 1.5;
    let mut st = PhysState { u: u0.spectrum().dealiased().to_field(), t: t0 };
    let (first, _) = sample_of(&st, 0.0, ctl.holder_window);
    let g0 = first.max_grad;
    let mut samples = vec![first];
    let mut snapshots = vec![st.clone()];
    let mut next_snapshot = g0 * ctl.snapshot_growth;
    let mut stop = None;
    for _ in 0..ctl.max_steps {
        let last = *samples.last().expect("initial sample");
        let mut dt = (ctl.cfl * grid.spacing() / last.max_u.max(1e-300)).min(ctl.grad_step / last.max_grad.max(1e-300));
        if let Some(end) = end_time {
            if st.t >= end - 1e-15 * end.abs().max(1.0) {
                stop = Some(StopReason::EndTime);
                break;
            }
            dt = dt.min(end - st.t);
        }
        if dt < ctl.min_dt {
            stop = Some(StopReason::TimeStepUnderflow);
            break;
        }
        st = step_with(&st, model, dt)?;
        let (sample, spec) = sample_of(&st, dt, ctl.holder_window);
        samples.push(sample);
        if sample.max_grad >= next_snapshot {
            snapshots.push(st.clone());
            next_snapshot = sample.max_grad * ctl.snapshot_growth;
        }
        if sample.max_grad >= ctl.grad_cap * g0 {
            stop = Some(StopReason::GradientCap);
            break;
        }
        if spec.tail_fraction(band) > ctl.tail_limit {
            stop = Some(StopReason::Resolution);
            break;
        }
    }
    if stop.is_none() {
        stop = Some(StopReason::StepLimit);
    }
    if snapshots.last().map(|s| s.t) != Some(st.t) {
        snapshots.push(st);
    }
    Ok(PhysTrace { samples, stop, snapshots })
}

/// Least-squares fit of `1/‖∂_x u‖_∞` against `t` over the final decade of growth.
pub fn fit_blowup(trace: &PhysTrace) -> Result<BlowupFit> {
    let s = &trace.samples;
    let first = s.first().ok_or_else(|| Error::FitFailure("empty trace".into()))?;
    let last = s.last().expect("nonempty");
    if last.max_grad < 10.0 * first.max_grad {
        return Err(Error::FitFailure(format!(
            "gradient grew only from {:.3e} to {:.3e}",
            first.max_grad, last.max_grad
        )));
    }
    let floor = last.max_grad / 10.0;
    let window: Vec<&PhysSample> = s.iter().filter(|p| p.max_grad >= floor).collect();
    let pts: Vec<(f64, f64)> = window.iter().map(|p| (p.t, 1.0 / p.max_grad)).collect();
    let (slope, intercept) = linear_fit(&pts)?;
    if !(slope < 0.0) {
        return Err(Error::FitFailure(format!("inverse gradient is not decreasing (slope {slope})")));
    }
    let t_star_hat = -intercept / slope;
    let scale = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    let rms = (pts.iter().map(|&(t, v)| (v - (slope * t + intercept)).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    let loc: Vec<(f64, f64)> = window.iter().map(|p| (p.t, p.argmin_grad_x)).collect();
    let (ls, li) = linear_fit(&loc)?;
    Ok(BlowupFit {
        t_star_hat,
        x_star_hat: ls * t_star_hat + li,
        fit_residual: rms / scale,
        last_valid_t: last.t,
        slope,
        window_start: window[0].t,
    })
}

pub fn run_to_blowup(u0: &Field, t0: f64, a: Option<Alpha>, ctl: &RunControl) -> Result<(PhysTrace, BlowupFit)> {
    let trace = integrate(u0, t0, &Model::fractal(a), ctl, None)?;
    let fit = fit_blowup(&trace)?;
    Ok((trace, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn params_follow_their_formulas() {
        let p = BootstrapParams::new(0.2, 0.05, 10.0).unwrap();
        assert!((p.h - 10f64.ln().powi(-2)).abs() < 1e-15);
        assert!((p.m - 0.075).abs() < 1e-15);
        assert!((p.ell - 0.35).abs() < 1e-15);
        assert!((p.q - 1.0 / 6.0).abs() < 1e-15);
        assert!((p.s0 + 0.05f64.ln()).abs() < 1e-15);
        assert!(BootstrapParams::new(0.2, 1.5, 10.0).is_err());
        assert!(BootstrapParams::new(0.2, 0.05, 2.0).is_err());
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0, 1.0), 1.0);
        assert_eq!(cutoff(0.25, 1.0), 1.0);
        assert_eq!(cutoff(-0.5, 1.0), 0.0);
        assert!(cutoff(0.3, 1.0) > cutoff(0.4, 1.0));
    }

    #[test]
    fn initial_data_pointwise_conditions() {
        let p = BootstrapParams::new(0.2, 0.05, 10.0).unwrap();
        let grid = Grid::new(1 << 14, 0.3).unwrap();
        let u0 = make_initial_data(&p, 0.1, grid).unwrap();
        let j = grid.origin_index();
        assert!((u0.values[j] - 0.1).abs() < 1e-14);
        let d1 = u0.derivative(1).values[j];
        assert!((d1 * 0.05 + 1.0).abs() < 1e-3);
        let d3 = u0.derivative(3).values[j];
        let target = 6.0 * 0.05f64.powi(-4);
        assert!((d3 - target).abs() < 0.05 * target, "{d3} vs {target}");

        let coarse = Grid::new(1024, 0.3).unwrap();
        assert!(matches!(make_initial_data(&p, 0.0, coarse), Err(Error::Resolution { .. })));
    }

    #[test]
    fn constants_are_steady() {
        let g = Grid::new(64, PI).unwrap();
        let mut st = PhysState { u: g.sample(|_| 0.7), t: 0.0 };
        let a = Alpha::new(0.3).ok();
        for _ in 0..20 {
            st = step(&st, a, 0.01).unwrap();
        }
        assert!(st.u.values.iter().all(|v| (v - 0.7).abs() < 1e-14));
    }

    #[test]
    fn pure_dissipation_decays_modes() {
        let g = Grid::new(64, PI).unwrap();
        let a = Alpha::new(0.25).unwrap();
        let model = Model { alpha: Some(a), advection: false };
        let st = PhysState { u: g.sample(|x| (3.0 * x).sin()), t: 0.0 };
        let out = step_with(&st, &model, 0.1).unwrap();
        let factor = (-(3f64.sqrt()) * 0.1).exp();
        for (j, x) in g.points().into_iter().enumerate() {
            assert!((out.u.values[j] - factor * (3.0 * x).sin()).abs() < 1e-14);
        }
    }

    #[test]
    fn holder_examples() {
        let g = Grid::new(1024, 1.0).unwrap();
        let f = g.sample(|x| x);
        let v = holder_seminorm(&f, 1.0 / 3.0, 0.5);
        assert!((v - 0.5f64.powf(2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(holder_seminorm(&g.zeros(), 1.0 / 3.0, 0.5), 0.0);
        let psi = Grid::new(4096, 200.0).unwrap().sample(eval_psi);
        assert!(holder_seminorm(&psi, 1.0 / 3.0, 200.0) <= 2.0);
    }

    #[test]
    fn fit_on_exact_inverse_law() {
        let samples: Vec<PhysSample> = (0..200)
            .map(|i| {
                let t = 0.999 * i as f64 / 199.0;
                PhysSample {
                    t,
                    dt: 0.0,
                    max_u: 1.0,
                    max_grad: 1.0 / (1.0 - t),
                    argmin_grad_x: 0.25,
                    holder13: 0.0,
                    holder04: 0.0,
                    l2_u: 0.0,
                }
            })
            .collect();
        let fit = fit_blowup(&PhysTrace { samples, stop: None, snapshots: vec![] }).unwrap();
        assert!((fit.t_star_hat - 1.0).abs() < 1e-12);
        assert!((fit.x_star_hat - 0.25).abs() < 1e-12);
        assert!((fit.slope + 1.0).abs() < 1e-12);
    }
}
