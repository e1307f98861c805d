//! Canonical experiment setups shared by the command line driver and the test suites.

use serde::{Deserialize, Serialize};

use crate::diagnostics::start_for_rate;
use crate::error::{Error, Result};
use crate::fraclap::Alpha;
use crate::grid::{Field, Grid};
use crate::oracle::eval_characteristics;
use crate::physical::{
    fit_blowup, integrate, make_initial_data, BlowupFit, BootstrapParams, Model, PhysTrace, RunControl,
};
use crate::selfsim::{SelfSimConfig, SelfSimRun, SelfSimRunControl, SelfSimSolver, SelfSimState};

fn alpha_of(value: f64) -> Result<Option<Alpha>> {
    if value == 0.0 {
        Ok(None)
    } else {
        Alpha::new(value).map(Some)
    }
}

/// Gradient blowup from `u₀ = ε^{1/2} η(x) Ψ(x ε^{-3/2}) + κ₀`, started at `t = -ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockSetup {
    pub alpha: f64,
    pub epsilon: f64,
    pub kappa0: f64,
    #[serde(rename = "M")]
    pub m_big: f64,
    pub n: usize,
    pub half_length: f64,
    pub control: RunControl,
}

impl ShockSetup {
    /// `n = 2^14` on `[-0.1, 0.1)`; Hölder seminorms on the central quarter.
    pub fn desk(alpha: f64, epsilon: f64) -> Self {
        let half_length = 0.1;
        Self {
            alpha,
            epsilon,
            kappa0: 0.0,
            m_big: 10.0,
            n: 1 << 14,
            half_length,
            control: RunControl { holder_window: 0.25 * half_length, tail_limit: 1e-6, ..RunControl::default() },
        }
    }

    pub fn params(&self) -> Result<BootstrapParams> {
        BootstrapParams::new(self.alpha, self.epsilon, self.m_big)
    }

    pub fn start_time(&self) -> f64 {
        -self.epsilon
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.n, self.half_length)
    }

    pub fn model(&self) -> Result<Model> {
        Ok(Model::fractal(alpha_of(self.alpha)?))
    }

    pub fn initial_data(&self) -> Result<Field> {
        make_initial_data(&self.params()?, self.kappa0, self.grid()?)
    }

    pub fn run_from(&self, u0: &Field) -> Result<(PhysTrace, BlowupFit)> {
        let trace = integrate(u0, self.start_time(), &self.model()?, &self.control, None)?;
        let fit = fit_blowup(&trace)?;
        Ok((trace, fit))
    }

    pub fn run(&self) -> Result<(Field, PhysTrace, BlowupFit)> {
        let u0 = self.initial_data()?;
        let (trace, fit) = self.run_from(&u0)?;
        Ok((u0, trace, fit))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelfSimStart {
    /// `s₀ = -ln ε`.
    Epsilon,
    /// `s₀` chosen so the unperturbed profile starts with `τ̇` equal to this value.
    TauRate(f64),
}

/// Dynamic-rescaling run from the tapered profile plus `amplitude · y⁴/(1+y²)^{3/2}`.
///
/// The added term vanishes to fourth order at the origin, so it leaves the
/// constraints and `∂_y³W(0)` untouched, and grows linearly outward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfSimSetup {
    pub alpha: f64,
    pub epsilon: f64,
    pub kappa0: f64,
    pub start: SelfSimStart,
    /// Half-length of the physical cutoff `η`; `None` drops it.
    pub physical_half_length: Option<f64>,
    pub n: usize,
    pub half_length: f64,
    pub s_len: f64,
    pub snapshot_every: f64,
    pub perturbation: f64,
    pub tau_dot_limit: Option<f64>,
    pub max_steps: usize,
    pub solver: SelfSimConfig,
}

impl SelfSimSetup {
    /// Eight units of `s` at `α = 0.2` from `ε = 10⁻⁴`.
    pub fn convergence() -> Self {
        Self {
            alpha: 0.2,
            epsilon: 1e-4,
            kappa0: 0.0,
            start: SelfSimStart::Epsilon,
            physical_half_length: None,
            n: 2048,
            half_length: 50.0,
            s_len: 8.0,
            snapshot_every: 0.01,
            perturbation: 0.02,
            tau_dot_limit: None,
            max_steps: 10_000_000,
            solver: SelfSimConfig::default(),
        }
    }

    /// Four units of `s` from the bare profile, starting where `τ̇ = 0.1`.
    pub fn divergence(alpha: f64) -> Self {
        Self {
            alpha,
            start: SelfSimStart::TauRate(0.1),
            s_len: 4.0,
            snapshot_every: 0.05,
            perturbation: 0.0,
            tau_dot_limit: Some(0.9),
            ..Self::convergence()
        }
    }

    pub fn alpha(&self) -> Result<Option<Alpha>> {
        alpha_of(self.alpha)
    }

    pub fn solver(&self) -> Result<SelfSimSolver> {
        let grid = Grid::new(self.n, self.half_length)?;
        Ok(SelfSimSolver::new(grid, SelfSimConfig { alpha: self.alpha()?, ..self.solver }))
    }

    pub fn start_time(&self) -> Result<f64> {
        match self.start {
            SelfSimStart::Epsilon => {
                if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
                    return Err(Error::Domain(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
                }
                Ok(-self.epsilon.ln())
            }
            SelfSimStart::TauRate(target) => {
                let a = self.alpha()?.ok_or_else(|| Error::Domain("a rate-based start needs alpha > 0".into()))?;
                start_for_rate(a, target)
            }
        }
    }

    pub fn initial_state(&self, solver: &SelfSimSolver) -> Result<SelfSimState> {
        let s0 = self.start_time()?;
        let mut st = solver.initial_state(s0, self.kappa0, self.physical_half_length.unwrap_or(f64::INFINITY));
        if self.perturbation != 0.0 {
            let c = self.perturbation;
            let bump = st.w.grid.sample(|y| c * y.powi(4) / (1.0 + y * y).powf(1.5) * solver.taper(y));
            st.w = st.w.zip_map(&bump, |a, b| a + b);
        }
        solver.renormalize(&st)
    }

    pub fn control(&self, s0: f64) -> SelfSimRunControl {
        SelfSimRunControl {
            s_end: s0 + self.s_len,
            snapshot_every: self.snapshot_every,
            tau_dot_limit: self.tau_dot_limit,
            max_steps: self.max_steps,
        }
    }

    pub fn run(&self) -> Result<SelfSimRun> {
        let solver = self.solver()?;
        let st = self.initial_state(&solver)?;
        solver.run(&st, &self.control(st.m.s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub t: f64,
    /// Max-norm difference between the solver and characteristics at `t`.
    pub max_error: f64,
    #[serde(rename = "T_star_hat")]
    pub t_star_hat: f64,
}

/// Inviscid Burgers from `u₀ = -sin x` on `[-π, π)`: solution at `t` against
/// characteristics, and the fitted blowup time (exactly 1).
pub fn burgers_oracle_comparison(n: usize, t: f64) -> Result<OracleReport> {
    let grid = Grid::new(n, std::f64::consts::PI)?;
    let u0 = grid.sample(|x| -x.sin());
    let model = Model::fractal(None);
    let ctl = RunControl::default();
    let at_t = integrate(&u0, 0.0, &model, &ctl, Some(t))?;
    let last = at_t.snapshots.last().expect("final state is stored");
    if last.t < t {
        return Err(Error::Domain(format!("the resolution guard stopped {n} points at t = {} before t = {t}", last.t)));
    }
    let u = &last.u;
    let exact = |x: f64| -x.sin();
    let mut max_error: f64 = 0.0;
    for (j, v) in u.values.iter().enumerate() {
        let e = eval_characteristics(&exact, t, grid.x(j), 1e-14)?;
        max_error = max_error.max((v - e).abs());
    }
    let fit = fit_blowup(&integrate(&u0, 0.0, &model, &ctl, None)?)?;
    Ok(OracleReport { n, t, max_error, t_star_hat: fit.t_star_hat })
}
