//! Run configuration, presets and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use shocklab::experiments::{SelfSimSetup, SelfSimStart, ShockSetup};
use shocklab::physical::{BootstrapParams, RunControl};
use shocklab::selfsim::SelfSimConfig;

/// Version of the artifact layout written next to every run.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Physical,
    Selfsim,
    Both,
    /// Inviscid Burgers from `-sin x` against characteristics.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    /// `‖p‖_{H⁶} / ‖u₀‖_{H⁶}`.
    pub delta: f64,
    pub max_mode: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalSection {
    pub n: usize,
    pub half_length: f64,
    pub control: RunControl,
    pub sandwich_slack: f64,
    /// A run with no shock by `horizon · ε^{(8/9)(1-3α)}` is stopped and reported as such.
    pub horizon: f64,
    /// Probe offsets from the blowup point for the bounded-gradient check.
    pub probe_offsets: Vec<f64>,
    pub perturbation: Option<PerturbationSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfSimSection {
    pub start: SelfSimStart,
    pub physical_half_length: Option<f64>,
    pub n: usize,
    pub half_length: f64,
    pub s_len: f64,
    pub snapshot_every: f64,
    pub perturbation: f64,
    pub tau_dot_limit: Option<f64>,
    pub max_steps: usize,
    pub sponge_strength: f64,
    pub sponge_fraction: f64,
    pub third_deriv_floor: f64,
    pub cfl: f64,
    pub max_ds: f64,
    pub renorm_tol: f64,
    pub renorm_max_iter: usize,
    /// Trajectory starting points.
    pub trajectories: Vec<f64>,
    /// Half-width of the window for `‖W - Ψ_ν‖_∞`.
    pub window: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub n: usize,
    pub t: f64,
    pub tol: f64,
}

/// Which monitor groups decide the exit code. Disabled groups are still reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Monitors {
    pub blowup: bool,
    pub sandwich: bool,
    pub holder: bool,
    pub uniqueness: bool,
    pub perturbation: bool,
    pub selfsim: bool,
    pub bootstraps: bool,
    pub trajectories: bool,
    pub farfield: bool,
    pub convergence: bool,
    pub divergence: bool,
    pub oracle: bool,
}

impl Monitors {
    pub fn all() -> Self {
        Self {
            blowup: true,
            sandwich: true,
            holder: true,
            uniqueness: true,
            perturbation: true,
            selfsim: true,
            bootstraps: true,
            trajectories: true,
            farfield: true,
            convergence: true,
            divergence: true,
            oracle: true,
        }
    }

    pub fn enabled(&self, group: &str) -> bool {
        match group {
            "blowup" => self.blowup,
            "sandwich" => self.sandwich,
            "holder" => self.holder,
            "uniqueness" => self.uniqueness,
            "perturbation" => self.perturbation,
            "selfsim" => self.selfsim,
            "bootstraps" => self.bootstraps,
            "trajectories" => self.trajectories,
            "farfield" => self.farfield,
            "convergence" => self.convergence,
            "divergence" => self.divergence,
            "oracle" => self.oracle,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    pub mode: Mode,
    /// `0` is inviscid Burgers.
    pub alpha: f64,
    pub epsilon: f64,
    pub kappa0: f64,
    #[serde(rename = "M")]
    pub m_big: f64,
    pub seed: u64,
    pub physical: PhysicalSection,
    pub selfsim: SelfSimSection,
    pub oracle: OracleSection,
    pub monitors: Monitors,
}

pub const PRESETS: [&str; 4] = ["alpha02", "burgers-oracle", "tau-divergence", "selfsim"];

impl RunConfig {
    /// Physical shock run at `α = 0.2`, `ε = 0.05`.
    pub fn alpha02() -> Self {
        let desk = ShockSetup::desk(0.2, 0.05);
        let conv = SelfSimSetup::convergence();
        Self {
            name: "alpha02".into(),
            mode: Mode::Physical,
            alpha: 0.2,
            epsilon: 0.05,
            kappa0: 0.0,
            m_big: desk.m_big,
            seed: 0,
            physical: PhysicalSection {
                n: desk.n,
                half_length: desk.half_length,
                control: desk.control,
                sandwich_slack: 0.1,
                horizon: 1.0,
                probe_offsets: vec![-0.02, 0.02],
                perturbation: None,
            },
            selfsim: SelfSimSection::from_setup(&conv),
            oracle: OracleSection { n: 4096, t: 0.5, tol: 1e-4 },
            monitors: Monitors { bootstraps: false, ..Monitors::all() },
        }
    }

    pub fn burgers_oracle() -> Self {
        Self { name: "burgers-oracle".into(), mode: Mode::Oracle, alpha: 0.0, ..Self::alpha02() }
    }

    /// Dynamic rescaling at `α = 0.2` from `ε = 10⁻⁴`, with trajectories.
    pub fn selfsim() -> Self {
        let conv = SelfSimSetup::convergence();
        Self {
            name: "selfsim".into(),
            mode: Mode::Selfsim,
            alpha: conv.alpha,
            epsilon: conv.epsilon,
            ..Self::alpha02()
        }
    }

    /// Bare profile at `α = 0.4`, where `τ̇` must not decay.
    pub fn tau_divergence() -> Self {
        let div = SelfSimSetup::divergence(0.4);
        let mut selfsim = SelfSimSection::from_setup(&div);
        selfsim.trajectories.clear();
        Self {
            name: "tau-divergence".into(),
            mode: Mode::Selfsim,
            alpha: 0.4,
            epsilon: div.epsilon,
            selfsim,
            monitors: Monitors { convergence: false, bootstraps: false, ..Monitors::all() },
            ..Self::alpha02()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "alpha02" => Some(Self::alpha02()),
            "burgers-oracle" => Some(Self::burgers_oracle()),
            "tau-divergence" => Some(Self::tau_divergence()),
            "selfsim" => Some(Self::selfsim()),
            _ => None,
        }
    }

    pub fn params(&self) -> shocklab::Result<BootstrapParams> {
        BootstrapParams::new(self.alpha, self.epsilon, self.m_big)
    }

    pub fn shock_setup(&self) -> ShockSetup {
        ShockSetup {
            alpha: self.alpha,
            epsilon: self.epsilon,
            kappa0: self.kappa0,
            m_big: self.m_big,
            n: self.physical.n,
            half_length: self.physical.half_length,
            control: self.physical.control,
        }
    }

    pub fn selfsim_setup(&self) -> SelfSimSetup {
        let s = &self.selfsim;
        SelfSimSetup {
            alpha: self.alpha,
            epsilon: self.epsilon,
            kappa0: self.kappa0,
            start: s.start,
            physical_half_length: s.physical_half_length,
            n: s.n,
            half_length: s.half_length,
            s_len: s.s_len,
            snapshot_every: s.snapshot_every,
            perturbation: s.perturbation,
            tau_dot_limit: s.tau_dot_limit,
            max_steps: s.max_steps,
            solver: SelfSimConfig {
                alpha: None,
                sponge_strength: s.sponge_strength,
                sponge_fraction: s.sponge_fraction,
                third_deriv_floor: s.third_deriv_floor,
                cfl: s.cfl,
                max_ds: s.max_ds,
                renorm_tol: s.renorm_tol,
                renorm_max_iter: s.renorm_max_iter,
            },
        }
    }

    /// Checks every precondition of the selected mode before anything runs.
    pub fn validate(&self) -> Result<(), String> {
        let bad = |what: &str| Err(format!("{}: {what}", self.name));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a nonempty path component");
        }
        if !(0.0..0.5).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1/2)");
        }
        let needs_params = matches!(self.mode, Mode::Physical | Mode::Both)
            || (self.mode == Mode::Selfsim && self.selfsim.start == SelfSimStart::Epsilon);
        if needs_params {
            self.params().map_err(|e| format!("{}: {e}", self.name))?;
        }
        if !self.kappa0.is_finite() {
            return bad("kappa0 must be finite");
        }
        if matches!(self.mode, Mode::Physical | Mode::Both) {
            let p = &self.physical;
            if !(p.n >= 16 && p.n.is_power_of_two()) || !(p.half_length > 0.0 && p.half_length.is_finite()) {
                return bad("physical grid needs n a power of two >= 16 and a positive half-length");
            }
            let c = &p.control;
            let finite = [c.grad_cap, c.cfl, c.grad_step, c.tail_limit, c.tail_band, c.min_dt, c.holder_window, c.snapshot_growth];
            if finite.iter().any(|v| !(v.is_finite() && *v > 0.0)) || c.max_steps == 0 {
                return bad("physical control values must be positive and finite");
            }
            if !(p.sandwich_slack >= 0.0) {
                return bad("sandwich slack must be nonnegative");
            }
            if !(p.horizon > 0.0 && p.horizon.is_finite()) {
                return bad("horizon must be positive");
            }
            if let Some(q) = &p.perturbation {
                if !(0.0..=1e-2).contains(&q.delta) || q.max_mode == 0 {
                    return bad("perturbation delta must lie in [0, 1e-2] with at least one mode");
                }
            }
            let required = self.epsilon.powf(1.5) * self.params().map(|b| b.h).unwrap_or(0.0) / 8.0;
            if 2.0 * p.half_length / p.n as f64 > required {
                return bad("physical grid does not resolve the initial profile");
            }
        }
        if matches!(self.mode, Mode::Selfsim | Mode::Both) {
            let s = &self.selfsim;
            if self.alpha == 0.0 && matches!(s.start, SelfSimStart::TauRate(_)) {
                return bad("a rate-based start needs alpha > 0");
            }
            if !(s.n >= 64 && s.n.is_power_of_two()) || !(s.half_length > 0.0 && s.half_length.is_finite()) {
                return bad("self-similar grid needs n a power of two >= 64 and a positive half-length");
            }
            let positive = [s.s_len, s.snapshot_every, s.sponge_strength, s.third_deriv_floor, s.cfl, s.max_ds, s.renorm_tol, s.window];
            if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) || s.max_steps == 0 || s.renorm_max_iter == 0 {
                return bad("self-similar controls must be positive and finite");
            }
            if !(s.sponge_fraction > 0.0 && s.sponge_fraction < 0.25) {
                return bad("sponge fraction must lie in (0, 0.25)");
            }
            if !s.perturbation.is_finite() || s.trajectories.iter().any(|y| !y.is_finite()) {
                return bad("perturbation and trajectory starts must be finite");
            }
            if s.window > (1.0 - s.sponge_fraction) * s.half_length {
                return bad("convergence window reaches into the absorbing layer");
            }
        }
        if self.mode == Mode::Oracle {
            let o = &self.oracle;
            if !(o.n >= 16 && o.n.is_power_of_two()) || !(o.t > 0.0 && o.t < 1.0) || !(o.tol > 0.0) {
                return bad("oracle needs n a power of two >= 16, 0 < t < 1 and a positive tolerance");
            }
        }
        Ok(())
    }

    /// Applies `key.path=value` assignments; values are parsed as JSON, falling back to strings.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self, String> {
        let mut v = serde_json::to_value(self).map_err(|e| e.to_string())?;
        for (key, raw) in overrides {
            let value: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.clone()));
            let mut slot = &mut v;
            for part in key.split('.') {
                slot = slot
                    .as_object_mut()
                    .and_then(|o| o.get_mut(part))
                    .ok_or_else(|| format!("unknown configuration key '{key}'"))?;
            }
            *slot = value;
        }
        serde_json::from_value(v).map_err(|e| format!("invalid override: {e}"))
    }
}

impl SelfSimSection {
    pub fn from_setup(s: &SelfSimSetup) -> Self {
        Self {
            start: s.start,
            physical_half_length: s.physical_half_length,
            n: s.n,
            half_length: s.half_length,
            s_len: s.s_len,
            snapshot_every: s.snapshot_every,
            perturbation: s.perturbation,
            tau_dot_limit: s.tau_dot_limit,
            max_steps: s.max_steps,
            sponge_strength: s.solver.sponge_strength,
            sponge_fraction: s.solver.sponge_fraction,
            third_deriv_floor: s.solver.third_deriv_floor,
            cfl: s.solver.cfl,
            max_ds: s.solver.max_ds,
            renorm_tol: s.solver.renorm_tol,
            renorm_max_iter: s.solver.renorm_max_iter,
            trajectories: vec![10f64.ln().powi(-2), 1.0, 2.0, 5.0],
            window: 10.0,
        }
    }
}

/// Parses `key=v1,v2,...` into the key and its values.
pub fn parse_vary(spec: &str) -> Result<(String, Vec<String>), String> {
    let (key, values) = spec.split_once('=').ok_or_else(|| format!("expected key=v1,v2,... in '{spec}'"))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
    if key.trim().is_empty() || values.is_empty() {
        return Err(format!("expected key=v1,v2,... in '{spec}'"));
    }
    Ok((key.trim().to_string(), values))
}

/// Cartesian product of the varied keys, in the order given.
pub fn expand(vary: &[(String, Vec<String>)]) -> Vec<Vec<(String, String)>> {
    let mut out = vec![Vec::new()];
    for (key, values) in vary {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut next = prefix.clone();
                    next.push((key.clone(), v.clone()));
                    next
                })
            })
            .collect();
    }
    out
}
