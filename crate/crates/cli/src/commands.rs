//! Subcommand implementations and the exit-code contract.

use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use shocklab::diagnostics::{
    check_blowup_time, check_bootstraps, check_convergence, check_flap_farfield_decay, check_gradient_sandwich,
    check_holder, check_trajectory_bounds, late_log_slope, perturbation_experiment, tau_divergence_experiment,
    tau_dot_exponent, trace_trajectory, trajectory_constants, ConvergenceReport, DivergenceReport, FarField,
    HolderReport, MonitorVerdict, PerturbationReport, TrajectoryConstants, TrajectoryTrace, LATE_SLOPE_SPAN,
};
use shocklab::experiments::{burgers_oracle_comparison, OracleReport};
use shocklab::fraclap::{
    adjoint_defect, cross_validate, interpolation_bound, positivity_ratio, random_band_limited, Alpha, BumpField,
};
use shocklab::grid::Grid;
use shocklab::physical::{fit_blowup, integrate, BlowupFit, PhysTrace, StopReason};
use shocklab::profiles::{japanese_bracket, taylor_check, verify_profile_bounds, ProfileNu};
use shocklab::selfsim::{SelfSimRecord, SelfSimRun, SelfSimStop};
use shocklab::singular::{flap_psi_prime, linear_fit};

use crate::artifacts::{csv_cell, write_json, Table};
use crate::config::{Mode, RunConfig, SCHEMA_VERSION};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_MONITOR: i32 = 4;

/// A monitor result tagged with its group and whether that group decides the exit code.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub group: String,
    pub gated: bool,
    #[serde(flatten)]
    pub verdict: MonitorVerdict,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhysicalSummary {
    pub stop: Option<StopReason>,
    pub samples: usize,
    pub snapshots: usize,
    /// Absent when no shock formed before the horizon.
    pub fit: Option<BlowupFit>,
    pub blowup_time_bound: f64,
    pub holder: Option<HolderReport>,
    pub perturbation: Option<PerturbationReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectorySummary {
    pub y0: f64,
    pub exited: bool,
    pub late_slope: Option<f64>,
    pub farfield_slope: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfSimSummary {
    pub stop: SelfSimStop,
    pub s0: f64,
    pub s_end: f64,
    pub snapshots: usize,
    pub last: Option<SelfSimRecord>,
    pub tau_dot_exponent: Option<f64>,
    /// `(8/9)(3α - 1)`, the decay exponent of `τ̇` below criticality.
    pub tau_dot_exponent_expected: f64,
    pub final_distance: Option<f64>,
    pub interpolation_spread: Option<f64>,
    pub trajectory_constants: Option<TrajectoryConstants>,
    pub trajectories: Vec<TrajectorySummary>,
    pub divergence: Option<DivergenceReport>,
    /// Present for `α ≥ 1/3`: whether `τ̇` failed to decay.
    pub diverges: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub name: String,
    pub config: RunConfig,
    pub physical: Option<PhysicalSummary>,
    pub selfsim: Option<SelfSimSummary>,
    pub oracle: Option<OracleReport>,
    pub verdicts: Vec<Verdict>,
    pub error: Option<String>,
    pub passed: bool,
}

/// Outcome of one `run`: exit code, summary (absent on config errors) and message.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub name: String,
    pub code: i32,
    pub summary: Option<RunSummary>,
    pub message: Option<String>,
    pub dir: Option<PathBuf>,
}

struct Collector<'a> {
    cfg: &'a RunConfig,
    verdicts: Vec<Verdict>,
}

impl Collector<'_> {
    fn push(&mut self, group: &str, v: MonitorVerdict) {
        self.verdicts.push(Verdict { group: group.into(), gated: self.cfg.monitors.enabled(group), verdict: v });
    }

    fn extend(&mut self, group: &str, vs: impl IntoIterator<Item = MonitorVerdict>) {
        for v in vs {
            self.push(group, v);
        }
    }

    fn prefixed(&mut self, group: &str, prefix: &str, vs: impl IntoIterator<Item = MonitorVerdict>) {
        for mut v in vs {
            v.name = format!("{prefix}{}", v.name);
            self.push(group, v);
        }
    }

    /// A monitor that could not be evaluated counts as failed.
    fn unavailable(&mut self, group: &str, name: &str, why: &shocklab::Error) {
        eprintln!("warning: {name}: {why}");
        self.push(group, MonitorVerdict::new(name, f64::NEG_INFINITY, f64::NAN));
    }
}

/// Tables written next to the summary.
#[derive(Default)]
struct Artifacts {
    tables: Vec<(&'static str, Table)>,
}

fn physical_table(trace: &PhysTrace) -> Table {
    let mut t = Table::new(&["t", "dt", "max_u", "max_grad", "argmin_grad_x", "holder13", "holder04", "l2_u"]);
    for p in &trace.samples {
        t.push(vec![p.t, p.dt, p.max_u, p.max_grad, p.argmin_grad_x, p.holder13, p.holder04, p.l2_u]);
    }
    t
}

fn selfsim_table(run: &SelfSimRun) -> Table {
    let mut t = Table::new(&[
        "s", "t", "tau", "xi", "kappa", "tau_dot", "xi_dot", "kappa_dot", "beta_tau", "res_w0", "res_w1", "res_w2",
        "w3", "max_wy", "dist_psi_1", "dist_psi_10", "dnorm1", "dnorm2", "dnorm3", "dnorm4", "dnorm5", "dnorm6",
    ]);
    for r in &run.records {
        let mut row = vec![
            r.s, r.t, r.tau, r.xi, r.kappa, r.tau_dot, r.xi_dot, r.kappa_dot, r.beta_tau, r.res_w0, r.res_w1, r.res_w2,
            r.w3, r.max_wy, r.dist_psi_1, r.dist_psi_10,
        ];
        row.extend_from_slice(&r.dnorms);
        t.push(row);
    }
    t
}

fn trajectory_table(traces: &[TrajectoryTrace]) -> Table {
    let mut t = Table::new(&["y0", "s", "phi"]);
    for tr in traces {
        for p in &tr.samples {
            t.push(vec![tr.y0, p.s, p.phi]);
        }
    }
    t
}

fn convergence_table(rep: &ConvergenceReport) -> Table {
    let mut t = Table::new(&["s", "distance", "flap_origin", "flap_sup", "interpolation_constant", "slope_l2"]);
    for i in 0..rep.s.len() {
        let at = |v: &Vec<f64>| v.get(i).copied().unwrap_or(f64::NAN);
        t.push(vec![
            rep.s[i],
            rep.distance[i],
            at(&rep.flap_origin),
            at(&rep.flap_sup),
            rep.interpolation_constant[i],
            rep.slope_l2[i],
        ]);
    }
    t
}

fn run_physical(cfg: &RunConfig, col: &mut Collector, art: &mut Artifacts) -> shocklab::Result<PhysicalSummary> {
    let setup = cfg.shock_setup();
    let params = setup.params()?;
    let u0 = setup.initial_data()?;
    let horizon = cfg.physical.horizon * params.blowup_time_bound();
    let trace = integrate(&u0, setup.start_time(), &setup.model()?, &setup.control, Some(horizon))?;
    art.tables.push(("physical.csv", physical_table(&trace)));
    let mut summary = PhysicalSummary {
        stop: trace.stop,
        samples: trace.samples.len(),
        snapshots: trace.snapshots.len(),
        fit: None,
        blowup_time_bound: params.blowup_time_bound(),
        holder: None,
        perturbation: None,
    };
    if trace.stop == Some(StopReason::EndTime) {
        col.push("blowup", MonitorVerdict::new("shock_formed", -1.0, horizon));
        return Ok(summary);
    }
    let fit = fit_blowup(&trace)?;
    summary.fit = Some(fit);

    col.push("blowup", check_blowup_time(&fit, &params));
    col.extend("sandwich", check_gradient_sandwich(&trace, &fit, cfg.physical.sandwich_slack));
    summary.holder = match check_holder(&trace, &fit) {
        Ok(h) => {
            col.extend("holder", h.verdicts.clone());
            Some(h)
        }
        Err(e) => {
            col.unavailable("holder", "holder", &e);
            None
        }
    };
    for &offset in &cfg.physical.probe_offsets {
        let name = format!("bounded_away[{offset}]");
        match shocklab::diagnostics::uniqueness_proxy(&trace, &fit, fit.x_star_hat + offset) {
            Ok(mut v) => {
                v.name = name;
                col.push("uniqueness", v);
            }
            Err(e) => col.unavailable("uniqueness", &name, &e),
        }
    }
    summary.perturbation = match &cfg.physical.perturbation {
        Some(q) => {
            let rep = perturbation_experiment(
                &u0,
                &fit,
                setup.start_time(),
                &setup.model()?,
                &setup.control,
                q.delta,
                cfg.seed,
                q.max_mode,
            )?;
            col.push("perturbation", MonitorVerdict::new("forms_shock", if rep.forms_shock { 0.0 } else { -1.0 }, rep.t_star));
            let bound = 10.0 * q.delta * fit.t_star_hat.abs();
            col.push("perturbation", MonitorVerdict::new("time_shift", bound - rep.delta_t.abs(), rep.t_star));
            Some(rep)
        }
        None => None,
    };
    Ok(summary)
}

/// Running extreme of `bound - value` over the records.
fn record_margin(run: &SelfSimRun, f: impl Fn(&SelfSimRecord) -> f64) -> (f64, f64) {
    run.records.iter().map(|r| (f(r), r.s)).fold((f64::INFINITY, f64::NAN), |acc, v| if v.0 < acc.0 { v } else { acc })
}

fn run_selfsim(cfg: &RunConfig, col: &mut Collector, art: &mut Artifacts) -> shocklab::Result<SelfSimSummary> {
    let setup = cfg.selfsim_setup();
    let run = setup.run()?;
    art.tables.push(("selfsim.csv", selfsim_table(&run)));
    let alpha = setup.alpha()?;
    let subcritical = cfg.alpha < 1.0 / 3.0;
    let s0 = run.records.first().map_or(f64::NAN, |r| r.s);
    let s_end = run.records.last().map_or(f64::NAN, |r| r.s);

    let (m, at) = record_margin(&run, |r| 1e-8 - r.res_w0.abs().max(r.res_w1.abs()).max(r.res_w2.abs()));
    col.push("selfsim", MonitorVerdict::new("constraint_residuals", m, at));
    if subcritical {
        let (m, at) = record_margin(&run, |r| (r.beta_tau - 1.0).min(1.5 - r.beta_tau));
        col.push("selfsim", MonitorVerdict::new("beta_tau_range", m, at));
        let (m, at) = record_margin(&run, |r| 1.0 - (r.w3 - 6.0).abs());
        col.push("selfsim", MonitorVerdict::new("third_derivative_at_origin", m, at));
        let finished = if run.stop == SelfSimStop::EndTime { 0.0 } else { -1.0 };
        col.push("selfsim", MonitorVerdict::new("reached_end_time", finished, s_end));
    }

    let params = cfg.params().ok();
    let mut final_distance = None;
    let mut interpolation_spread = None;
    if let (Some(p), true) = (&params, subcritical) {
        let rep = check_convergence(&run, cfg.selfsim.window, p)?;
        col.push("convergence", rep.monotone(1e-10));
        let last = rep.distance.last().copied().unwrap_or(f64::INFINITY);
        col.push("convergence", MonitorVerdict::new("distance_final", 0.1 - last, s_end));
        if alpha.is_some() {
            col.push("convergence", rep.flap_growth(0.2));
            let worst = rep.flap_origin.iter().cloned().fold(0.0, f64::max);
            col.push("convergence", MonitorVerdict::new("flap_origin_bounded", rep.flap_origin_scale - worst, s_end));
        }
        col.push("convergence", rep.energy_bounded());
        let spread = rep.interpolation_spread();
        col.push("convergence", MonitorVerdict::new("interpolation_stable", 2.0 - spread, s_end));
        final_distance = Some(last);
        interpolation_spread = Some(spread);
        art.tables.push(("convergence.csv", convergence_table(&rep)));

        if let (Some(first), Some(final_state)) = (run.snapshots.first(), run.snapshots.last()) {
            let window = 0.75 * cfg.selfsim.half_length;
            col.prefixed("bootstraps", "start:", check_bootstraps(first, p, window));
            col.prefixed("bootstraps", "end:", check_bootstraps(final_state, p, window));
        }
    }

    let mut constants = None;
    let mut traces = Vec::new();
    let mut trajectories = Vec::new();
    if let (Some(p), true) = (&params, !cfg.selfsim.trajectories.is_empty()) {
        let c = trajectory_constants(&run, p)?;
        constants = Some(c);
        for &y0 in &cfg.selfsim.trajectories {
            let tr = trace_trajectory(&run, y0, None, 1, FarField::Stop)?;
            col.prefixed("trajectories", &format!("y0={y0}:"), check_trajectory_bounds(&tr, p, &c));
            let late_slope = if y0.abs() >= 1.0 { late_log_slope(&tr, LATE_SLOPE_SPAN).ok() } else { None };
            let farfield_slope = match (alpha, y0.abs() >= 1.0) {
                (Some(a), true) => match check_flap_farfield_decay(&run, a, y0) {
                    Ok(d) => {
                        let mut v = d.verdict;
                        v.name = format!("y0={y0}:{}", v.name);
                        col.push("farfield", v);
                        Some(d.slope)
                    }
                    Err(e) => {
                        col.unavailable("farfield", &format!("y0={y0}:flap_slope_decay"), &e);
                        None
                    }
                },
                _ => None,
            };
            trajectories.push(TrajectorySummary { y0, exited: tr.exited, late_slope, farfield_slope });
            traces.push(tr);
        }
        art.tables.push(("trajectories.csv", trajectory_table(&traces)));
    }

    let exponent = tau_dot_exponent(&run).ok();
    let expected = 8.0 / 9.0 * (3.0 * cfg.alpha - 1.0);
    let mut divergence = None;
    let mut diverges = None;
    match alpha {
        Some(a) if !subcritical => {
            let rep = tau_divergence_experiment(a, &run)?;
            diverges = Some(rep.verdict.satisfied);
            col.push("divergence", rep.verdict.clone());
            divergence = Some(rep);
        }
        _ => match exponent {
            Some(e) => col.push("divergence", MonitorVerdict::new("tau_dot_decay_rate", 0.2 - (e - expected).abs(), s_end)),
            None => col.unavailable("divergence", "tau_dot_decay_rate", &shocklab::Error::FitFailure("no positive rates".into())),
        },
    }

    Ok(SelfSimSummary {
        stop: run.stop,
        s0,
        s_end,
        snapshots: run.snapshots.len(),
        last: run.records.last().copied(),
        tau_dot_exponent: exponent,
        tau_dot_exponent_expected: expected,
        final_distance,
        interpolation_spread,
        trajectory_constants: constants,
        trajectories,
        divergence,
        diverges,
    })
}

fn run_oracle(cfg: &RunConfig, col: &mut Collector) -> shocklab::Result<OracleReport> {
    let o = &cfg.oracle;
    let rep = burgers_oracle_comparison(o.n, o.t)?;
    col.push("oracle", MonitorVerdict::new("characteristics_error", o.tol - rep.max_error, o.t));
    col.push("oracle", MonitorVerdict::new("blowup_time", 0.01 - (rep.t_star_hat - 1.0).abs(), rep.t_star_hat));
    Ok(rep)
}

/// Validates and executes one configuration, writing its bundle under `out/<name>` when given.
pub fn execute(cfg: &RunConfig, out: Option<&Path>) -> RunOutcome {
    let dir = out.map(|o| o.join(&cfg.name));
    let fail = |code, message: String, summary| RunOutcome {
        name: cfg.name.clone(),
        code,
        summary,
        message: Some(message),
        dir: dir.clone(),
    };
    if let Err(e) = cfg.validate() {
        return fail(EXIT_CONFIG, e, None);
    }
    let mut col = Collector { cfg, verdicts: Vec::new() };
    let mut art = Artifacts::default();
    let mut summary = RunSummary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        config: cfg.clone(),
        physical: None,
        selfsim: None,
        oracle: None,
        verdicts: Vec::new(),
        error: None,
        passed: false,
    };
    let result: shocklab::Result<()> = (|| {
        if matches!(cfg.mode, Mode::Physical | Mode::Both) {
            summary.physical = Some(run_physical(cfg, &mut col, &mut art)?);
        }
        if matches!(cfg.mode, Mode::Selfsim | Mode::Both) {
            summary.selfsim = Some(run_selfsim(cfg, &mut col, &mut art)?);
        }
        if cfg.mode == Mode::Oracle {
            summary.oracle = Some(run_oracle(cfg, &mut col)?);
        }
        Ok(())
    })();
    summary.verdicts = col.verdicts;
    let (code, message) = match &result {
        Err(e) => (EXIT_SOLVER, Some(format!("solver failure: {e}"))),
        Ok(()) => {
            let failed: Vec<&str> =
                summary.verdicts.iter().filter(|v| v.gated && !v.verdict.satisfied).map(|v| v.verdict.name.as_str()).collect();
            if failed.is_empty() {
                (EXIT_OK, None)
            } else {
                (EXIT_MONITOR, Some(format!("monitor failure: {}", failed.join(", "))))
            }
        }
    };
    summary.error = message.clone();
    summary.passed = code == EXIT_OK;
    if let Some(d) = &dir {
        if let Err(e) = write_bundle(d, cfg, &summary, &art) {
            return fail(EXIT_SOLVER, format!("cannot write artifacts to {}: {e}", d.display()), Some(summary));
        }
    }
    RunOutcome { name: cfg.name.clone(), code, summary: Some(summary), message, dir }
}

#[derive(Serialize)]
struct ConfigBundle<'a> {
    schema_version: u32,
    config: &'a RunConfig,
}

fn write_bundle(dir: &Path, cfg: &RunConfig, summary: &RunSummary, art: &Artifacts) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_json(&dir.join("config.json"), &ConfigBundle { schema_version: SCHEMA_VERSION, config: cfg })?;
    for (name, table) in &art.tables {
        table.write(&dir.join(name))?;
    }
    write_json(&dir.join("summary.json"), summary)
}

/// Runs every combination of overrides concurrently on `jobs` threads and writes
/// `sweep.csv` and `sweep.json` under `out`.
///
/// Exit code: 2 if any configuration is invalid, else 3 if any solver failed,
/// else 4 if any monitor failed.
pub fn sweep(base: &RunConfig, vary: &[(String, Vec<String>)], jobs: usize, out: Option<&Path>) -> (i32, Vec<RunOutcome>) {
    let combos = crate::config::expand(vary);
    let configs: Vec<Result<RunConfig, String>> = combos
        .iter()
        .map(|assign| {
            let mut c = base.with_overrides(assign)?;
            if !assign.is_empty() {
                let tag: Vec<String> = assign.iter().map(|(k, v)| format!("{k}={v}")).collect();
                c.name = format!("{}-{}", base.name, tag.join("-")).replace(['/', '\\', ' ', '"'], "_");
            }
            Ok(c)
        })
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, c)| match c {
                Ok(c) => execute(c, out),
                Err(e) => RunOutcome {
                    name: format!("{}-{i}", base.name),
                    code: EXIT_CONFIG,
                    summary: None,
                    message: Some(e.clone()),
                    dir: None,
                },
            })
            .collect()
    });
    let code = [EXIT_CONFIG, EXIT_SOLVER, EXIT_MONITOR]
        .into_iter()
        .find(|c| outcomes.iter().any(|o| o.code == *c))
        .unwrap_or(EXIT_OK);
    if let Some(o) = out {
        if let Err(e) = write_sweep(o, &outcomes) {
            eprintln!("error: cannot write sweep summary: {e}");
            return (EXIT_SOLVER.max(code), outcomes);
        }
    }
    (code, outcomes)
}

#[derive(Serialize)]
struct SweepRow<'a> {
    name: &'a str,
    code: i32,
    message: Option<&'a str>,
    summary: Option<&'a RunSummary>,
}

fn write_sweep(out: &Path, outcomes: &[RunOutcome]) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    let mut csv = String::from(
        "name,code,alpha,epsilon,seed,T_star_hat,x_star_hat,holder_third_ratio,holder_above_slope,delta_T,forms_shock,tau_dot_exponent,final_distance,failed\n",
    );
    let num = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    for o in outcomes {
        let s = o.summary.as_ref();
        let cfg = s.map(|s| &s.config);
        let phys = s.and_then(|s| s.physical.as_ref());
        let ss = s.and_then(|s| s.selfsim.as_ref());
        let failed: Vec<&str> = s
            .map(|s| s.verdicts.iter().filter(|v| v.gated && !v.verdict.satisfied).map(|v| v.verdict.name.as_str()).collect())
            .unwrap_or_default();
        let cells = [
            csv_cell(&o.name),
            o.code.to_string(),
            num(cfg.map(|c| c.alpha)),
            num(cfg.map(|c| c.epsilon)),
            cfg.map_or(String::new(), |c| c.seed.to_string()),
            num(phys.and_then(|p| p.fit).map(|f| f.t_star_hat)),
            num(phys.and_then(|p| p.fit).map(|f| f.x_star_hat)),
            num(phys.and_then(|p| p.holder.as_ref()).map(|h| h.ratio_third)),
            num(phys.and_then(|p| p.holder.as_ref()).map(|h| h.slope_above)),
            num(phys.and_then(|p| p.perturbation.as_ref()).map(|q| q.delta_t)),
            phys.and_then(|p| p.perturbation.as_ref()).map_or(String::new(), |q| q.forms_shock.to_string()),
            num(ss.and_then(|x| x.tau_dot_exponent)),
            num(ss.and_then(|x| x.final_distance)),
            csv_cell(&failed.join(";")),
        ];
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    fs::write(out.join("sweep.csv"), csv)?;
    let rows: Vec<SweepRow> = outcomes
        .iter()
        .map(|o| SweepRow { name: &o.name, code: o.code, message: o.message.as_deref(), summary: o.summary.as_ref() })
        .collect();
    write_json(&out.join("sweep.json"), &rows)
}

/// One named pass/fail line of a verification report.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
}

impl Check {
    /// Passes when `value ≤ limit`.
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub checks: Vec<Check>,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl VerifyReport {
    fn new(command: &str, checks: Vec<Check>) -> Self {
        let failures: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
        Self { command: command.into(), passed: failures.is_empty(), checks, failures }
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed {
            EXIT_OK
        } else {
            EXIT_VERIFY
        }
    }
}

/// `10⁵` points spread evenly over `[-10⁴, 10⁴]`.
fn identity_points() -> Vec<f64> {
    let n = 100_000;
    (0..n).map(|i| -1e4 + 2e4 * i as f64 / (n - 1) as f64).collect()
}

/// Profile residuals, pointwise bounds and the Taylor jet at the origin.
///
/// `fault` evaluates every family member with the reciprocal scaling, a
/// deliberately wrong evaluator that the checks must reject.
pub fn verify_profiles(fault: bool) -> VerifyReport {
    let xs = identity_points();
    let mut checks = Vec::new();
    for nu in [6.0, 1.0, 3.0, 12.0] {
        let p = ProfileNu::new(nu).expect("positive parameter");
        let eval = |x: f64| {
            if fault {
                let lambda = (6.0 / nu).sqrt();
                shocklab::profiles::eval_psi(lambda * x) / lambda
            } else {
                p.eval(x)
            }
        };
        let worst = xs
            .iter()
            .map(|&x| {
                let psi = eval(x);
                (x + psi + nu / 6.0 * psi * psi * psi).abs() / japanese_bracket(x)
            })
            .fold(0.0, f64::max);
        checks.push(Check::at_most(format!("residual[nu={nu}]"), worst, 1e-10));
    }
    let bounds = verify_profile_bounds(&xs);
    for b in bounds.checks {
        checks.push(Check { name: format!("bound[{}]", b.name), passed: b.passed, value: b.max_ratio, limit: 1.0 });
    }
    let taylor = taylor_check();
    let worst_coeff = taylor
        .fitted
        .iter()
        .zip(&taylor.expected)
        .map(|(f, e)| if *e == 0.0 { f.abs() } else { ((f - e) / e).abs() })
        .fold(0.0, f64::max);
    checks.push(Check { name: "taylor_fit".into(), passed: taylor.passed, value: worst_coeff, limit: 1e-4 });
    let mut jet = ProfileNu::stable().jet(0.0);
    if fault {
        jet[3] *= 2.0;
    }
    for k in 0..5 {
        checks.push(Check::at_most(format!("jet_at_origin[{k}]"), (jet[k] - [0.0, -1.0, 0.0, 6.0, 0.0][k]).abs(), 1e-6));
    }
    VerifyReport::new("verify-profiles", checks)
}

/// Spectral against quadrature, adjointness, positivity, the interpolation
/// estimate and the far-field decay of the operator on the profile slope.
pub fn verify_fraclap(seed: u64) -> shocklab::Result<VerifyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks = Vec::new();
    let half_length = std::f64::consts::PI;
    let grid = Grid::new(4096, half_length)?;
    let points = [-1.1, -0.3, 0.4, 1.2];
    for a in [0.1, 0.25, 0.3] {
        let alpha = Alpha::new(a)?;
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let f = BumpField::random(half_length, 3, &mut rng);
            worst = worst.max(cross_validate(&f, grid, alpha, &points)?);
        }
        checks.push(Check::at_most(format!("spectral_vs_quadrature[alpha={a}]"), worst, 1e-6));
    }
    let small = Grid::new(256, std::f64::consts::PI)?;
    for a in [0.1, 0.25, 0.3, 0.4] {
        let alpha = Alpha::new(a)?;
        let mut adjoint: f64 = 0.0;
        let mut positivity = f64::INFINITY;
        let mut interp: f64 = 0.0;
        for _ in 0..100 {
            let f = random_band_limited(small, 40, &mut rng);
            let g = random_band_limited(small, 40, &mut rng);
            adjoint = adjoint.max(adjoint_defect(&f, &g, alpha));
            positivity = positivity.min(positivity_ratio(&f, alpha));
            let b = interpolation_bound(&f, alpha);
            interp = interp.max(b.lhs / b.rhs);
        }
        checks.push(Check::at_most(format!("adjoint[alpha={a}]"), adjoint, 1e-10));
        checks.push(Check::at_most(format!("positivity[alpha={a}]"), -positivity, 1e-10));
        checks.push(Check::at_most(format!("interpolation_ratio[alpha={a}]"), interp, 1.0));
    }
    for a in [0.1, 0.25, 0.3] {
        let alpha = Alpha::new(a)?;
        let pts = (0..=16)
            .map(|i| {
                let x = 10f64.powf(1.0 + 2.0 * i as f64 / 16.0);
                Ok((x.ln(), flap_psi_prime(alpha, x)?.abs().ln()))
            })
            .collect::<shocklab::Result<Vec<_>>>()?;
        let slope = linear_fit(&pts)?.0;
        checks.push(Check::at_most(format!("decay_slope[alpha={a}]"), (slope + 2.0 / 3.0 + 2.0 * a).abs(), 0.1));
    }
    Ok(VerifyReport::new("verify-fraclap", checks))
}

pub fn oracle_compare(cfg: &RunConfig) -> shocklab::Result<VerifyReport> {
    let o = &cfg.oracle;
    let rep = burgers_oracle_comparison(o.n, o.t)?;
    Ok(VerifyReport::new(
        "oracle-compare",
        vec![
            Check::at_most("characteristics_error", rep.max_error, o.tol),
            Check::at_most("blowup_time_error", (rep.t_star_hat - 1.0).abs(), 0.01),
        ],
    ))
}
