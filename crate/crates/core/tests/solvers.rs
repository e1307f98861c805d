//! Cross-formulation and convergence-order checks for the two solvers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shocklab::experiments::{SelfSimSetup, SelfSimStart, ShockSetup};
use shocklab::fraclap::random_band_limited;
use shocklab::grid::{Field, Grid};
use shocklab::oracle::eval_characteristics;
use shocklab::physical::{integrate, Model, RunControl};
use shocklab::selfsim::{from_selfsim, SelfSimConfig, SelfSimSolver, SelfSimState};

fn sup_diff(a: &Field, b: &Field) -> f64 {
    a.zip_map(b, |x, y| x - y).max_abs()
}

/// Error at `t = 1/2` of inviscid Burgers from `-sin x` on `n` points.
fn burgers_error(n: usize) -> f64 {
    let g = Grid::new(n, std::f64::consts::PI).unwrap();
    let u0 = g.sample(|x| -x.sin());
    // The resolution guard would stop the coarse grids early.
    let ctl = RunControl { tail_limit: 1.0, ..RunControl::default() };
    let trace = integrate(&u0, 0.0, &Model::fractal(None), &ctl, Some(0.5)).unwrap();
    let last = trace.snapshots.last().unwrap();
    assert_eq!(last.t, 0.5);
    let u = &last.u;
    let exact = |x: f64| -x.sin();
    (0..n)
        .map(|j| (u.values[j] - eval_characteristics(&exact, 0.5, g.x(j), 1e-14).unwrap()).abs())
        .fold(0.0, f64::max)
}

#[test]
fn halving_the_spacing_gains_an_order_of_magnitude() {
    let errors: Vec<f64> = [32, 64, 128].iter().map(|&n| burgers_error(n)).collect();
    for w in errors.windows(2) {
        assert!(w[1] <= 0.1 * w[0], "{errors:?}");
    }
}

/// `W` after `steps` fixed steps of size `span / steps`.
fn advance(solver: &SelfSimSolver, st: &SelfSimState, span: f64, steps: usize) -> SelfSimState {
    let ds = span / steps as f64;
    let mut st = st.clone();
    for _ in 0..steps {
        st = solver.step_selfsim(&st, ds).unwrap();
    }
    st
}

#[test]
fn self_similar_steps_converge_at_fourth_order() {
    // On a coarse grid the constraints drift by spatial truncation each step and the
    // renormalization turns that into a first-order splitting error; 1024 points keep
    // the drift near round-off so the Runge-Kutta order shows.
    let solver = SelfSimSolver::new(
        Grid::new(1024, 20.0).unwrap(),
        SelfSimConfig { alpha: Some(shocklab::fraclap::Alpha::new(0.2).unwrap()), ..SelfSimConfig::default() },
    );
    let mut st = solver.initial_state(6.0, 0.0, f64::INFINITY);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let bump = random_band_limited(st.w.grid, 5, &mut rng);
    st.w = st.w.zip_map(&bump, |w, b| w + 0.01 * b);
    let st = solver.renormalize(&st).unwrap();
    let base = solver.stable_ds(&st).unwrap();
    let span = 0.05;
    let steps = (span / base).ceil() as usize;
    let coarse = advance(&solver, &st, span, steps);
    let mid = advance(&solver, &st, span, 2 * steps);
    let fine = advance(&solver, &st, span, 4 * steps);
    let e1 = sup_diff(&coarse.w, &mid.w);
    let e2 = sup_diff(&mid.w, &fine.w);
    let ratio = e1 / e2;
    assert!((10.0..24.0).contains(&ratio), "errors {e1:e} {e2:e} ratio {ratio}");
}

#[test]
fn both_formulations_agree_on_the_same_datum() {
    let phys = ShockSetup::desk(0.2, 0.05);
    let selfsim = SelfSimSetup {
        alpha: 0.2,
        epsilon: 0.05,
        start: SelfSimStart::Epsilon,
        physical_half_length: Some(phys.half_length),
        s_len: 1.5,
        snapshot_every: 0.5,
        perturbation: 0.0,
        ..SelfSimSetup::convergence()
    };
    let run = selfsim.run().unwrap();
    let interior = selfsim.solver().unwrap().interior();
    assert_eq!(run.snapshots.len(), 4);
    let u0 = phys.initial_data().unwrap();
    let grid = phys.grid().unwrap();
    for st in &run.snapshots {
        let mapped = from_selfsim(st, grid);
        let trace = integrate(&u0, phys.start_time(), &phys.model().unwrap(), &phys.control, Some(mapped.t)).unwrap();
        let direct = &trace.snapshots.last().unwrap().u;
        assert!(direct.derivative(1).max_abs() <= 100.0 / phys.epsilon);
        // Both grids are periodic with different periods; compare where each one is
        // still a faithful picture of the line.
        let reach = 0.8 * phys.half_length.min(interior * (-1.5 * st.m.s).exp());
        let err = (0..grid.n())
            .filter(|&j| (grid.x(j) - st.m.xi).abs() <= reach)
            .map(|j| (direct.values[j] - mapped.u.values[j]).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-3, "s = {}: {err:e}", st.m.s);
    }
}

#[test]
fn rescaled_run_keeps_its_invariants() {
    let setup = SelfSimSetup { s_len: 2.0, ..SelfSimSetup::convergence() };
    let run = setup.run().unwrap();
    let first = run.records[0];
    for r in &run.records {
        assert!(r.res_w0.abs().max(r.res_w1.abs()).max(r.res_w2.abs()) <= 1e-8, "{r:?}");
        assert!((1.0..=1.5).contains(&r.beta_tau), "{r:?}");
        assert!(r.max_wy <= 2.0 * 1.1, "{r:?}");
        assert!((r.w3 - 6.0).abs() <= 1.0, "{r:?}");
        assert!(r.dnorms[5] <= 2.0 * first.dnorms[5], "sixth derivative grew: {r:?}");
    }
}
