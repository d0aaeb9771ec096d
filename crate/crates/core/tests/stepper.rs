use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use ssf_biofilm::fields::{FieldP0, VelocityP2c};
use ssf_biofilm::mesh::{build_structured_mesh, Rect};
use ssf_biofilm::physics::Params;
use ssf_biofilm::reactions::ReducedBiofilm;
use ssf_biofilm::scenarios::{ScenarioConfig, ScenarioKind, ViolationPolicy};
use ssf_biofilm::stepper::{Event, InvariantPolicy, StepOptions, Stepper};
use ssf_biofilm::stokes::VelocityBc;
use ssf_biofilm::transport::{Concentrations, TransportBc};
use ssf_biofilm::Error;

fn box_stepper(nx: usize, rates: (f64, f64), options: StepOptions) -> Stepper {
    let p = Params::default();
    let spec = ReducedBiofilm::with_rates(rates.0, rates.1).spec(p.rho_b, p.rho_f).unwrap();
    Stepper::new(
        build_structured_mesh(nx, nx, Rect::unit()).unwrap(),
        p,
        spec,
        VelocityBc::no_slip(),
        TransportBc::closed(),
        options,
    )
    .unwrap()
}

fn uniform(st: &Stepper, u: f64, s1: f64) -> Concentrations {
    let m = &st.mesh;
    Concentrations {
        u: FieldP0::constant(m, u),
        c: vec![FieldP0::constant(m, 0.3 * u), FieldP0::constant(m, 0.7 * u)],
        s: vec![
            FieldP0::constant(m, s1),
            FieldP0::constant(m, st.params.rho_f * (1.0 - u / st.params.rho_b) - s1),
        ],
    }
}

fn max_diff(a: &FieldP0, b: &FieldP0) -> f64 {
    a.values.iter().zip(&b.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn uniform_state_is_a_fixed_point() {
    let mut st = box_stepper(6, (0.0, 0.0), StepOptions::default());
    let init = st.initial_state(uniform(&st, 300.0, 100.0)).unwrap();
    let (next, rep) = st.time_step(&init, 1e-4).unwrap();
    assert!(max_diff(&next.conc.u, &init.conc.u) < 1e-9 * 300.0);
    for (a, b) in next.conc.c.iter().zip(&init.conc.c).chain(next.conc.s.iter().zip(&init.conc.s)) {
        assert!(max_diff(a, b) < 1e-9 * 1117.0);
    }
    assert_eq!(rep.violations, 0);
}

#[test]
fn biofilm_free_state_stays_biofilm_free() {
    let mut st = box_stepper(4, (100.0, 1000.0), StepOptions {
        enforce_cfl: false,
        ..StepOptions::default()
    });
    let mut state = st.initial_state(uniform(&st, 0.0, 400.0)).unwrap();
    let s0 = state.conc.s.clone();
    for _ in 0..100 {
        let (next, rep) = st.time_step(&state, 1e-4).unwrap();
        assert_eq!(rep.violations, 0);
        state = next;
    }
    assert_eq!(state.conc.u.max(), 0.0);
    assert!(state.conc.c.iter().all(|c| c.max() == 0.0 && c.min() == 0.0));
    for (a, b) in state.conc.s.iter().zip(&s0) {
        assert!(max_diff(a, b) < 1e-12 * 998.0);
    }
    assert_eq!(state.q.max_abs(), 0.0);
}

#[test]
fn closed_box_conserves_mass_and_hat_sums() {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::DiscsClose);
    cfg.resolution = 8;
    cfg.t_end = 5e-4;
    cfg.enforce_cfl = false;
    cfg.on_violation = ViolationPolicy::Record;
    cfg.snapshot_times.clear();
    let (mut st, init) = cfg.build().unwrap();
    let mut reports = Vec::new();
    st.run(init, cfg.dt, cfg.t_end, &[], |ev| {
        if let Event::Step(r) = ev {
            reports.push(r.clone());
        }
        Ok(())
    })
    .unwrap();
    assert_eq!(reports.len(), 6);
    let m0 = reports[0].mass_total;
    for r in &reports[1..] {
        assert!((r.mass_total - m0).abs() <= 1e-9 * m0);
        assert!(r.hat_sum_defect <= 1e-9 * 1117.0);
        assert!(r.sum_defect <= 1e-9 * 1117.0);
    }
}

#[test]
fn first_step_of_discs_far_converges_tightly() {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::DiscsFar);
    cfg.resolution = 32;
    let (mut st, init) = cfg.build().unwrap();
    st.options.newton.rtol = 0.0;
    let sol = st.newton_solve_coupled(&init, &init.q, 1e-4).unwrap();
    assert!(sol.residual < 1e-8, "{}", sol.residual);
    assert!(sol.iterations <= 15, "{}", sol.iterations);
}

#[test]
fn cfl_gate_rejects_large_steps() {
    let mut st = box_stepper(3, (100.0, 1000.0), StepOptions::default());
    let init = st.initial_state(uniform(&st, 300.0, 100.0)).unwrap();
    let bound = st.cfl_max_dt();
    assert!(matches!(st.time_step(&init, 2.0 * bound), Err(Error::StepRejected(_))));
    assert!(st.time_step(&init, 0.5 * bound).is_ok());
}

#[test]
fn abort_policy_surfaces_violations() {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::DiscsClose);
    cfg.resolution = 6;
    cfg.enforce_cfl = false;
    cfg.on_violation = ViolationPolicy::Abort;
    let (mut st, init) = cfg.build().unwrap();
    assert_eq!(st.options.policy, InvariantPolicy::Abort);
    match st.time_step(&init, 1e-4) {
        Err(Error::InvariantViolation { details, .. }) => assert!(details.contains("min s1"), "{details}"),
        other => panic!("expected a violation, got {other:?}"),
    }
}

#[test]
fn exhausted_retries_report_newton_failure() {
    let mut st = box_stepper(3, (0.0, 0.0), StepOptions::default());
    let mut conc = uniform(&st, 300.0, 100.0);
    conc.u.values[0] = 600.0;
    conc.c[0].values[0] = 300.0;
    conc.c[1].values[0] = 300.0;
    let init = st.initial_state(conc).unwrap();
    st.options.newton.max_iterations = 0;
    assert!(matches!(st.time_step(&init, 1e-4), Err(Error::NewtonDiverged { .. })));
    st.options.newton.max_iterations = 50;
    let (_, rep) = st.time_step(&init, 1e-4).unwrap();
    assert_eq!(rep.retries, 0);
}

#[test]
fn analytic_jacobian_matches_differences() {
    let st = box_stepper(3, (100.0, 1000.0), StepOptions::default());
    let p = st.params;
    let lay = st.layout();
    let mut rng = StdRng::seed_from_u64(17);
    let prev = uniform(&st, 300.0, 100.0);
    let mut worst = 0.0f64;
    let mut tried = 0;
    while tried < 10 {
        let mut x = vec![0.0; lay.len()];
        for (uo, co, so) in [
            (lay.u_hat(), [lay.c_hat(0), lay.c_hat(1)], [lay.s_hat(0), lay.s_hat(1)]),
            (lay.u(), [lay.c(0), lay.c(1)], [lay.s(0), lay.s(1)]),
        ] {
            for k in 0..lay.n {
                let u = p.rho_b * rng.gen_range(0.05..0.45);
                let f = rng.gen_range(0.2..0.8);
                x[uo + k] = u;
                x[co[0] + k] = f * u;
                x[co[1] + k] = (1.0 - f) * u;
                x[so[0] + k] = rng.gen_range(10.0..500.0);
                x[so[1] + k] = rng.gen_range(10.0..500.0);
            }
        }
        for v in 0..lay.m {
            x[lay.u_tilde() + v] = rng.gen_range(50.0..500.0);
            x[lay.mu() + v] = rng.gen_range(-1.0..1.0);
        }
        // Skip states where an edge gradient is close to an upwind switch.
        let st_edges = ssf_biofilm::transport::EdgeStencils::new(&st.mesh);
        let mu = &x[lay.mu()..];
        let g: Vec<f64> = (0..st_edges.entries.len()).map(|e| st_edges.apply(e, mu).abs()).collect();
        let gmax = g.iter().cloned().fold(0.0, f64::max);
        if g.iter().any(|v| *v < 1e-3 * gmax) {
            continue;
        }
        tried += 1;
        let q = VelocityP2c::interpolate(&st.mesh, |y| [y[1] - 0.5, 0.5 - y[0]]);
        let dt = 1e-4;
        let jac = st.jacobian(&prev, &q, dt, &x).to_dense();
        for j in 0..x.len() {
            let h = 1e-6 * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let fp = st.residual(&prev, &q, dt, &xp);
            xp[j] -= 2.0 * h;
            let fm = st.residual(&prev, &q, dt, &xp);
            for i in 0..x.len() {
                let scale = jac[i].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                worst = worst.max((fd - jac[i][j]).abs() / scale);
            }
        }
    }
    assert!(worst < 1e-5, "{worst:e}");
}
