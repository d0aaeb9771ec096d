use proptest::prelude::*;

use ssf_biofilm::io::{interface_contour, read_vtk, write_vtk};
use ssf_biofilm::physics::Params;
use ssf_biofilm::quadrature::segment_gauss2;
use ssf_biofilm::reactions::ReducedBiofilm;
use ssf_biofilm::scenarios::{
    disc_profile, run_simulation, ssf_boundary_profiles, step_profile, ScenarioConfig, ScenarioKind, Segment,
    SsfGeometry, ViolationPolicy,
};
use ssf_biofilm::Error;

fn small(kind: ScenarioKind) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::preset(kind);
    cfg.resolution = 6;
    cfg
}

#[test]
fn empty_config_gives_reference_parameters() {
    let cfg = ScenarioConfig::from_toml_str("").unwrap();
    assert_eq!(cfg.scenario, ScenarioKind::DiscsFar);
    let p = cfg.params;
    let expected = [
        (p.rho_b, 1117.0),
        (p.rho_f, 998.0),
        (p.lambda, 200.0),
        (p.kappa, 0.5e-8),
        (p.phi_star, 0.01),
        (p.gamma, 0.0),
        (p.eta, 1e-4),
        (p.nu_b, 1e-3),
        (p.nu_f, 1.0),
        (p.g, 9.81),
        (cfg.reactions.k11, 2e-2),
        (cfg.reactions.k21, 2e-2),
        (cfg.reactions.k12, 1e-2),
        (cfg.reactions.k22, 4e-2),
    ];
    for (got, want) in expected {
        assert_eq!(got, want);
    }
}

#[test]
fn ssf_scenario_overrides() {
    let cfg = ScenarioConfig::from_toml_str("scenario = \"ssf\"\nenforce_cfl = false\n").unwrap();
    assert_eq!((cfg.params.lambda, cfg.params.kappa, cfg.params.eta), (150.0, 1e-8, 1e-6));
    assert_eq!(cfg.ssf, SsfGeometry::default());
    assert_eq!((cfg.ssf.w, cfg.ssf.l, cfg.ssf.x_in, cfg.ssf.w_in, cfg.ssf.l_in), (0.5, 0.5, 0.1, 0.1, 0.025));
    assert_eq!((cfg.ssf.q_max, cfg.ssf.s_in), (300.0, 0.99));
    assert_eq!((cfg.reactions.r1, cfg.reactions.r2), (20.0, 100.0));
    // a partial [params] table keeps the scenario values for the other keys
    let cfg = ScenarioConfig::from_toml_str("scenario = \"ssf\"\nenforce_cfl = false\n[params]\ngamma = 1.0\n").unwrap();
    assert_eq!((cfg.params.gamma, cfg.params.lambda), (1.0, 150.0));
}

#[test]
fn cfl_violation_names_the_bound() {
    let err = ScenarioConfig::from_toml_str("scenario = \"discs_close\"\n").unwrap_err();
    let msg = err.to_string();
    assert!(matches!(err, Error::Config(_)));
    assert!(msg.contains("CFL") && msg.contains("1.791e-8"), "{msg}");
}

#[test]
fn bad_values_report_their_line() {
    let err = ScenarioConfig::from_toml_str("dt = 1e-4\nresolution = \"many\"\n").unwrap_err();
    assert!(err.to_string().contains("line 2"), "{err}");
    let err = ScenarioConfig::from_toml_str("[params]\nrho_b = 1.0\nbogus = 2\n").unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}

fn config_strategy() -> impl Strategy<Value = ScenarioConfig> {
    (
        prop_oneof![Just(ScenarioKind::DiscsFar), Just(ScenarioKind::DiscsClose), Just(ScenarioKind::Ssf)],
        1usize..200,
        1e-9f64..1e-3,
        0.0f64..2.0,
        any::<bool>(),
        any::<bool>(),
        (0.0f64..500.0, 0.0f64..5000.0),
        (0.0f64..2.0, 1.0f64..500.0, 0.5f64..1.0),
    )
        .prop_map(|(kind, res, dt, gamma, lumped, record, (r1, r2), (extra, q_max, s_in))| {
            let mut c = ScenarioConfig::preset(kind);
            c.resolution = res;
            c.dt = dt;
            c.t_end = dt * 10.0;
            c.snapshot_times = vec![0.0, dt * 3.0];
            c.params.gamma = gamma;
            c.params.eta *= 1.0 + extra;
            c.lumped = lumped;
            c.enforce_cfl = false;
            c.on_violation = if record { ViolationPolicy::Record } else { ViolationPolicy::Abort };
            c.reactions = ReducedBiofilm { r1, r2, ..ReducedBiofilm::default() };
            c.ssf.q_max = q_max;
            c.ssf.s_in = s_in;
            c
        })
}

proptest! {
    #[test]
    fn config_round_trip_is_identity(cfg in config_strategy()) {
        let text = cfg.to_toml_string().unwrap();
        let back = ScenarioConfig::from_toml_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        prop_assert_eq!(back.to_toml_string().unwrap(), text);
    }

    #[test]
    fn parabolas_carry_equal_flux(q_max in 0.0f64..1e3, w in 0.05f64..5.0, frac in 0.01f64..1.0, pos in 0.0f64..1.0) {
        let w_in = frac * w;
        let x_in = 0.5 * w_in + pos * (w - w_in);
        let g = SsfGeometry { w, x_in, w_in, q_max, ..SsfGeometry::default() };
        let integrate = |seg, a: f64, b: f64| -> f64 {
            segment_gauss2().iter().map(|&(t, wt)| wt * (b - a) * ssf_boundary_profiles(a + t * (b - a), seg, &g).unwrap()).sum()
        };
        let qi = integrate(Segment::Inlet, x_in - 0.5 * w_in, x_in + 0.5 * w_in);
        let qo = integrate(Segment::Outlet, 0.0, w);
        let exact = -2.0 / 3.0 * q_max * w_in;
        let tol = 1e-12 * exact.abs().max(f64::MIN_POSITIVE);
        prop_assert!((qi - exact).abs() <= tol, "{} vs {}", qi, exact);
        prop_assert!((qo - exact).abs() <= tol, "{} vs {}", qo, exact);
    }
}

#[test]
fn profile_endpoints_and_peaks() {
    let g = SsfGeometry::default();
    assert!(ssf_boundary_profiles(0.05, Segment::Inlet, &g).unwrap().abs() < 1e-9);
    assert!(ssf_boundary_profiles(0.15, Segment::Inlet, &g).unwrap().abs() < 1e-9);
    assert!((ssf_boundary_profiles(0.1, Segment::Inlet, &g).unwrap() + 300.0).abs() < 1e-9);
    assert_eq!(ssf_boundary_profiles(0.0, Segment::Outlet, &g).unwrap(), 0.0);
    assert!(ssf_boundary_profiles(0.2, Segment::Inlet, &g).is_err());
    assert!(ssf_boundary_profiles(-0.1, Segment::Outlet, &g).is_err());
}

#[test]
fn initial_profiles() {
    let kappa = 0.5e-8;
    assert!((disc_profile([0.55, 0.75], [0.35, 0.75], 0.2, 0.02, kappa) - 0.01).abs() < 1e-9);
    assert!((disc_profile([0.35, 0.75], [0.35, 0.75], 0.2, 0.02, kappa) - 0.02).abs() < 1e-15);
    assert_eq!(disc_profile([5.0, 5.0], [0.35, 0.75], 0.2, 0.02, kappa), 0.0);
    assert_eq!(step_profile([0.3, 0.6], 0.6, 0.05), 0.0);
    assert_eq!(step_profile([0.3, 0.59], 0.6, 0.05), 0.05);
}

#[test]
fn vtk_round_trip_and_interface() {
    let dir = tempfile::tempdir().unwrap();
    let (stepper, state) = small(ScenarioKind::DiscsFar).build().unwrap();
    let path = dir.path().join("s.vtk");
    write_vtk(&path, &stepper.mesh, &state).unwrap();
    let back = read_vtk(&path).unwrap();
    assert_eq!(back.cells.len(), stepper.mesh.num_cells());
    let check = |a: &[f64], b: &[f64]| {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1.0));
        }
    };
    check(&back.cell_scalars["u"], &state.conc.u.values);
    check(&back.cell_scalars["c2"], &state.conc.c[1].values);
    check(&back.cell_scalars["s1"], &state.conc.s[0].values);
    check(&back.cell_scalars["p"], &state.p.values);
    check(&back.point_scalars["u_tilde"], &state.u_tilde.values);
    check(&back.point_scalars["mu"], &state.mu.values);
    let q = &back.point_vectors["q"];
    for (a, b) in q.iter().zip(&state.q.values) {
        assert!((a[0] - b[0]).abs() <= 1e-12 * b[0].abs().max(1.0));
    }
    let names: Vec<&String> = back.cell_scalars.keys().collect();
    assert_eq!(names, ["c1", "c2", "p", "s1", "s2", "u"]);
    assert!(!interface_contour(&stepper.mesh, &back.point_scalars["u_tilde"]).is_empty());
}

#[test]
fn run_writes_one_row_per_step_plus_initial() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small(ScenarioKind::Ssf);
    cfg.resolution = 10;
    cfg.t_end = 4e-4;
    cfg.snapshot_times = vec![0.0, 2e-4, 4e-4];
    cfg.enforce_cfl = false;
    cfg.on_violation = ViolationPolicy::Record;
    cfg.output_dir = dir.path().to_path_buf();
    let summary = run_simulation(&cfg).unwrap();
    assert_eq!(summary.reports.len(), 5);
    let text = std::fs::read_to_string(&summary.csv).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    assert_eq!(&header[0], "step");
    assert!(header.iter().any(|h| h == "mass_total"));
    assert_eq!(rdr.records().count(), 5);
    assert_eq!(summary.snapshots.len(), 3);
    for s in &summary.snapshots {
        assert!(s.exists());
    }
    // the driver's output is deterministic
    let dir2 = tempfile::tempdir().unwrap();
    cfg.output_dir = dir2.path().to_path_buf();
    let again = run_simulation(&cfg).unwrap();
    assert_eq!(std::fs::read_to_string(&again.csv).unwrap(), text);
}

#[test]
fn default_params_validate() {
    assert!(Params::default().validate().is_ok());
    assert!(Params { rho_b: -1.0, ..Params::default() }.validate().is_err());
}
