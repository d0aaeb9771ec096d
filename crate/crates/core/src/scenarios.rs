//! Scenario presets, initial and boundary data, TOML configuration and the
//! top-level `run_simulation` driver.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::FieldP0;
use crate::io::{write_vtk, TimeSeriesWriter};
use crate::mesh::{build_ssf_mesh, build_structured_mesh, check_admissibility, Mesh, Rect};
use crate::physics::Params;
use crate::reactions::{cfl_max_dt, ReducedBiofilm};
use crate::stepper::{Event, InvariantPolicy, NewtonOptions, State, StepOptions, StepReport, Stepper};
use crate::stokes::VelocityBc;
use crate::transport::{Concentrations, TransportBc};

/// `phi0 (tanh((r0 - |x - x0|) / sqrt(2 kappa)) + 1) / 2`.
pub fn disc_profile(x: [f64; 2], x0: [f64; 2], r0: f64, phi0: f64, kappa: f64) -> f64 {
    let d = ((x[0] - x0[0]).powi(2) + (x[1] - x0[1]).powi(2)).sqrt();
    0.5 * phi0 * (((r0 - d) / (2.0 * kappa).sqrt()).tanh() + 1.0)
}

/// `phi0` strictly below `y0`, zero on and above it.
pub fn step_profile(x: [f64; 2], y0: f64, phi0: f64) -> f64 {
    if x[1] < y0 {
        phi0
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SsfGeometry {
    pub w: f64,
    pub l: f64,
    pub x_in: f64,
    pub w_in: f64,
    pub l_in: f64,
    pub q_max: f64,
    /// Inlet substrate concentration as a fraction of `rho_f`.
    pub s_in: f64,
}

impl Default for SsfGeometry {
    fn default() -> Self {
        Self {
            w: 0.5,
            l: 0.5,
            x_in: 0.1,
            w_in: 0.1,
            l_in: 0.025,
            q_max: 300.0,
            s_in: 0.99,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    Inlet,
    Outlet,
}

fn inlet_parabola(x: f64, g: &SsfGeometry) -> f64 {
    let (a, b) = (g.x_in - 0.5 * g.w_in, g.x_in + 0.5 * g.w_in);
    4.0 * g.q_max / (g.w_in * g.w_in) * (x - a) * (x - b)
}

fn outlet_parabola(x: f64, g: &SsfGeometry) -> f64 {
    4.0 * g.q_max / (g.w * g.w) * (g.w_in / g.w) * x * (x - g.w)
}

/// Vertical velocity of the parabolic inlet or outlet profile at abscissa `x`.
pub fn ssf_boundary_profiles(x: f64, segment: Segment, g: &SsfGeometry) -> Result<f64> {
    let (a, b) = match segment {
        Segment::Inlet => (g.x_in - 0.5 * g.w_in, g.x_in + 0.5 * g.w_in),
        Segment::Outlet => (0.0, g.w),
    };
    let tol = 1e-12 * g.w.max(1.0);
    if !(x >= a - tol && x <= b + tol) {
        return Err(Error::InvalidArgument(format!("x = {x} outside the {segment:?} segment [{a}, {b}]")));
    }
    Ok(match segment {
        Segment::Inlet => inlet_parabola(x, g),
        Segment::Outlet => outlet_parabola(x, g),
    })
}

impl SsfGeometry {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w > 0.0
            && self.l > 0.0
            && self.w_in > 0.0
            && self.l_in > 0.0
            && self.q_max >= 0.0
            && self.x_in - 0.5 * self.w_in >= 0.0
            && self.x_in + 0.5 * self.w_in <= self.w
            && (0.0..=1.0).contains(&self.s_in);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("inconsistent ssf geometry {self:?}")))
        }
    }

    pub fn velocity_bc(&self) -> VelocityBc {
        let (gi, go) = (*self, *self);
        VelocityBc {
            wall: Box::new(|_| [0.0, 0.0]),
            inlet: Some(Box::new(move |x| [0.0, inlet_parabola(x[0], &gi)])),
            outlet: Some(Box::new(move |x| [0.0, outlet_parabola(x[0], &go)])),
        }
    }
}

/// Building block of an initial volume fraction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Profile {
    Disc { center: [f64; 2], radius: f64, plateau: f64 },
    Step { height: f64, plateau: f64 },
}

impl Profile {
    pub fn eval(&self, x: [f64; 2], kappa: f64) -> f64 {
        match *self {
            Profile::Disc { center, radius, plateau } => disc_profile(x, center, radius, plateau, kappa),
            Profile::Step { height, plateau } => step_profile(x, height, plateau),
        }
    }
}

/// Volume fractions of `u`, `c1` and `s1`; `c2 = u - c1` and the water
/// fraction fills the liquid.
#[derive(Clone, Debug, PartialEq)]
pub struct InitialCondition {
    pub u: Vec<Profile>,
    pub c1: Vec<Profile>,
    pub s1: Vec<Profile>,
}

impl InitialCondition {
    pub fn discs(x_left: f64, x_right: f64) -> Self {
        let disc = |x: f64, y: f64, radius: f64, plateau: f64| Profile::Disc {
            center: [x, y],
            radius,
            plateau,
        };
        Self {
            u: vec![disc(x_left, 0.75, 0.2, 0.02), disc(x_right, 0.35, 0.2, 0.008)],
            c1: vec![disc(x_left, 0.75, 0.2, 0.01), disc(x_right, 0.35, 0.2, 0.002)],
            s1: vec![disc(0.5, 0.5, 0.25, 0.2)],
        }
    }

    pub fn ssf() -> Self {
        Self {
            u: vec![Profile::Step { height: 0.6, plateau: 0.05 }],
            c1: vec![Profile::Step { height: 0.6, plateau: 0.025 }],
            s1: vec![],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in self.u.iter().chain(&self.c1).chain(&self.s1) {
            let (plateau, ok) = match *p {
                Profile::Disc { radius, plateau, .. } => (plateau, radius > 0.0),
                Profile::Step { plateau, .. } => (plateau, true),
            };
            if !ok || !(0.0..=1.0).contains(&plateau) {
                return Err(Error::InvalidArgument(format!("invalid profile {p:?}")));
            }
        }
        Ok(())
    }

    /// Centroid evaluation on `mesh`.
    pub fn concentrations(&self, mesh: &Mesh, p: &Params) -> Result<Concentrations> {
        self.validate()?;
        let sum = |ps: &[Profile], x: [f64; 2]| ps.iter().map(|q| q.eval(x, p.kappa)).sum::<f64>();
        let u = FieldP0::from_fn(mesh, |x| p.rho_b * sum(&self.u, x));
        let c1 = FieldP0::from_fn(mesh, |x| p.rho_b * sum(&self.c1, x));
        let s1 = FieldP0::from_fn(mesh, |x| p.rho_f * sum(&self.s1, x));
        let c2 = FieldP0::new(u.values.iter().zip(&c1.values).map(|(a, b)| a - b).collect());
        let water = FieldP0::new(
            u.values
                .iter()
                .zip(&s1.values)
                .map(|(uk, sk)| p.rho_f * (1.0 - uk / p.rho_b) - sk)
                .collect(),
        );
        let conc = Concentrations {
            u,
            c: vec![c1, c2],
            s: vec![s1, water],
        };
        if conc.c.iter().chain(&conc.s).any(|f| f.min() < 0.0) || conc.u.max() > p.rho_b {
            return Err(Error::InvalidArgument("initial condition is not admissible".into()));
        }
        Ok(conc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    DiscsFar,
    DiscsClose,
    Ssf,
}

impl ScenarioKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioKind::DiscsFar => "discs_far",
            ScenarioKind::DiscsClose => "discs_close",
            ScenarioKind::Ssf => "ssf",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationPolicy {
    Abort,
    Record,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioKind,
    /// Cells per unit side of the box; for `ssf`, `h = w / resolution`.
    pub resolution: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_times: Vec<f64>,
    pub lumped: bool,
    pub enforce_cfl: bool,
    pub on_violation: ViolationPolicy,
    pub output_dir: PathBuf,
    pub params: Params,
    pub reactions: ReducedBiofilm,
    pub ssf: SsfGeometry,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::preset(ScenarioKind::DiscsFar)
    }
}

impl ScenarioConfig {
    pub fn preset(kind: ScenarioKind) -> Self {
        let base = Self {
            scenario: kind,
            resolution: 64,
            dt: 1e-4,
            t_end: 8e-3,
            snapshot_times: vec![0.0, 1e-3, 2e-3, 4e-3, 5e-3, 8e-3],
            lumped: true,
            enforce_cfl: true,
            on_violation: ViolationPolicy::Abort,
            output_dir: PathBuf::from("output"),
            params: Params::default(),
            reactions: ReducedBiofilm::default(),
            ssf: SsfGeometry::default(),
        };
        match kind {
            ScenarioKind::DiscsFar => base,
            ScenarioKind::DiscsClose => Self {
                reactions: ReducedBiofilm::with_rates(100.0, 1000.0),
                snapshot_times: vec![0.0, 2e-3, 6e-3, 8e-3],
                ..base
            },
            ScenarioKind::Ssf => Self {
                t_end: 9e-3,
                snapshot_times: vec![0.0, 1e-3, 3e-3, 6e-3, 9e-3],
                params: Params {
                    lambda: 150.0,
                    kappa: 1e-8,
                    eta: 1e-6,
                    ..Params::default()
                },
                reactions: ReducedBiofilm::with_rates(20.0, 100.0),
                ..base
            },
        }
    }

    /// Parses and validates TOML; keys left out take the preset values of the
    /// chosen scenario.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Like [`Self::from_toml_str`] without the final validation, for callers
    /// that apply overrides first.
    pub fn parse(text: &str) -> Result<Self> {
        // Typed pass: syntax, type and unknown-key errors carry line numbers.
        let typed: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let user: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut merged = toml::Value::try_from(Self::preset(typed.scenario))
            .map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut merged, toml::Value::Table(user));
        merged.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::load_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_unvalidated(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        self.params.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.reactions.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.resolution == 0 {
            return cfg("resolution must be at least 1".into());
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return cfg(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return cfg(format!("t_end must be non-negative, got {}", self.t_end));
        }
        if let Some(t) = self.snapshot_times.iter().find(|t| !(**t >= 0.0 && **t <= self.t_end * (1.0 + 1e-12))) {
            return cfg(format!("snapshot time {t} outside [0, t_end = {}]", self.t_end));
        }
        if self.scenario == ScenarioKind::Ssf {
            self.ssf.validate()?;
        }
        if self.enforce_cfl {
            let spec = self
                .reactions
                .spec(self.params.rho_b, self.params.rho_f)
                .map_err(|e| Error::Config(e.to_string()))?;
            let bound = cfl_max_dt(&spec, spec.kb());
            if self.dt > bound {
                let (lc, ls) = spec.lambda_bounds();
                return cfg(format!(
                    "dt = {:.3e} violates the reaction CFL bound min{{1/(max(Lambda_c, Lambda_s) R), eps/(k_b R_max)}} = {bound:.3e} \
                     (Lambda_c = {lc}, Lambda_s = {ls}, R = {:.3e}, eps = {:.3e}, R_max = {:.3e}); \
                     lower dt or set enforce_cfl = false",
                    self.dt, spec.bound_r, spec.epsilon, spec.bound_rmax
                ));
            }
        }
        Ok(())
    }

    pub fn step_options(&self) -> StepOptions {
        StepOptions {
            lumped: self.lumped,
            newton: NewtonOptions::default(),
            max_retries: 4,
            enforce_cfl: self.enforce_cfl,
            policy: match self.on_violation {
                ViolationPolicy::Abort => InvariantPolicy::Abort,
                ViolationPolicy::Record => InvariantPolicy::Record,
            },
        }
    }

    pub fn mesh(&self) -> Result<Mesh> {
        let mesh = match self.scenario {
            ScenarioKind::DiscsFar | ScenarioKind::DiscsClose => {
                build_structured_mesh(self.resolution, self.resolution, Rect::unit())?
            }
            ScenarioKind::Ssf => {
                let g = &self.ssf;
                build_ssf_mesh(g.w, g.l, g.x_in, g.w_in, g.l_in, g.w / self.resolution as f64)?
            }
        };
        check_admissibility(&mesh)?;
        Ok(mesh)
    }

    pub fn initial_condition(&self) -> InitialCondition {
        match self.scenario {
            ScenarioKind::DiscsFar => InitialCondition::discs(0.35, 0.65),
            ScenarioKind::DiscsClose => InitialCondition::discs(0.45, 0.55),
            ScenarioKind::Ssf => InitialCondition::ssf(),
        }
    }

    /// Stepper and initial state for this scenario.
    pub fn build(&self) -> Result<(Stepper, State)> {
        self.validate()?;
        let mesh = self.mesh()?;
        let p = self.params;
        let spec = self.reactions.spec(p.rho_b, p.rho_f)?;
        let conc = self.initial_condition().concentrations(&mesh, &p)?;
        let (vbc, tbc) = match self.scenario {
            ScenarioKind::Ssf => {
                let s1 = self.ssf.s_in * p.rho_f;
                (
                    self.ssf.velocity_bc(),
                    TransportBc {
                        substrate_inlet: Some(vec![s1, p.rho_f - s1]),
                    },
                )
            }
            _ => (VelocityBc::no_slip(), TransportBc::closed()),
        };
        let mut stepper = Stepper::new(mesh, p, spec, vbc, tbc, self.step_options())?;
        let state = stepper.initial_state(conc)?;
        Ok((stepper, state))
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

pub struct RunSummary {
    pub final_state: State,
    pub reports: Vec<StepReport>,
    pub snapshots: Vec<PathBuf>,
    pub csv: PathBuf,
}

/// Runs a configured scenario, writing VTK snapshots and a CSV time series
/// into `config.output_dir`.
pub fn run_simulation(config: &ScenarioConfig) -> Result<RunSummary> {
    let (mut stepper, init) = config.build()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = config.scenario.as_str();
    let csv = dir.join(format!("{name}_series.csv"));
    let mut series = TimeSeriesWriter::create(&csv, stepper.spec.kb(), stepper.spec.kf())?;
    let mut reports = Vec::new();
    let mut snapshots = Vec::new();
    let mesh = stepper.mesh.clone();
    let final_state = stepper.run(init, config.dt, config.t_end, &config.snapshot_times, |ev| {
        match ev {
            Event::Step(r) => {
                series.write(r)?;
                reports.push(r.clone());
            }
            Event::Snapshot(s) => {
                let path = dir.join(format!("{name}_{:04}.vtk", snapshots.len()));
                write_vtk(&path, &mesh, s)?;
                snapshots.push(path);
            }
        }
        Ok(())
    })?;
    Ok(RunSummary {
        final_state,
        reports,
        snapshots,
        csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_profile_values() {
        let k = 0.5e-8;
        assert!((disc_profile([0.55, 0.75], [0.35, 0.75], 0.2, 0.02, k) - 0.01).abs() < 1e-9);
        assert!(disc_profile([5.0, 5.0], [0.35, 0.75], 0.2, 0.02, k) < 1e-300);
        assert!((disc_profile([0.35, 0.75], [0.35, 0.75], 0.2, 0.02, k) - 0.02).abs() < 1e-12);
    }

    #[test]
    fn step_profile_values() {
        assert_eq!(step_profile([0.1, 0.6], 0.6, 0.05), 0.0);
        assert_eq!(step_profile([0.1, 0.59], 0.6, 0.05), 0.05);
        assert_eq!(step_profile([0.1, 0.1], 0.6, 0.0), 0.0);
    }

    #[test]
    fn profile_segments() {
        let g = SsfGeometry::default();
        assert!(ssf_boundary_profiles(0.05, Segment::Inlet, &g).unwrap().abs() < 1e-9);
        assert!((ssf_boundary_profiles(0.1, Segment::Inlet, &g).unwrap() + 300.0).abs() < 1e-9);
        assert!(ssf_boundary_profiles(0.3, Segment::Inlet, &g).is_err());
        assert_eq!(ssf_boundary_profiles(0.5, Segment::Outlet, &g).unwrap(), 0.0);
        assert!(ssf_boundary_profiles(-0.1, Segment::Outlet, &g).is_err());
    }

    #[test]
    fn empty_config_uses_defaults() {
        let c = ScenarioConfig::from_toml_str("").unwrap();
        assert_eq!(c, ScenarioConfig::preset(ScenarioKind::DiscsFar));
        assert_eq!(c.params, Params::default());
    }

    #[test]
    fn ssf_overrides_and_user_values() {
        let c = ScenarioConfig::from_toml_str("scenario = \"ssf\"\nresolution = 10\nenforce_cfl = false\n[params]\neta = 2e-6\n").unwrap();
        assert_eq!(c.params.lambda, 150.0);
        assert_eq!(c.params.kappa, 1e-8);
        assert_eq!(c.params.eta, 2e-6);
        assert_eq!(c.ssf.q_max, 300.0);
        assert_eq!(c.resolution, 10);
        assert_eq!(c.reactions.r1, 20.0);
        let e = ScenarioConfig::from_toml_str("scenario = \"ssf\"").unwrap_err();
        assert!(e.to_string().contains("CFL"), "{e}");
    }

    #[test]
    fn errors_mention_lines() {
        let e = ScenarioConfig::from_toml_str("dt = 1e-6\n\n[params]\nlambdaa = 3\n").unwrap_err();
        assert!(e.to_string().contains("line 4"), "{e}");
        let e = ScenarioConfig::from_toml_str("dt = \"x\"\n").unwrap_err();
        assert!(e.to_string().contains("line 1"), "{e}");
    }
}
