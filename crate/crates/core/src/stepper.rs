//! Time stepping: lagged Stokes solve, coupled Newton solve of the transport,
//! reaction, projection and potential equations, invariant monitoring and
//! the outer loop.
//!
//! Newton unknowns are stacked as `(u_hat, c_hat, s_hat, c, s, u, u_tilde, mu)`,
//! see [`Layout`]. Transport rows are scaled by `dt / |K|` and the P1 rows by
//! the inverse lumped mass, so every residual has the units of its unknown.

use crate::error::{Error, Result};
use crate::fields::{lumped_mass, p1_mass_matrix, p1_stiffness_matrix, project_p0_to_p1, FieldP0, FieldP1c, PressureP0, VelocityP2c};
use crate::mesh::{BoundaryTag, Mesh};
use crate::physics::{body_force, potential_derivative, potential_second_derivative, Params};
use crate::potential::mu_solve;
use crate::reactions::{cfl_max_dt, ReactionSpec};
use crate::sparse::{CsrMatrix, SparseLu};
use crate::stokes::{assemble_stokes, divergence_check, Force, StokesSolver, VelocityBc};
use crate::transport::{ch_flux_jet, solid_flux_jet, substrate_flux_jet, Concentrations, ConvectiveFluxes, EdgeStencils, FluxJet, TransportBc};

#[derive(Clone, Debug)]
pub struct State {
    pub t: f64,
    pub conc: Concentrations,
    pub u_tilde: FieldP1c,
    pub mu: FieldP1c,
    pub q: VelocityP2c,
    pub p: PressureP0,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvariantPolicy {
    /// Fail the step with [`Error::InvariantViolation`].
    Abort,
    /// Count violations in the report and keep going.
    Record,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub atol: f64,
    pub rtol: f64,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            atol: 1e-8,
            rtol: 1e-8,
            max_halvings: 10,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepOptions {
    pub lumped: bool,
    pub newton: NewtonOptions,
    /// Number of times a failed step may be split in half.
    pub max_retries: usize,
    /// Reject steps above the reaction CFL bound.
    pub enforce_cfl: bool,
    pub policy: InvariantPolicy,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            lumped: true,
            newton: NewtonOptions::default(),
            max_retries: 4,
            enforce_cfl: true,
            policy: InvariantPolicy::Abort,
        }
    }
}

/// Offsets of the blocks of the Newton unknown vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Layout {
    pub n: usize,
    pub m: usize,
    pub kb: usize,
    pub kf: usize,
}

impl Layout {
    pub fn len(&self) -> usize {
        self.n * (2 + 2 * self.kb + 2 * self.kf) + 2 * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn u_hat(&self) -> usize {
        0
    }

    pub fn c_hat(&self, i: usize) -> usize {
        self.n * (1 + i)
    }

    pub fn s_hat(&self, j: usize) -> usize {
        self.n * (1 + self.kb + j)
    }

    pub fn c(&self, i: usize) -> usize {
        self.n * (1 + self.kb + self.kf + i)
    }

    pub fn s(&self, j: usize) -> usize {
        self.n * (1 + 2 * self.kb + self.kf + j)
    }

    pub fn u(&self) -> usize {
        self.n * (1 + 2 * self.kb + 2 * self.kf)
    }

    pub fn u_tilde(&self) -> usize {
        self.u() + self.n
    }

    pub fn mu(&self) -> usize {
        self.u_tilde() + self.m
    }

    /// Name of the block holding unknown `idx`.
    pub fn block_name(&self, idx: usize) -> String {
        let n = self.n;
        if idx < self.u_tilde() {
            let b = idx / n;
            let (kb, kf) = (self.kb, self.kf);
            return match b {
                0 => "u_hat".into(),
                b if b <= kb => format!("c_hat{}", b),
                b if b <= kb + kf => format!("s_hat{}", b - kb),
                b if b <= 2 * kb + kf => format!("c{}", b - kb - kf),
                b if b <= 2 * kb + 2 * kf => format!("s{}", b - 2 * kb - kf),
                _ => "u".into(),
            };
        }
        if idx < self.mu() {
            "u_tilde".into()
        } else {
            "mu".into()
        }
    }
}

/// Converged unknowns of one coupled solve.
#[derive(Clone, Debug)]
pub struct CoupledSolution {
    pub hats: Concentrations,
    pub next: Concentrations,
    pub u_tilde: FieldP1c,
    pub mu: FieldP1c,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepReport {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub newton_iterations: usize,
    pub residual: f64,
    pub retries: usize,
    pub u_min: f64,
    pub u_max: f64,
    pub c_min: Vec<f64>,
    pub c_max: Vec<f64>,
    pub s_min: Vec<f64>,
    pub s_max: Vec<f64>,
    pub mass_u: f64,
    pub mass_c: Vec<f64>,
    pub mass_s: Vec<f64>,
    /// `int (u + sum s)`.
    pub mass_total: f64,
    /// `max |sum c - u|`.
    pub sum_defect: f64,
    /// `max |sum c_hat - u_hat|` of the last coupled solve.
    pub hat_sum_defect: f64,
    pub divergence: f64,
    /// CFL bound divided by `dt`.
    pub cfl_margin: f64,
    pub clamped: usize,
    pub violations: usize,
}

impl StepReport {
    pub fn csv_header(kb: usize, kf: usize) -> Vec<String> {
        let mut h: Vec<String> = ["step", "t", "dt", "newton_iterations", "residual", "retries", "u_min", "u_max"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        for i in 1..=kb {
            h.push(format!("c{i}_min"));
            h.push(format!("c{i}_max"));
        }
        for j in 1..=kf {
            h.push(format!("s{j}_min"));
            h.push(format!("s{j}_max"));
        }
        h.push("mass_u".into());
        h.extend((1..=kb).map(|i| format!("mass_c{i}")));
        h.extend((1..=kf).map(|j| format!("mass_s{j}")));
        for s in ["mass_total", "sum_defect", "hat_sum_defect", "divergence", "cfl_margin", "clamped", "violations"] {
            h.push(s.into());
        }
        h
    }

    pub fn csv_record(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        let mut r = vec![
            self.step.to_string(),
            f(self.t),
            f(self.dt),
            self.newton_iterations.to_string(),
            f(self.residual),
            self.retries.to_string(),
            f(self.u_min),
            f(self.u_max),
        ];
        for (a, b) in self.c_min.iter().zip(&self.c_max) {
            r.push(f(*a));
            r.push(f(*b));
        }
        for (a, b) in self.s_min.iter().zip(&self.s_max) {
            r.push(f(*a));
            r.push(f(*b));
        }
        r.push(f(self.mass_u));
        r.extend(self.mass_c.iter().map(|v| f(*v)));
        r.extend(self.mass_s.iter().map(|v| f(*v)));
        r.push(f(self.mass_total));
        r.push(f(self.sum_defect));
        r.push(f(self.hat_sum_defect));
        r.push(f(self.divergence));
        r.push(f(self.cfl_margin));
        r.push(self.clamped.to_string());
        r.push(self.violations.to_string());
        r
    }
}

fn max_sum_defect(c: &[FieldP0], u: &FieldP0) -> f64 {
    (0..u.len())
        .map(|k| (c.iter().map(|f| f.values[k]).sum::<f64>() - u.values[k]).abs())
        .fold(0.0, f64::max)
}

/// Violations of `c >= 0`, `s >= 0`, `0 <= u <= rho_b`, `sum c = u`, each
/// with tolerance `1e-9 rho_b`.
pub fn check_invariants(conc: &Concentrations, rho_b: f64) -> Vec<String> {
    let tol = 1e-9 * rho_b;
    let mut out = Vec::new();
    for (i, c) in conc.c.iter().enumerate() {
        if c.min() < -tol {
            out.push(format!("min c{} = {:.6e}", i + 1, c.min()));
        }
    }
    for (j, s) in conc.s.iter().enumerate() {
        if s.min() < -tol {
            out.push(format!("min s{} = {:.6e}", j + 1, s.min()));
        }
    }
    if conc.u.min() < -tol {
        out.push(format!("min u = {:.6e}", conc.u.min()));
    }
    if conc.u.max() > rho_b + tol {
        out.push(format!("max u = {:.6e} exceeds rho_b", conc.u.max()));
    }
    let d = max_sum_defect(&conc.c, &conc.u);
    if d > tol {
        out.push(format!("max |sum c - u| = {d:.6e}"));
    }
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Total,
    Solid,
    Substrate,
}

pub enum Event<'a> {
    Snapshot(&'a State),
    Step(&'a StepReport),
}

pub struct Stepper {
    pub mesh: Mesh,
    pub params: Params,
    pub spec: ReactionSpec,
    pub velocity_bc: VelocityBc,
    pub transport_bc: TransportBc,
    pub options: StepOptions,
    stencils: EdgeStencils,
    mass: CsrMatrix,
    projection_mass: CsrMatrix,
    lumped: Vec<f64>,
    stiffness: CsrMatrix,
    stokes: StokesSolver,
    newton_lu: SparseLu,
}

impl Stepper {
    pub fn new(
        mesh: Mesh,
        params: Params,
        spec: ReactionSpec,
        velocity_bc: VelocityBc,
        transport_bc: TransportBc,
        options: StepOptions,
    ) -> Result<Self> {
        params.validate()?;
        transport_bc.check(&mesh, spec.kf())?;
        let stencils = EdgeStencils::new(&mesh);
        let mass = p1_mass_matrix(&mesh, false);
        let projection_mass = p1_mass_matrix(&mesh, options.lumped);
        let lumped = lumped_mass(&mesh);
        let mut stiffness = p1_stiffness_matrix(&mesh);
        let scale = params.kappa / params.rho_b;
        stiffness.values.iter_mut().for_each(|v| *v *= scale);
        Ok(Self {
            mesh,
            params,
            spec,
            velocity_bc,
            transport_bc,
            options,
            stencils,
            mass,
            projection_mass,
            lumped,
            stiffness,
            stokes: StokesSolver::new(),
            newton_lu: SparseLu::new(),
        })
    }

    pub fn layout(&self) -> Layout {
        Layout {
            n: self.mesh.num_cells(),
            m: self.mesh.num_vertices(),
            kb: self.spec.kb(),
            kf: self.spec.kf(),
        }
    }

    pub fn cfl_max_dt(&self) -> f64 {
        cfl_max_dt(&self.spec, self.spec.kb())
    }

    fn check_conc(&self, conc: &Concentrations) -> Result<()> {
        conc.check(&self.mesh)?;
        if conc.kb() != self.spec.kb() || conc.kf() != self.spec.kf() {
            return Err(Error::InvalidArgument(format!(
                "state has {} solids and {} substrates, the reaction spec {} and {}",
                conc.kb(),
                conc.kf(),
                self.spec.kb(),
                self.spec.kf()
            )));
        }
        Ok(())
    }

    /// Lagged Stokes solve from `(u, u_tilde)`; returns the clamp count too.
    pub fn solve_flow(&mut self, u: &FieldP0, u_tilde: &FieldP1c) -> Result<(VelocityP2c, PressureP0, usize)> {
        let f = body_force(u, u_tilde, &self.mesh, &self.params);
        let sys = assemble_stokes(u, Force::Cellwise(&f.values), &self.mesh, &self.params, &self.velocity_bc)?;
        let (q, p) = self.stokes.solve(&sys)?;
        Ok((q, p, f.clamped + sys.clamped))
    }

    /// Completes initial concentrations with `u_tilde`, `mu`, `q` and `p`.
    pub fn initial_state(&mut self, conc: Concentrations) -> Result<State> {
        self.check_conc(&conc)?;
        let u_tilde = project_p0_to_p1(&conc.u, &self.mesh, self.options.lumped)?;
        let mu = mu_solve(&conc.u, &u_tilde, &self.mesh, &self.params)?;
        let (q, p, _) = self.solve_flow(&conc.u, &u_tilde)?;
        Ok(State {
            t: 0.0,
            conc,
            u_tilde,
            mu,
            q,
            p,
        })
    }

    /// Packs a state into the Newton unknown vector, using the state values
    /// for the hatted blocks as well.
    pub fn pack(&self, state: &State) -> Vec<f64> {
        let lay = self.layout();
        let mut x = vec![0.0; lay.len()];
        let c = &state.conc;
        let n = lay.n;
        let put = |x: &mut [f64], off: usize, v: &[f64]| x[off..off + v.len()].copy_from_slice(v);
        put(&mut x, lay.u_hat(), &c.u.values);
        put(&mut x, lay.u(), &c.u.values);
        for i in 0..lay.kb {
            put(&mut x, lay.c_hat(i), &c.c[i].values);
            put(&mut x, lay.c(i), &c.c[i].values);
        }
        for j in 0..lay.kf {
            put(&mut x, lay.s_hat(j), &c.s[j].values);
            put(&mut x, lay.s(j), &c.s[j].values);
        }
        put(&mut x, lay.u_tilde(), &state.u_tilde.values);
        put(&mut x, lay.mu(), &state.mu.values);
        debug_assert_eq!(lay.mu() + lay.m, x.len());
        debug_assert!(n == 0 || lay.u() + n == lay.u_tilde());
        x
    }

    pub fn unpack(&self, x: &[f64], iterations: usize, residual: f64) -> CoupledSolution {
        let lay = self.layout();
        let n = lay.n;
        let f = |off: usize| FieldP0::new(x[off..off + n].to_vec());
        CoupledSolution {
            hats: Concentrations {
                u: f(lay.u_hat()),
                c: (0..lay.kb).map(|i| f(lay.c_hat(i))).collect(),
                s: (0..lay.kf).map(|j| f(lay.s_hat(j))).collect(),
            },
            next: Concentrations {
                u: f(lay.u()),
                c: (0..lay.kb).map(|i| f(lay.c(i))).collect(),
                s: (0..lay.kf).map(|j| f(lay.s(j))).collect(),
            },
            u_tilde: FieldP1c::new(x[lay.u_tilde()..lay.u_tilde() + lay.m].to_vec()),
            mu: FieldP1c::new(x[lay.mu()..lay.mu() + lay.m].to_vec()),
            iterations,
            residual,
        }
    }

    /// Residual of the coupled system at `x`.
    pub fn residual(&self, prev: &Concentrations, q: &VelocityP2c, dt: f64, x: &[f64]) -> Vec<f64> {
        let conv = ConvectiveFluxes::from_velocity(q, &self.mesh);
        self.evaluate(prev, &conv, dt, x, None)
    }

    /// Analytic Jacobian of [`Self::residual`] at `x`.
    pub fn jacobian(&self, prev: &Concentrations, q: &VelocityP2c, dt: f64, x: &[f64]) -> CsrMatrix {
        let conv = ConvectiveFluxes::from_velocity(q, &self.mesh);
        let mut trip = Vec::new();
        self.evaluate(prev, &conv, dt, x, Some(&mut trip));
        let n = self.layout().len();
        CsrMatrix::from_triplets(n, n, &trip)
    }

    fn evaluate(
        &self,
        prev: &Concentrations,
        conv: &ConvectiveFluxes,
        dt: f64,
        x: &[f64],
        mut jac: Option<&mut Vec<(usize, usize, f64)>>,
    ) -> Vec<f64> {
        let lay = self.layout();
        let (n, m, kb, kf) = (lay.n, lay.m, lay.kb, lay.kf);
        let mesh = &self.mesh;
        let p = &self.params;
        let mut f = vec![0.0; lay.len()];
        let want_jac = jac.is_some();
        let mut push = |i: usize, j: usize, v: f64| {
            if let Some(t) = jac.as_deref_mut() {
                t.push((i, j, v));
            }
        };

        // Transport rows: (x_hat - x_prev) + dt / |K| * outgoing flux.
        let mut blocks: Vec<(Kind, usize, &[f64])> = vec![(Kind::Total, lay.u_hat(), &prev.u.values)];
        blocks.extend((0..kb).map(|i| (Kind::Solid, lay.c_hat(i), prev.c[i].values.as_slice())));
        blocks.extend((0..kf).map(|j| (Kind::Substrate, lay.s_hat(j), prev.s[j].values.as_slice())));
        for &(_, off, old) in &blocks {
            for k in 0..n {
                f[off + k] = x[off + k] - old[k];
                push(off + k, off + k, 1.0);
            }
        }
        let uh = &x[lay.u_hat()..lay.u_hat() + n];
        let mu = &x[lay.mu()..lay.mu() + m];
        for (slot, ie) in mesh.interior_edges.iter().enumerate() {
            let (e, k, l) = (ie.edge, ie.k, ie.l);
            let len = mesh.edge_lengths[e];
            let (qp, qm) = (conv.plus[e], conv.minus[e]);
            let g = self.stencils.apply(slot, mu);
            let (sk, sl) = (dt / mesh.cell_areas[k], dt / mesh.cell_areas[l]);
            for &(kind, off, _) in &blocks {
                let (a, b) = (x[off + k], x[off + l]);
                let (jet, sign): (FluxJet, f64) = match kind {
                    Kind::Total => (ch_flux_jet(a, b, -g, p), -1.0),
                    Kind::Solid => (solid_flux_jet(a, b, -g, uh[k], uh[l], p), -1.0),
                    Kind::Substrate => (substrate_flux_jet(a, b, g, uh[k], uh[l], p), 1.0),
                };
                let d_beta = jet.d_beta;
                let flux = qp * a - qm * b + len * jet.value;
                f[off + k] += sk * flux;
                f[off + l] -= sl * flux;
                let da = qp + len * jet.d_k;
                let db = -qm + len * jet.d_l;
                for (row, s) in [(off + k, sk), (off + l, -sl)] {
                    push(row, off + k, s * da);
                    push(row, off + l, s * db);
                    if kind != Kind::Total {
                        push(row, lay.u_hat() + k, s * len * jet.d_uk);
                        push(row, lay.u_hat() + l, s * len * jet.d_ul);
                    }
                    for &(v, w) in &self.stencils.entries[slot] {
                        push(row, lay.mu() + v, s * len * d_beta * sign * w);
                    }
                }
            }
        }
        for be in &mesh.boundary_edges {
            let (e, k) = (be.edge, be.cell);
            let (qp, qm) = (conv.plus[e], conv.minus[e]);
            let sk = dt / mesh.cell_areas[k];
            for j in 0..kf {
                let off = lay.s_hat(j);
                let sv = x[off + k];
                let (flux, d) = match be.tag {
                    BoundaryTag::Wall => continue,
                    BoundaryTag::Outlet => ((qp - qm) * sv, qp - qm),
                    BoundaryTag::Inlet => {
                        let s_in = self.transport_bc.substrate_inlet.as_ref().map_or(0.0, |v| v[j]);
                        (qp * sv - qm * s_in, qp)
                    }
                };
                f[off + k] += sk * flux;
                push(off + k, off + k, sk * d);
            }
        }

        // Reaction rows.
        let l = self.spec.n_reactions();
        let mut r = vec![0.0; l];
        let mut dc = vec![vec![0.0; kb]; l];
        let mut ds = vec![vec![0.0; kf]; l];
        let mut ch = vec![0.0; kb];
        let mut sh = vec![0.0; kf];
        let sc = &self.spec.sigma_c;
        let ss = &self.spec.sigma_s;
        for k in 0..n {
            for i in 0..kb {
                ch[i] = x[lay.c_hat(i) + k];
            }
            for j in 0..kf {
                sh[j] = x[lay.s_hat(j) + k];
            }
            self.spec.effective_rates(&ch, &sh, &mut r);
            self.spec.effective_rate_jacobian(&ch, &sh, &mut dc, &mut ds);
            let mut total = 0.0;
            for i in 0..kb {
                let rc: f64 = (0..l).map(|j| sc[i][j] * r[j]).sum();
                total += rc;
                f[lay.c(i) + k] = x[lay.c(i) + k] - ch[i] - dt * rc;
            }
            for j in 0..kf {
                let rs: f64 = (0..l).map(|jj| ss[j][jj] * r[jj]).sum();
                f[lay.s(j) + k] = x[lay.s(j) + k] - sh[j] - dt * rs;
            }
            f[lay.u() + k] = x[lay.u() + k] - uh[k] - dt * total;
            if !want_jac {
                continue;
            }
            // d(sigma r)/d(c_hat_a), d(sigma r)/d(s_hat_b)
            let drc = |sig: &[f64], a: usize| (0..l).map(|j| sig[j] * dc[j][a]).sum::<f64>();
            let drs = |sig: &[f64], b: usize| (0..l).map(|j| sig[j] * ds[j][b]).sum::<f64>();
            let mut dtot_c = vec![0.0; kb];
            let mut dtot_s = vec![0.0; kf];
            for i in 0..kb {
                let row = lay.c(i) + k;
                push(row, row, 1.0);
                push(row, lay.c_hat(i) + k, -1.0);
                for a in 0..kb {
                    let d = drc(&sc[i], a);
                    dtot_c[a] += d;
                    push(row, lay.c_hat(a) + k, -dt * d);
                }
                for b in 0..kf {
                    let d = drs(&sc[i], b);
                    dtot_s[b] += d;
                    push(row, lay.s_hat(b) + k, -dt * d);
                }
            }
            for j in 0..kf {
                let row = lay.s(j) + k;
                push(row, row, 1.0);
                push(row, lay.s_hat(j) + k, -1.0);
                for a in 0..kb {
                    push(row, lay.c_hat(a) + k, -dt * drc(&ss[j], a));
                }
                for b in 0..kf {
                    push(row, lay.s_hat(b) + k, -dt * drs(&ss[j], b));
                }
            }
            let row = lay.u() + k;
            push(row, row, 1.0);
            push(row, lay.u_hat() + k, -1.0);
            for a in 0..kb {
                push(row, lay.c_hat(a) + k, -dt * dtot_c[a]);
            }
            for b in 0..kf {
                push(row, lay.s_hat(b) + k, -dt * dtot_s[b]);
            }
        }

        // Projection and potential rows, scaled by the lumped mass.
        let (ut_off, mu_off, u_off) = (lay.u_tilde(), lay.mu(), lay.u());
        let ut = &x[ut_off..ut_off + m];
        for (i, mi) in self.lumped.iter().enumerate() {
            for (j, v) in self.projection_mass.row(i) {
                f[ut_off + i] += v * ut[j] / mi;
                push(ut_off + i, ut_off + j, v / mi);
            }
            for (j, v) in self.mass.row(i) {
                f[mu_off + i] += v * mu[j] / mi;
                push(mu_off + i, mu_off + j, v / mi);
            }
            for (j, v) in self.stiffness.row(i) {
                f[mu_off + i] -= v * ut[j] / mi;
                push(mu_off + i, ut_off + j, -v / mi);
            }
        }
        for (k, cell) in mesh.cells.iter().enumerate() {
            let a3 = mesh.cell_areas[k] / 3.0;
            let uk = x[u_off + k];
            let psi = potential_derivative(uk, p);
            let dpsi = potential_second_derivative(uk, p);
            for &v in cell {
                let mi = self.lumped[v];
                f[ut_off + v] -= uk * a3 / mi;
                f[mu_off + v] -= psi * a3 / mi;
                push(ut_off + v, u_off + k, -a3 / mi);
                push(mu_off + v, u_off + k, -dpsi * a3 / mi);
            }
        }
        f
    }

    /// Newton solve of the coupled step with `q` frozen. The previous state is
    /// the initial guess.
    pub fn newton_solve_coupled(&mut self, prev: &State, q: &VelocityP2c, dt: f64) -> Result<CoupledSolution> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        self.check_conc(&prev.conc)?;
        let opts = self.options.newton;
        let conv = ConvectiveFluxes::from_velocity(q, &self.mesh);
        let norm = |v: &[f64]| v.iter().fold(0.0f64, |a, b| a.max(b.abs()));
        let mut x = self.pack(prev);
        let mut f = self.evaluate(&prev.conc, &conv, dt, &x, None);
        let mut r = norm(&f);
        let r0 = r;
        for it in 0..=opts.max_iterations {
            if !r.is_finite() {
                break;
            }
            if r <= opts.atol || (it > 0 && r <= opts.rtol * r0) {
                return Ok(self.unpack(&x, it, r));
            }
            if it == opts.max_iterations {
                break;
            }
            let mut trip = Vec::new();
            self.evaluate(&prev.conc, &conv, dt, &x, Some(&mut trip));
            let nn = x.len();
            let jm = CsrMatrix::from_triplets(nn, nn, &trip);
            self.newton_lu.factor(&jm)?;
            let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = self.newton_lu.solve(&rhs)?;
            let mut alpha = 1.0;
            let mut halvings = 0;
            loop {
                let xt: Vec<f64> = x.iter().zip(&delta).map(|(a, d)| a + alpha * d).collect();
                let ft = self.evaluate(&prev.conc, &conv, dt, &xt, None);
                let rt = norm(&ft);
                if rt < r || halvings == opts.max_halvings {
                    x = xt;
                    f = ft;
                    r = rt;
                    break;
                }
                alpha *= 0.5;
                halvings += 1;
            }
        }
        Err(Error::NewtonDiverged {
            iterations: opts.max_iterations,
            residual: r,
        })
    }

    fn step_once(&mut self, state: &State, dt: f64) -> Result<(State, CoupledSolution, usize)> {
        let sol = self.newton_solve_coupled(state, &state.q, dt)?;
        let (q, p, clamped) = self.solve_flow(&sol.next.u, &sol.u_tilde)?;
        let next = State {
            t: state.t + dt,
            conc: sol.next.clone(),
            u_tilde: sol.u_tilde.clone(),
            mu: sol.mu.clone(),
            q,
            p,
        };
        Ok((next, sol, clamped))
    }

    /// Advances by `dt`, halving on Newton or solver failure.
    fn advance(&mut self, state: &State, dt: f64, depth: usize) -> Result<(State, CoupledSolution, usize, usize)> {
        match self.step_once(state, dt) {
            Ok((s, sol, cl)) => Ok((s, sol, cl, 0)),
            Err(e @ (Error::NewtonDiverged { .. } | Error::Solver(_))) => {
                if depth >= self.options.max_retries {
                    return Err(e);
                }
                let (mid, sol1, cl1, r1) = self.advance(state, 0.5 * dt, depth + 1)?;
                let (end, mut sol2, cl2, r2) = self.advance(&mid, 0.5 * dt, depth + 1)?;
                sol2.iterations += sol1.iterations;
                sol2.residual = sol2.residual.max(sol1.residual);
                Ok((end, sol2, cl1.max(cl2), 1 + r1 + r2))
            }
            Err(e) => Err(e),
        }
    }

    /// Summary of a state; solver fields are left at zero.
    pub fn report(&self, state: &State, step: usize, dt: f64) -> StepReport {
        let mesh = &self.mesh;
        let c = &state.conc;
        let mass_s: Vec<f64> = c.s.iter().map(|f| f.integral(mesh)).collect();
        let mass_u = c.u.integral(mesh);
        StepReport {
            step,
            t: state.t,
            dt,
            u_min: c.u.min(),
            u_max: c.u.max(),
            c_min: c.c.iter().map(|f| f.min()).collect(),
            c_max: c.c.iter().map(|f| f.max()).collect(),
            s_min: c.s.iter().map(|f| f.min()).collect(),
            s_max: c.s.iter().map(|f| f.max()).collect(),
            mass_u,
            mass_c: c.c.iter().map(|f| f.integral(mesh)).collect(),
            mass_total: mass_u + mass_s.iter().sum::<f64>(),
            mass_s,
            sum_defect: max_sum_defect(&c.c, &c.u),
            divergence: divergence_check(&state.q, mesh),
            cfl_margin: self.cfl_max_dt() / dt,
            ..StepReport::default()
        }
    }

    /// One accepted step: lagged Stokes data from `state`, coupled Newton
    /// solve, fresh Stokes solve for the new state, invariant monitor.
    pub fn time_step(&mut self, state: &State, dt: f64) -> Result<(State, StepReport)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        let bound = self.cfl_max_dt();
        if self.options.enforce_cfl && dt > bound {
            return Err(Error::StepRejected(format!(
                "dt = {dt:.3e} exceeds the reaction CFL bound {bound:.3e}"
            )));
        }
        let (next, sol, clamped, retries) = self.advance(state, dt, 0)?;
        let violations = check_invariants(&next.conc, self.params.rho_b);
        if !violations.is_empty() && self.options.policy == InvariantPolicy::Abort {
            return Err(Error::InvariantViolation {
                t: next.t,
                details: violations.join("; "),
            });
        }
        let mut rep = self.report(&next, 0, dt);
        rep.newton_iterations = sol.iterations;
        rep.residual = sol.residual;
        rep.retries = retries;
        rep.hat_sum_defect = max_sum_defect(&sol.hats.c, &sol.hats.u);
        rep.clamped = clamped;
        rep.violations = violations.len();
        Ok((next, rep))
    }

    /// Runs `round(t_end / dt)` steps. Snapshots are emitted at the steps
    /// closest to `snapshot_times`; every report (including step 0) is passed
    /// to `observer`.
    pub fn run(
        &mut self,
        init: State,
        dt: f64,
        t_end: f64,
        snapshot_times: &[f64],
        mut observer: impl FnMut(Event<'_>) -> Result<()>,
    ) -> Result<State> {
        if !(dt > 0.0) || !(t_end >= 0.0) {
            return Err(Error::InvalidArgument("dt must be positive and t_end non-negative".into()));
        }
        let steps = (t_end / dt).round() as usize;
        let snap_steps: Vec<usize> = snapshot_times.iter().map(|t| (t / dt).round() as usize).collect();
        observer(Event::Step(&self.report(&init, 0, dt)))?;
        if snap_steps.contains(&0) {
            observer(Event::Snapshot(&init))?;
        }
        let mut state = init;
        for step in 1..=steps {
            let (mut next, mut rep) = self.time_step(&state, dt)?;
            next.t = step as f64 * dt;
            rep.step = step;
            rep.t = next.t;
            observer(Event::Step(&rep))?;
            if snap_steps.contains(&step) {
                observer(Event::Snapshot(&next))?;
            }
            state = next;
        }
        Ok(state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};
    use crate::reactions::ReducedBiofilm;

    fn stepper(nx: usize, r: (f64, f64)) -> Stepper {
        let p = Params::default();
        let spec = ReducedBiofilm::with_rates(r.0, r.1).spec(p.rho_b, p.rho_f).unwrap();
        Stepper::new(
            build_structured_mesh(nx, nx, Rect::unit()).unwrap(),
            p,
            spec,
            VelocityBc::no_slip(),
            TransportBc::closed(),
            StepOptions::default(),
        )
        .unwrap()
    }

    fn uniform(s: &Stepper, u: f64, s1: f64) -> Concentrations {
        let m = &s.mesh;
        Concentrations {
            u: FieldP0::constant(m, u),
            c: vec![FieldP0::constant(m, 0.5 * u), FieldP0::constant(m, 0.5 * u)],
            s: vec![
                FieldP0::constant(m, s1),
                FieldP0::constant(m, s.params.rho_f * (1.0 - u / s.params.rho_b) - s1),
            ],
        }
    }

    #[test]
    fn layout_blocks_are_contiguous() {
        let l = Layout { n: 5, m: 4, kb: 2, kf: 2 };
        assert_eq!(l.c_hat(1), 10);
        assert_eq!(l.s_hat(0), 15);
        assert_eq!(l.mu() + l.m, l.len());
        assert_eq!(l.block_name(l.s(1) + 2), "s2");
        assert_eq!(l.block_name(l.c_hat(0)), "c_hat1");
        assert_eq!(l.block_name(l.u() + 4), "u");
        assert_eq!(l.block_name(l.mu()), "mu");
    }

    #[test]
    fn empty_state_is_a_fixed_point() {
        let mut s = stepper(3, (0.0, 0.0));
        let init = s.initial_state(uniform(&s, 0.0, 0.0)).unwrap();
        let sol = s.newton_solve_coupled(&init, &init.q, 1e-4).unwrap();
        assert!(sol.iterations <= 1);
        assert_eq!(sol.next.u.max(), 0.0);
    }

    #[test]
    fn constant_state_is_steady() {
        let mut s = stepper(3, (0.0, 0.0));
        let init = s.initial_state(uniform(&s, 300.0, 10.0)).unwrap();
        let (next, rep) = s.time_step(&init, 1e-4).unwrap();
        for (a, b) in next.conc.u.values.iter().zip(&init.conc.u.values) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn cfl_gate_rejects_large_steps() {
        let mut s = stepper(2, (100.0, 1000.0));
        let init = s.initial_state(uniform(&s, 300.0, 10.0)).unwrap();
        assert!(matches!(s.time_step(&init, 1e-4), Err(Error::StepRejected(_))));
    }

    #[test]
    fn invariant_messages() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        let good = Concentrations {
            u: FieldP0::constant(&m, 2.0),
            c: vec![FieldP0::constant(&m, 1.0), FieldP0::constant(&m, 1.0)],
            s: vec![FieldP0::constant(&m, 0.0)],
        };
        assert!(check_invariants(&good, 1117.0).is_empty());
        let mut bad = good.clone();
        bad.c[0].values[1] = -1.0;
        bad.u.values[0] = 2000.0;
        let v = check_invariants(&bad, 1117.0);
        assert_eq!(v.len(), 3);
    }

    #[test]
    fn csv_header_matches_record() {
        let s = stepper(2, (0.0, 0.0));
        let mut s = s;
        let init = s.initial_state(uniform(&s, 100.0, 5.0)).unwrap();
        let rep = s.report(&init, 0, 1e-4);
        assert_eq!(StepReport::csv_header(2, 2).len(), rep.csv_record().len());
    }
}
