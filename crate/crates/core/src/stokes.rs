//! Taylor-Hood-like P2/P0 Stokes solve with concentration-dependent viscosity:
//!
//! ```text
//! (nu(u) eps(q), eps(w)) - (p, div w) = (f, w)
//! -(div q, phi)                        = 0
//! ```
//!
//! The pressure mean is fixed by one Lagrange multiplier. Dirichlet rows are
//! eliminated symmetrically.

use crate::error::{Error, Result};
use crate::fields::{cell_point, p2_basis, p2_grad, FieldP0, PressureP0, VelocityP2c};
use crate::mesh::{BoundaryTag, Mesh};
use crate::physics::{clamp_concentration, viscosity, Params};
use crate::quadrature::{triangle_degree2, triangle_degree5};
use crate::sparse::{CsrMatrix, SparseLu};

pub type VelocityFn = Box<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>;

/// Prescribed velocity per boundary tag.
pub struct VelocityBc {
    pub wall: VelocityFn,
    pub inlet: Option<VelocityFn>,
    pub outlet: Option<VelocityFn>,
}

impl VelocityBc {
    pub fn no_slip() -> Self {
        Self {
            wall: Box::new(|_| [0.0, 0.0]),
            inlet: None,
            outlet: None,
        }
    }

    /// Same data on every tag.
    pub fn from_fn(f: impl Fn([f64; 2]) -> [f64; 2] + Send + Sync + Clone + 'static) -> Self {
        Self {
            wall: Box::new(f.clone()),
            inlet: Some(Box::new(f.clone())),
            outlet: Some(Box::new(f)),
        }
    }

    fn value(&self, tag: BoundaryTag, x: [f64; 2]) -> Result<[f64; 2]> {
        let f = match tag {
            BoundaryTag::Wall => Some(&self.wall),
            BoundaryTag::Inlet => self.inlet.as_ref(),
            BoundaryTag::Outlet => self.outlet.as_ref(),
        };
        f.map(|f| f(x)).ok_or_else(|| {
            Error::InvalidArgument(format!("no velocity data for {} boundary", tag.as_str()))
        })
    }
}

pub enum Force<'a> {
    Cellwise(&'a [[f64; 2]]),
    Function(&'a dyn Fn([f64; 2]) -> [f64; 2]),
}

pub struct StokesSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Number of P2 nodes; velocity dofs are `2 node + component`.
    pub n_nodes: usize,
    pub n_cells: usize,
    /// Prescribed values of the velocity dofs, `None` for free dofs.
    pub dirichlet: Vec<Option<f64>>,
    /// Cells whose concentration was clamped before evaluating the viscosity.
    pub clamped: usize,
}

impl StokesSystem {
    pub fn n_velocity(&self) -> usize {
        2 * self.n_nodes
    }
}

/// Dirichlet values for every boundary P2 node.
fn boundary_values(mesh: &Mesh, bc: &VelocityBc) -> Result<Vec<Option<[f64; 2]>>> {
    let nv = mesh.num_vertices();
    let mut vals: Vec<Option<[f64; 2]>> = vec![None; mesh.num_p2_nodes()];
    for be in &mesh.boundary_edges {
        let [a, b] = mesh.edges[be.edge];
        for node in [a, b, nv + be.edge] {
            if vals[node].is_none() {
                vals[node] = Some(bc.value(be.tag, mesh.p2_node(node))?);
            }
        }
    }
    Ok(vals)
}

pub fn assemble_stokes(u: &FieldP0, f: Force<'_>, mesh: &Mesh, p: &Params, bc: &VelocityBc) -> Result<StokesSystem> {
    let n_cells = mesh.num_cells();
    if u.len() != n_cells {
        return Err(Error::InvalidArgument("u does not match the mesh".into()));
    }
    if let Force::Cellwise(v) = &f {
        if v.len() != n_cells {
            return Err(Error::InvalidArgument("force does not match the mesh".into()));
        }
    }
    let n_nodes = mesh.num_p2_nodes();
    let nvel = 2 * n_nodes;
    let n = nvel + n_cells + 1;
    let bvals = boundary_values(mesh, bc)?;
    let mut dirichlet = vec![None; nvel];
    for (node, v) in bvals.iter().enumerate() {
        if let Some(v) = v {
            dirichlet[2 * node] = Some(v[0]);
            dirichlet[2 * node + 1] = Some(v[1]);
        }
    }

    let mut rhs = vec![0.0; n];
    let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(n_cells * (144 + 24 + 1) + nvel);
    let mut push = |i: usize, j: usize, v: f64, rhs: &mut [f64]| {
        let di = if i < nvel { dirichlet[i] } else { None };
        if di.is_some() {
            return;
        }
        if j < nvel {
            if let Some(g) = dirichlet[j] {
                rhs[i] -= v * g;
                return;
            }
        }
        trip.push((i, j, v));
    };

    let rule = triangle_degree5();
    let mut clamped = 0;
    for k in 0..n_cells {
        let nodes = mesh.cell_p2_nodes(k);
        let area = mesh.cell_areas[k];
        clamped += usize::from(clamp_concentration(u.values[k], p).1);
        let nu = viscosity(u.values[k], p);
        let mut a = [[0.0f64; 12]; 12];
        let mut bdiv = [0.0f64; 12];
        let mut load = [0.0f64; 12];
        for (l, w) in rule {
            let g = p2_grad(l, &mesh.cell_grad_bary[k]);
            let phi = p2_basis(l);
            let wa = w * area;
            for i in 0..6 {
                bdiv[2 * i] -= wa * g[i][0];
                bdiv[2 * i + 1] -= wa * g[i][1];
                for j in 0..6 {
                    let (gi, gj) = (g[i], g[j]);
                    let s = wa * nu;
                    a[2 * i][2 * j] += s * (gi[0] * gj[0] + 0.5 * gi[1] * gj[1]);
                    a[2 * i][2 * j + 1] += s * 0.5 * gi[1] * gj[0];
                    a[2 * i + 1][2 * j] += s * 0.5 * gi[0] * gj[1];
                    a[2 * i + 1][2 * j + 1] += s * (0.5 * gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
            let fx = match &f {
                Force::Cellwise(v) => v[k],
                Force::Function(func) => func(cell_point(mesh, k, l)),
            };
            for i in 0..6 {
                load[2 * i] += wa * phi[i] * fx[0];
                load[2 * i + 1] += wa * phi[i] * fx[1];
            }
        }
        let dof = |li: usize| 2 * nodes[li / 2] + li % 2;
        for i in 0..12 {
            let gi = dof(i);
            if dirichlet[gi].is_none() {
                rhs[gi] += load[i];
            }
            for j in 0..12 {
                push(gi, dof(j), a[i][j], &mut rhs);
            }
            push(gi, nvel + k, bdiv[i], &mut rhs);
            push(nvel + k, gi, bdiv[i], &mut rhs);
        }
        push(nvel + k, nvel + n_cells, area, &mut rhs);
        push(nvel + n_cells, nvel + k, area, &mut rhs);
    }
    for (i, d) in dirichlet.iter().enumerate() {
        if let Some(g) = d {
            trip.push((i, i, 1.0));
            rhs[i] = *g;
        }
    }
    Ok(StokesSystem {
        matrix: CsrMatrix::from_triplets(n, n, &trip),
        rhs,
        n_nodes,
        n_cells,
        dirichlet,
        clamped,
    })
}

/// Saddle-point solver that reuses its symbolic factorization between calls
/// on the same mesh.
#[derive(Default)]
pub struct StokesSolver {
    lu: SparseLu,
}

impl StokesSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, system: &StokesSystem) -> Result<(VelocityP2c, PressureP0)> {
        self.lu.factor(&system.matrix)?;
        let x = self.lu.solve(&system.rhs)?;
        let nvel = system.n_velocity();
        let q = VelocityP2c {
            values: (0..system.n_nodes).map(|i| [x[2 * i], x[2 * i + 1]]).collect(),
        };
        let p = PressureP0 {
            values: x[nvel..nvel + system.n_cells].to_vec(),
        };
        Ok((q, p))
    }
}

pub fn solve_stokes(system: &StokesSystem) -> Result<(VelocityP2c, PressureP0)> {
    StokesSolver::new().solve(system)
}

/// `max_K |int_K div q| / |K|`.
pub fn divergence_check(q: &VelocityP2c, mesh: &Mesh) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..mesh.num_cells() {
        let mut int = 0.0;
        for (l, w) in triangle_degree2() {
            let g = q.grad(mesh, k, l);
            int += w * (g[0][0] + g[1][1]);
        }
        worst = worst.max(int.abs());
    }
    worst
}

/// `(nu eps(w), eps(w))` for a given velocity, exact quadrature.
pub fn strain_energy(w: &VelocityP2c, u: &FieldP0, mesh: &Mesh, p: &Params) -> f64 {
    let mut e = 0.0;
    for k in 0..mesh.num_cells() {
        let nu = viscosity(u.values[k], p);
        for (l, wt) in triangle_degree5() {
            let g = w.grad(mesh, k, l);
            let off = 0.5 * (g[0][1] + g[1][0]);
            e += wt * mesh.cell_areas[k] * nu * (g[0][0] * g[0][0] + 2.0 * off * off + g[1][1] * g[1][1]);
        }
    }
    e
}

/// `||grad w||^2`, exact quadrature.
pub fn gradient_norm_sq(w: &VelocityP2c, mesh: &Mesh) -> f64 {
    let mut e = 0.0;
    for k in 0..mesh.num_cells() {
        for (l, wt) in triangle_degree5() {
            let g = w.grad(mesh, k, l);
            e += wt * mesh.cell_areas[k] * (g[0][0].powi(2) + g[0][1].powi(2) + g[1][0].powi(2) + g[1][1].powi(2));
        }
    }
    e
}

/// Vorticity `dq2/dx - dq1/dy` integrated over the cells selected by `keep`.
pub fn vorticity_integral(q: &VelocityP2c, mesh: &Mesh, keep: impl Fn([f64; 2]) -> bool) -> f64 {
    let mut total = 0.0;
    for k in 0..mesh.num_cells() {
        if !keep(mesh.cell_centroids[k]) {
            continue;
        }
        for (l, w) in triangle_degree2() {
            let g = q.grad(mesh, k, l);
            total += w * mesh.cell_areas[k] * (g[1][0] - g[0][1]);
        }
    }
    total
}
