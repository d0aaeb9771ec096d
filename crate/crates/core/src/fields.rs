//! Discrete spaces: cellwise constants, continuous P1, continuous P2 vectors
//! and P0 pressure, plus the transfers between them.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::map_point;
use crate::sparse::{solve_once, CsrMatrix};

#[inline]
pub fn pos(a: f64) -> f64 {
    a.max(0.0)
}

#[inline]
pub fn neg(a: f64) -> f64 {
    (-a).max(0.0)
}

/// Generalized derivative of `pos`, zero at the kink.
#[inline]
pub fn pos_deriv(a: f64) -> f64 {
    if a > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Generalized derivative of `neg`, zero at the kink.
#[inline]
pub fn neg_deriv(a: f64) -> f64 {
    if a < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldP0 {
    pub values: Vec<f64>,
}

impl FieldP0 {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &Mesh, a: f64) -> Self {
        Self {
            values: vec![a; mesh.num_cells()],
        }
    }

    /// Centroid evaluation of `f`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: mesh.cell_centroids.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn integral(&self, mesh: &Mesh) -> f64 {
        self.values.iter().zip(&mesh.cell_areas).map(|(v, a)| v * a).sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldP1c {
    pub values: Vec<f64>,
}

impl FieldP1c {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.num_vertices()],
        }
    }

    pub fn from_fn(mesh: &Mesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            values: mesh.vertices.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exact integral of the piecewise-linear interpolant.
    pub fn integral(&self, mesh: &Mesh) -> f64 {
        mesh.cells
            .iter()
            .zip(&mesh.cell_areas)
            .map(|(c, a)| a * (self.values[c[0]] + self.values[c[1]] + self.values[c[2]]) / 3.0)
            .sum()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Continuous quadratic vector field, nodes ordered vertices then edge midpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityP2c {
    pub values: Vec<[f64; 2]>,
}

impl VelocityP2c {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![[0.0; 2]; mesh.num_p2_nodes()],
        }
    }

    /// Nodal interpolation of `f`.
    pub fn interpolate(mesh: &Mesh, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        Self {
            values: (0..mesh.num_p2_nodes()).map(|i| f(mesh.p2_node(i))).collect(),
        }
    }

    pub fn eval(&self, mesh: &Mesh, k: usize, bary: [f64; 3]) -> [f64; 2] {
        let nodes = mesh.cell_p2_nodes(k);
        let phi = p2_basis(bary);
        let mut q = [0.0; 2];
        for a in 0..6 {
            q[0] += phi[a] * self.values[nodes[a]][0];
            q[1] += phi[a] * self.values[nodes[a]][1];
        }
        q
    }

    /// Velocity gradient `[[dq1/dx, dq1/dy], [dq2/dx, dq2/dy]]`.
    pub fn grad(&self, mesh: &Mesh, k: usize, bary: [f64; 3]) -> [[f64; 2]; 2] {
        let nodes = mesh.cell_p2_nodes(k);
        let g = p2_grad(bary, &mesh.cell_grad_bary[k]);
        let mut out = [[0.0; 2]; 2];
        for a in 0..6 {
            let v = self.values[nodes[a]];
            for c in 0..2 {
                out[c][0] += v[c] * g[a][0];
                out[c][1] += v[c] * g[a][1];
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v[0].hypot(v[1])))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureP0 {
    pub values: Vec<f64>,
}

impl PressureP0 {
    pub fn zeros(mesh: &Mesh) -> Self {
        Self {
            values: vec![0.0; mesh.num_cells()],
        }
    }

    pub fn mean(&self, mesh: &Mesh) -> f64 {
        let int: f64 = self.values.iter().zip(&mesh.cell_areas).map(|(p, a)| p * a).sum();
        int / mesh.total_area()
    }
}

/// Quadratic Lagrange basis in barycentric coordinates: vertices, then the
/// midpoints of the edges opposite each vertex.
pub fn p2_basis(l: [f64; 3]) -> [f64; 6] {
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
        4.0 * l[0] * l[1],
    ]
}

pub fn p2_grad(l: [f64; 3], gl: &[[f64; 2]; 3]) -> [[f64; 2]; 6] {
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        let s = 4.0 * l[i] - 1.0;
        g[i] = [s * gl[i][0], s * gl[i][1]];
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        g[3 + i] = [
            4.0 * (l[j] * gl[k][0] + l[k] * gl[j][0]),
            4.0 * (l[j] * gl[k][1] + l[k] * gl[j][1]),
        ];
    }
    g
}

pub fn cell_points(mesh: &Mesh, k: usize) -> [[f64; 2]; 3] {
    let c = mesh.cells[k];
    [mesh.vertices[c[0]], mesh.vertices[c[1]], mesh.vertices[c[2]]]
}

pub fn cell_point(mesh: &Mesh, k: usize, bary: [f64; 3]) -> [f64; 2] {
    map_point(cell_points(mesh, k), bary)
}

/// P1 mass matrix; the lumped variant carries the row sums on the diagonal.
pub fn p1_mass_matrix(mesh: &Mesh, lumped: bool) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for (c, &a) in mesh.cells.iter().zip(&mesh.cell_areas) {
        for i in 0..3 {
            if lumped {
                t.push((c[i], c[i], a / 3.0));
            } else {
                for j in 0..3 {
                    let m = if i == j { a / 6.0 } else { a / 12.0 };
                    t.push((c[i], c[j], m));
                }
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// Lumped P1 mass, one entry per vertex.
pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut m = vec![0.0; mesh.num_vertices()];
    for (c, &a) in mesh.cells.iter().zip(&mesh.cell_areas) {
        for &v in c {
            m[v] += a / 3.0;
        }
    }
    m
}

/// `(u, theta_i)` for every P1 hat function `theta_i`.
pub fn p0_p1_load(u: &[f64], mesh: &Mesh) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for ((c, &a), &uk) in mesh.cells.iter().zip(&mesh.cell_areas).zip(u) {
        for &v in c {
            b[v] += uk * a / 3.0;
        }
    }
    b
}

/// P1 stiffness matrix `(grad theta_j, grad theta_i)`.
pub fn p1_stiffness_matrix(mesh: &Mesh) -> CsrMatrix {
    let n = mesh.num_vertices();
    let mut t = Vec::with_capacity(9 * mesh.num_cells());
    for (k, c) in mesh.cells.iter().enumerate() {
        let g = mesh.cell_grad_bary[k];
        let a = mesh.cell_areas[k];
        for i in 0..3 {
            for j in 0..3 {
                t.push((c[i], c[j], a * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

/// L2 projection of a cellwise constant field onto continuous P1.
pub fn project_p0_to_p1(u: &FieldP0, mesh: &Mesh, lumped: bool) -> Result<FieldP1c> {
    if u.len() != mesh.num_cells() {
        return Err(Error::InvalidArgument(format!(
            "field has {} values for {} cells",
            u.len(),
            mesh.num_cells()
        )));
    }
    let b = p0_p1_load(&u.values, mesh);
    if lumped {
        let m = lumped_mass(mesh);
        // The quotient is a convex combination of the incident cell values;
        // clamping to their range only removes round-off past the extremes.
        let nv = mesh.num_vertices();
        let (mut lo, mut hi) = (vec![f64::INFINITY; nv], vec![f64::NEG_INFINITY; nv]);
        for (c, &uk) in mesh.cells.iter().zip(&u.values) {
            for &v in c {
                lo[v] = lo[v].min(uk);
                hi[v] = hi[v].max(uk);
            }
        }
        let values = (0..nv).map(|i| (b[i] / m[i]).clamp(lo[i], hi[i])).collect();
        return Ok(FieldP1c::new(values));
    }
    let mass = p1_mass_matrix(mesh, false);
    Ok(FieldP1c::new(solve_once(&mass, &b)?))
}

/// Cellwise gradient of the P1 interpolant.
pub fn p1_gradient(f: &FieldP1c, mesh: &Mesh) -> Vec<[f64; 2]> {
    mesh.cells
        .iter()
        .zip(&mesh.cell_grad_bary)
        .map(|(c, g)| {
            let mut d = [0.0; 2];
            for i in 0..3 {
                d[0] += f.values[c[i]] * g[i][0];
                d[1] += f.values[c[i]] * g[i][1];
            }
            d
        })
        .collect()
}

/// `0.5 (beta_K + beta_L) . n_e` on an interior edge.
pub fn edge_average_normal(beta: &[[f64; 2]], mesh: &Mesh, edge: usize) -> Result<f64> {
    let slot = mesh
        .interior_slot(edge)
        .ok_or_else(|| Error::InvalidArgument(format!("edge {edge} is not an interior edge")))?;
    let ie = mesh.interior_edges[slot];
    let n = mesh.edge_normals[edge];
    let bk = beta[ie.k];
    let bl = beta[ie.l];
    Ok(0.5 * ((bk[0] + bl[0]) * n[0] + (bk[1] + bl[1]) * n[1]))
}
