//! Chemical potential on continuous P1:
//! `(mu, theta) = (kappa / rho_b) (grad u_tilde, grad theta) + (Psi'(u), theta)`.

use crate::error::{Error, Result};
use crate::fields::{p1_mass_matrix, p1_stiffness_matrix, FieldP0, FieldP1c};
use crate::mesh::Mesh;
use crate::physics::{potential_derivative, Params};
use crate::sparse::{CsrMatrix, SparseLu};

pub struct PotentialSystem {
    pub mass: CsrMatrix,
    /// P1 stiffness already multiplied by `kappa / rho_b`.
    pub stiffness: CsrMatrix,
    lu: SparseLu,
}

/// `(Psi'(u), theta_i)`, exact for cellwise-constant `u`.
pub fn psi_load(u: &[f64], mesh: &Mesh, p: &Params) -> Vec<f64> {
    let mut b = vec![0.0; mesh.num_vertices()];
    for ((c, &a), &uk) in mesh.cells.iter().zip(&mesh.cell_areas).zip(u) {
        let v = potential_derivative(uk, p) * a / 3.0;
        for &i in c {
            b[i] += v;
        }
    }
    b
}

impl PotentialSystem {
    pub fn new(mesh: &Mesh, p: &Params) -> Result<Self> {
        let mass = p1_mass_matrix(mesh, false);
        let mut stiffness = p1_stiffness_matrix(mesh);
        let scale = p.kappa / p.rho_b;
        stiffness.values.iter_mut().for_each(|v| *v *= scale);
        let mut lu = SparseLu::new();
        lu.factor(&mass)?;
        Ok(Self { mass, stiffness, lu })
    }

    pub fn rhs(&self, u: &FieldP0, u_tilde: &FieldP1c, mesh: &Mesh, p: &Params) -> Vec<f64> {
        let mut b = self.stiffness.mul_vec(&u_tilde.values);
        for (bi, li) in b.iter_mut().zip(psi_load(&u.values, mesh, p)) {
            *bi += li;
        }
        b
    }

    pub fn solve(&self, u: &FieldP0, u_tilde: &FieldP1c, mesh: &Mesh, p: &Params) -> Result<FieldP1c> {
        if u.len() != mesh.num_cells() || u_tilde.len() != mesh.num_vertices() {
            return Err(Error::InvalidArgument("u or u_tilde does not match the mesh".into()));
        }
        let b = self.rhs(u, u_tilde, mesh, p);
        Ok(FieldP1c::new(self.lu.solve(&b)?))
    }
}

pub fn mu_solve(u: &FieldP0, u_tilde: &FieldP1c, mesh: &Mesh, p: &Params) -> Result<FieldP1c> {
    PotentialSystem::new(mesh, p)?.solve(u, u_tilde, mesh, p)
}
