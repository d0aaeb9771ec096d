//! Upwind fluxes for cellwise-constant concentrations and the residuals of
//! the transport (hat) equations.
//!
//! Every interior edge flux is oriented from `k` to `l`; it enters the balance
//! of `k` with a plus sign and that of `l` with a minus sign.

use crate::error::{Error, Result};
use crate::fields::{neg, neg_deriv, pos, pos_deriv, FieldP0, FieldP1c, VelocityP2c};
use crate::mesh::{BoundaryTag, Mesh};
use crate::physics::{mobility_split, mobility_split_deriv, subphase_mobilities, subphase_mobilities_deriv, Params};
use crate::quadrature::segment_gauss2;

/// Solid total, solid components and substrate components.
#[derive(Clone, Debug, PartialEq)]
pub struct Concentrations {
    pub u: FieldP0,
    pub c: Vec<FieldP0>,
    pub s: Vec<FieldP0>,
}

impl Concentrations {
    pub fn kb(&self) -> usize {
        self.c.len()
    }

    pub fn kf(&self) -> usize {
        self.s.len()
    }

    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.num_cells();
        if self.u.len() != n || self.c.iter().chain(&self.s).any(|f| f.len() != n) {
            return Err(Error::InvalidArgument(format!("concentration fields must have {n} values")));
        }
        Ok(())
    }
}

/// Upwind value `(qn)+ phi_k - (qn)- phi_l`.
pub fn conv_flux(phi_k: f64, phi_l: f64, qn: f64) -> f64 {
    pos(qn) * phi_k - neg(qn) * phi_l
}

/// Value of an edge flux and its partial derivatives with respect to the two
/// transported values, the two solid totals and the edge scalar `beta`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FluxJet {
    pub value: f64,
    pub d_k: f64,
    pub d_l: f64,
    pub d_uk: f64,
    pub d_ul: f64,
    pub d_beta: f64,
}

pub fn ch_flux(u_k: f64, u_l: f64, beta: f64, p: &Params) -> f64 {
    ch_flux_jet(u_k, u_l, beta, p).value
}

pub fn ch_flux_jet(u_k: f64, u_l: f64, beta: f64, p: &Params) -> FluxJet {
    let (up_k, down_k) = mobility_split(u_k, p);
    let (up_l, down_l) = mobility_split(u_l, p);
    let (dup_k, ddown_k) = mobility_split_deriv(u_k, p);
    let (dup_l, ddown_l) = mobility_split_deriv(u_l, p);
    let (bp, bm) = (pos(beta), neg(beta));
    let fwd = up_k + down_l;
    let bwd = up_l + down_k;
    FluxJet {
        value: bp * fwd - bm * bwd,
        d_k: bp * dup_k - bm * ddown_k,
        d_l: bp * ddown_l - bm * dup_l,
        d_uk: 0.0,
        d_ul: 0.0,
        d_beta: pos_deriv(beta) * fwd - neg_deriv(beta) * bwd,
    }
}

pub fn solid_flux(c_k: f64, c_l: f64, beta: f64, u_k: f64, u_l: f64, p: &Params) -> f64 {
    solid_flux_jet(c_k, c_l, beta, u_k, u_l, p).value
}

pub fn solid_flux_jet(c_k: f64, c_l: f64, beta: f64, u_k: f64, u_l: f64, p: &Params) -> FluxJet {
    let mk = subphase_mobilities(u_k, p);
    let ml = subphase_mobilities(u_l, p);
    let dk = subphase_mobilities_deriv(u_k, p);
    let dl = subphase_mobilities_deriv(u_l, p);
    let (ck, cl) = (pos(c_k), pos(c_l));
    let (bp, bm) = (pos(beta), neg(beta));
    let fwd = mk.m_c_up * ck + ml.m_c_down * cl;
    let bwd = ml.m_c_up * cl + mk.m_c_down * ck;
    FluxJet {
        value: bp * fwd - bm * bwd,
        d_k: pos_deriv(c_k) * (bp * mk.m_c_up - bm * mk.m_c_down),
        d_l: pos_deriv(c_l) * (bp * ml.m_c_down - bm * ml.m_c_up),
        d_uk: ck * (bp * dk.m_c_up - bm * dk.m_c_down),
        d_ul: cl * (bp * dl.m_c_down - bm * dl.m_c_up),
        d_beta: pos_deriv(beta) * fwd - neg_deriv(beta) * bwd,
    }
}

pub fn substrate_flux(s_k: f64, s_l: f64, beta: f64, u_k: f64, u_l: f64, p: &Params) -> f64 {
    substrate_flux_jet(s_k, s_l, beta, u_k, u_l, p).value
}

pub fn substrate_flux_jet(s_k: f64, s_l: f64, beta: f64, u_k: f64, u_l: f64, p: &Params) -> FluxJet {
    let mk = subphase_mobilities(u_k, p).m_s;
    let ml = subphase_mobilities(u_l, p).m_s;
    let dk = subphase_mobilities_deriv(u_k, p).m_s;
    let dl = subphase_mobilities_deriv(u_l, p).m_s;
    let (sk, sl) = (pos(s_k), pos(s_l));
    let (bp, bm) = (pos(beta), neg(beta));
    FluxJet {
        value: bp * mk * sk - bm * ml * sl,
        d_k: pos_deriv(s_k) * bp * mk,
        d_l: -pos_deriv(s_l) * bm * ml,
        d_uk: bp * dk * sk,
        d_ul: -bm * dl * sl,
        d_beta: pos_deriv(beta) * mk * sk - neg_deriv(beta) * ml * sl,
    }
}

/// `int_e (q.n)+` and `int_e (q.n)-` for every edge, two-point Gauss.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvectiveFluxes {
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl ConvectiveFluxes {
    pub fn from_velocity(q: &VelocityP2c, mesh: &Mesh) -> Self {
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut plus = vec![0.0; ne];
        let mut minus = vec![0.0; ne];
        for e in 0..ne {
            let [a, b] = mesh.edges[e];
            let (qa, qb, qm) = (q.values[a], q.values[b], q.values[nv + e]);
            let n = mesh.edge_normals[e];
            let len = mesh.edge_lengths[e];
            for (t, w) in segment_gauss2() {
                let (pa, pb, pm) = ((1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t));
                let qx = pa * qa[0] + pb * qb[0] + pm * qm[0];
                let qy = pa * qa[1] + pb * qb[1] + pm * qm[1];
                let qn = qx * n[0] + qy * n[1];
                plus[e] += w * len * pos(qn);
                minus[e] += w * len * neg(qn);
            }
        }
        Self { plus, minus }
    }

    pub fn zero(mesh: &Mesh) -> Self {
        Self {
            plus: vec![0.0; mesh.num_edges()],
            minus: vec![0.0; mesh.num_edges()],
        }
    }
}

/// Linear map `mu -> <grad mu>.n_e` on each interior edge, as (vertex, weight) lists.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeStencils {
    pub entries: Vec<Vec<(usize, f64)>>,
}

impl EdgeStencils {
    pub fn new(mesh: &Mesh) -> Self {
        let entries = mesh
            .interior_edges
            .iter()
            .map(|ie| {
                let n = mesh.edge_normals[ie.edge];
                let mut out: Vec<(usize, f64)> = Vec::with_capacity(4);
                for cell in [ie.k, ie.l] {
                    for (i, &v) in mesh.cells[cell].iter().enumerate() {
                        let g = mesh.cell_grad_bary[cell][i];
                        let w = 0.5 * (g[0] * n[0] + g[1] * n[1]);
                        match out.iter_mut().find(|(x, _)| *x == v) {
                            Some(entry) => entry.1 += w,
                            None => out.push((v, w)),
                        }
                    }
                }
                out
            })
            .collect();
        Self { entries }
    }

    pub fn apply(&self, slot: usize, mu: &[f64]) -> f64 {
        self.entries[slot].iter().map(|&(v, w)| w * mu[v]).sum()
    }
}

/// Boundary data for the transport equations. Solids never cross the
/// boundary; substrates enter through the inlet with prescribed values and
/// leave through inlet or outlet with the interior trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransportBc {
    pub substrate_inlet: Option<Vec<f64>>,
}

impl TransportBc {
    pub fn closed() -> Self {
        Self::default()
    }

    pub fn check(&self, mesh: &Mesh, kf: usize) -> Result<()> {
        let has_inlet = mesh.boundary_edges.iter().any(|b| b.tag == BoundaryTag::Inlet);
        match &self.substrate_inlet {
            None if has_inlet => Err(Error::InvalidArgument(
                "mesh has inlet edges but no substrate inlet values were given".into(),
            )),
            Some(v) if v.len() != kf => Err(Error::InvalidArgument(format!(
                "{} substrate inlet values for {kf} substrates",
                v.len()
            ))),
            _ => Ok(()),
        }
    }
}

/// Net outgoing flux of every cell for each transported quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct HatResiduals {
    pub u: Vec<f64>,
    pub c: Vec<Vec<f64>>,
    pub s: Vec<Vec<f64>>,
}

/// Sums the edge fluxes of the hat equations cell by cell.
pub fn flux_balance(
    hats: &Concentrations,
    mu: &[f64],
    conv: &ConvectiveFluxes,
    stencils: &EdgeStencils,
    mesh: &Mesh,
    p: &Params,
    bc: &TransportBc,
) -> HatResiduals {
    let n = mesh.num_cells();
    let mut out = HatResiduals {
        u: vec![0.0; n],
        c: vec![vec![0.0; n]; hats.kb()],
        s: vec![vec![0.0; n]; hats.kf()],
    };
    let uh = &hats.u.values;
    for (slot, ie) in mesh.interior_edges.iter().enumerate() {
        let (e, k, l) = (ie.edge, ie.k, ie.l);
        let len = mesh.edge_lengths[e];
        let (qp, qm) = (conv.plus[e], conv.minus[e]);
        let g = stencils.apply(slot, mu);
        let add = |row: &mut Vec<f64>, f: f64| {
            row[k] += f;
            row[l] -= f;
        };
        let fu = qp * uh[k] - qm * uh[l] + len * ch_flux(uh[k], uh[l], -g, p);
        add(&mut out.u, fu);
        for (i, ci) in hats.c.iter().enumerate() {
            let (a, b) = (ci.values[k], ci.values[l]);
            let f = qp * a - qm * b + len * solid_flux(a, b, -g, uh[k], uh[l], p);
            add(&mut out.c[i], f);
        }
        for (j, sj) in hats.s.iter().enumerate() {
            let (a, b) = (sj.values[k], sj.values[l]);
            let f = qp * a - qm * b + len * substrate_flux(a, b, g, uh[k], uh[l], p);
            add(&mut out.s[j], f);
        }
    }
    for be in &mesh.boundary_edges {
        let (e, k) = (be.edge, be.cell);
        let (qp, qm) = (conv.plus[e], conv.minus[e]);
        for (j, sj) in hats.s.iter().enumerate() {
            let f = match be.tag {
                BoundaryTag::Wall => 0.0,
                BoundaryTag::Outlet => (qp - qm) * sj.values[k],
                BoundaryTag::Inlet => {
                    let s_in = bc.substrate_inlet.as_ref().map_or(0.0, |v| v[j]);
                    qp * sj.values[k] - qm * s_in
                }
            };
            out.s[j][k] += f;
        }
    }
    out
}

/// Residuals `|K| (x_hat - x_prev) / dt + sum of edge fluxes` of the hat
/// equations. The Cahn-Hilliard fluxes use `beta = -grad mu` for solids and
/// `beta = grad mu` for substrates.
#[allow(clippy::too_many_arguments)]
pub fn assemble_hat_residuals(
    prev: &Concentrations,
    hats: &Concentrations,
    mu: &FieldP1c,
    q: &VelocityP2c,
    mesh: &Mesh,
    p: &Params,
    bc: &TransportBc,
    dt: f64,
) -> Result<HatResiduals> {
    prev.check(mesh)?;
    hats.check(mesh)?;
    if prev.kb() != hats.kb() || prev.kf() != hats.kf() {
        return Err(Error::InvalidArgument("component counts of previous and candidate states differ".into()));
    }
    if mu.len() != mesh.num_vertices() || q.values.len() != mesh.num_p2_nodes() {
        return Err(Error::InvalidArgument("mu or q has the wrong number of nodes".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    bc.check(mesh, hats.kf())?;
    let conv = ConvectiveFluxes::from_velocity(q, mesh);
    let stencils = EdgeStencils::new(mesh);
    let mut r = flux_balance(hats, &mu.values, &conv, &stencils, mesh, p, bc);
    let time = |row: &mut [f64], new: &FieldP0, old: &FieldP0| {
        for (k, v) in row.iter_mut().enumerate() {
            *v += mesh.cell_areas[k] * (new.values[k] - old.values[k]) / dt;
        }
    };
    time(&mut r.u, &hats.u, &prev.u);
    for (row, (new, old)) in r.c.iter_mut().zip(hats.c.iter().zip(&prev.c)) {
        time(row, new, old);
    }
    for (row, (new, old)) in r.s.iter_mut().zip(hats.s.iter().zip(&prev.s)) {
        time(row, new, old);
    }
    Ok(r)
}
