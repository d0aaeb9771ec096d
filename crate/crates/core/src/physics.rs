//! Constitutive functions: degenerate mobility and its monotone splitting,
//! subphase mobilities, the free-energy derivative, mixture viscosity and the
//! body force driving the Stokes flow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{p1_gradient, FieldP0, FieldP1c};
use crate::mesh::Mesh;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Params {
    /// Biomass density (kg/m^3).
    pub rho_b: f64,
    /// Fluid density (kg/m^3).
    pub rho_f: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub phi_star: f64,
    pub eta: f64,
    /// Viscosity of the pure liquid phase (Pa s).
    pub nu_b: f64,
    /// Viscosity of the pure solid phase (Pa s).
    pub nu_f: f64,
    pub g: f64,
}

impl Default for Params {
    fn default() -> Self {
        Self {
            rho_b: 1117.0,
            rho_f: 998.0,
            lambda: 200.0,
            gamma: 0.0,
            kappa: 0.5e-8,
            phi_star: 0.01,
            eta: 1e-4,
            nu_b: 1e-3,
            nu_f: 1.0,
            g: 9.81,
        }
    }
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("parameter check failed: {what}")));
        let all = [
            self.rho_b,
            self.rho_f,
            self.lambda,
            self.gamma,
            self.kappa,
            self.phi_star,
            self.eta,
            self.nu_b,
            self.nu_f,
            self.g,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return bad("all parameters must be finite");
        }
        if !(self.rho_b > self.rho_f && self.rho_f > 0.0) {
            return bad("rho_b > rho_f > 0");
        }
        if !(self.lambda > 0.0) {
            return bad("lambda > 0");
        }
        if !(self.kappa > 0.0) {
            return bad("kappa > 0");
        }
        if self.gamma < 0.0 {
            return bad("gamma >= 0");
        }
        if !(self.phi_star > 0.0 && self.phi_star < 1.0) {
            return bad("0 < phi_star < 1");
        }
        if !(self.nu_b > 0.0 && self.nu_f > 0.0) {
            return bad("viscosities > 0");
        }
        if self.eta < 0.0 {
            return bad("eta >= 0");
        }
        Ok(())
    }

    /// Maximiser of the mobility on `[0, rho_b]`.
    pub fn u_mid(&self) -> f64 {
        self.rho_b / (2.0 + self.gamma)
    }

    pub fn delta_rho(&self) -> f64 {
        self.rho_b - self.rho_f
    }
}

#[inline]
fn inside(u: f64, p: &Params) -> bool {
    (0.0..=p.rho_b).contains(&u)
}

/// `lambda u (1 - u/rho_b)^(1+gamma)` on `[0, rho_b]`, zero elsewhere.
pub fn mobility(u: f64, p: &Params) -> f64 {
    if !inside(u, p) {
        return 0.0;
    }
    let phi = u / p.rho_b;
    p.lambda * u * (1.0 - phi).powf(1.0 + p.gamma)
}

pub fn mobility_deriv(u: f64, p: &Params) -> f64 {
    if !inside(u, p) {
        return 0.0;
    }
    let phi = u / p.rho_b;
    let one = 1.0 - phi;
    p.lambda * one.powf(p.gamma) * (one - (1.0 + p.gamma) * phi)
}

/// `(M_up, M_down)`: non-decreasing and non-positive non-increasing parts.
pub fn mobility_split(u: f64, p: &Params) -> (f64, f64) {
    let um = p.u_mid();
    if u <= um {
        (mobility(u, p), 0.0)
    } else {
        let mm = mobility(um, p);
        (mm, mobility(u, p) - mm)
    }
}

pub fn mobility_split_deriv(u: f64, p: &Params) -> (f64, f64) {
    if u <= p.u_mid() {
        (mobility_deriv(u, p), 0.0)
    } else {
        (0.0, mobility_deriv(u, p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SubphaseMobilities {
    pub m_c: f64,
    pub m_c_up: f64,
    pub m_c_down: f64,
    pub m_s: f64,
}

pub fn subphase_mobilities(u: f64, p: &Params) -> SubphaseMobilities {
    let (m_c, m_s) = if inside(u, p) {
        let phi = u / p.rho_b;
        let one = 1.0 - phi;
        (p.lambda * one.powf(1.0 + p.gamma), p.lambda * phi * one.powf(p.gamma))
    } else {
        (0.0, 0.0)
    };
    let um = p.u_mid();
    let (m_c_up, m_c_down) = if u <= um {
        (m_c, 0.0)
    } else {
        let up = mobility(um, p) / u;
        (up, m_c - up)
    };
    SubphaseMobilities {
        m_c,
        m_c_up,
        m_c_down,
        m_s,
    }
}

/// Derivatives of each entry of [`subphase_mobilities`] with respect to `u`.
pub fn subphase_mobilities_deriv(u: f64, p: &Params) -> SubphaseMobilities {
    let (dm_c, dm_s) = if inside(u, p) {
        let phi = u / p.rho_b;
        let one = 1.0 - phi;
        let dc = -p.lambda * (1.0 + p.gamma) * one.powf(p.gamma) / p.rho_b;
        let ds = if p.gamma == 0.0 {
            p.lambda / p.rho_b
        } else {
            p.lambda / p.rho_b * one.powf(p.gamma - 1.0) * (one - p.gamma * phi)
        };
        (dc, ds)
    } else {
        (0.0, 0.0)
    };
    let um = p.u_mid();
    let (d_up, d_down) = if u <= um {
        (dm_c, 0.0)
    } else {
        let d = -mobility(um, p) / (u * u);
        (d, dm_c - d)
    };
    SubphaseMobilities {
        m_c: dm_c,
        m_c_up: d_up,
        m_c_down: d_down,
        m_s: dm_s,
    }
}

/// `Psi'(u) = 4 phi^2 (phi - phi_star)` with `phi = u / rho_b`.
pub fn potential_derivative(u: f64, p: &Params) -> f64 {
    let phi = u / p.rho_b;
    4.0 * phi * phi * (phi - p.phi_star)
}

pub fn potential_second_derivative(u: f64, p: &Params) -> f64 {
    let phi = u / p.rho_b;
    4.0 / p.rho_b * (3.0 * phi * phi - 2.0 * phi * p.phi_star)
}

/// `max |Psi'(u)|` over `u` in `[0, rho_b]`.
pub fn potential_derivative_bound(p: &Params) -> f64 {
    let end = potential_derivative(p.rho_b, p).abs();
    let well = potential_derivative(2.0 * p.phi_star / 3.0 * p.rho_b, p).abs();
    end.max(well)
}

/// Clamps `u` to `[0, rho_b]`; the flag reports whether clamping happened.
pub fn clamp_concentration(u: f64, p: &Params) -> (f64, bool) {
    let c = u.clamp(0.0, p.rho_b);
    (c, c != u)
}

/// Mixture viscosity `nu_b (1 - u/rho_b) + nu_f u/rho_b`, `u` clamped to `[0, rho_b]`.
pub fn viscosity(u: f64, p: &Params) -> f64 {
    let phi = clamp_concentration(u, p).0 / p.rho_b;
    p.nu_b * (1.0 - phi) + p.nu_f * phi
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyForce {
    pub values: Vec<[f64; 2]>,
    /// Number of cells whose concentration had to be clamped.
    pub clamped: usize,
}

/// Per-cell force `-(g drho / rho_b) u k + eta Psi'(u) grad u_tilde`, `k = (0, 1)`.
pub fn body_force(u: &FieldP0, u_tilde: &FieldP1c, mesh: &Mesh, p: &Params) -> BodyForce {
    let grad = p1_gradient(u_tilde, mesh);
    let gravity = p.g * p.delta_rho() / p.rho_b;
    let mut clamped = 0;
    let values = u
        .values
        .iter()
        .zip(&grad)
        .map(|(&uk, g)| {
            let (uc, c) = clamp_concentration(uk, p);
            clamped += usize::from(c);
            let s = p.eta * potential_derivative(uc, p);
            [s * g[0], -gravity * uc + s * g[1]]
        })
        .collect();
    BodyForce { values, clamped }
}
