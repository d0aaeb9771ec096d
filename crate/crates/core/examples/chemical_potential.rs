//! Chemical potential of a disc of biomass: mu stays near zero in the liquid,
//! follows Psi' inside the disc and picks up the curvature term at the rim.

use ssf_biofilm::fields::{project_p0_to_p1, FieldP0};
use ssf_biofilm::mesh::{build_structured_mesh, Rect};
use ssf_biofilm::physics::{potential_derivative, Params};
use ssf_biofilm::potential::mu_solve;
use ssf_biofilm::scenarios::disc_profile;

fn main() -> ssf_biofilm::Result<()> {
    let m = build_structured_mesh(48, 48, Rect::unit())?;
    let p = Params::default();
    let u = FieldP0::from_fn(&m, |x| p.rho_b * disc_profile(x, [0.5, 0.5], 0.25, 0.3, p.kappa));
    let ut = project_p0_to_p1(&u, &m, true)?;
    let mu = mu_solve(&u, &ut, &m, &p)?;
    println!("Psi'(0.3 rho_b) = {:.5e}", potential_derivative(0.3 * p.rho_b, &p));
    println!("{:>6} {:>10} {:>12}", "x", "u_tilde", "mu");
    for (i, v) in m.vertices.iter().enumerate() {
        if (v[1] - 0.5).abs() < 1e-12 && i % 4 == 0 {
            println!("{:>6.3} {:>10.3} {:>12.5e}", v[0], ut.values[i], mu.values[i]);
        }
    }
    Ok(())
}
