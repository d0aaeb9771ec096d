//! Pure convection of a solid blob by a rotating velocity with the upwind
//! fluxes, advanced with explicit Euler steps built from the hat residuals.

use ssf_biofilm::fields::{FieldP0, FieldP1c, VelocityP2c};
use ssf_biofilm::mesh::{build_structured_mesh, Rect};
use ssf_biofilm::physics::Params;
use ssf_biofilm::transport::{assemble_hat_residuals, Concentrations, TransportBc};

fn main() -> ssf_biofilm::Result<()> {
    let m = build_structured_mesh(40, 40, Rect::unit())?;
    let p = Params::default();
    let blob = |x: [f64; 2]| if (x[0] - 0.3).hypot(x[1] - 0.5) < 0.12 { 400.0 } else { 0.0 };
    let u = FieldP0::from_fn(&m, blob);
    let mut state = Concentrations {
        c: vec![u.clone(), FieldP0::zeros(&m)],
        s: vec![FieldP0::zeros(&m), FieldP0::zeros(&m)],
        u,
    };
    let q = VelocityP2c::interpolate(&m, |x| [-(x[1] - 0.5), x[0] - 0.5]);
    // Flat potential: only convection acts.
    let mu = FieldP1c::zeros(&m);
    let dt = 2e-3;
    let mass0 = state.u.integral(&m);
    for step in 1..=200 {
        // With prev == hats the residual is just the flux balance.
        let r = assemble_hat_residuals(&state, &state, &mu, &q, &m, &p, &TransportBc::closed(), dt)?;
        let apply = |f: &mut FieldP0, row: &[f64]| {
            for (k, v) in f.values.iter_mut().enumerate() {
                *v -= dt * row[k] / m.cell_areas[k];
            }
        };
        apply(&mut state.u, &r.u);
        apply(&mut state.c[0], &r.c[0]);
        apply(&mut state.c[1], &r.c[1]);
        if step % 50 == 0 {
            println!(
                "t = {:.2}  min u {:+.3e}  max u {:.2}  mass drift {:.2e}",
                step as f64 * dt,
                state.u.min(),
                state.u.max(),
                (state.u.integral(&m) - mass0) / mass0
            );
        }
    }
    Ok(())
}
