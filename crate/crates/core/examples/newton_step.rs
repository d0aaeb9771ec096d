//! One coupled implicit step of the discs scenario on a coarse mesh, printing
//! the Newton history reconstructed from the public residual.

use ssf_biofilm::scenarios::{ScenarioConfig, ScenarioKind};

fn main() -> ssf_biofilm::Result<()> {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::DiscsFar);
    cfg.resolution = 16;
    let (mut stepper, state) = cfg.build()?;
    let lay = stepper.layout();
    println!("unknowns: {} ({} cells, {} vertices)", lay.len(), lay.n, lay.m);

    let x0 = stepper.pack(&state);
    let r0 = stepper.residual(&state.conc, &state.q, cfg.dt, &x0);
    println!("initial residual {:.3e}", r0.iter().fold(0.0f64, |a, v| a.max(v.abs())));

    stepper.options.newton.rtol = 0.0;
    let sol = stepper.newton_solve_coupled(&state, &state.q, cfg.dt)?;
    println!("converged in {} iterations, residual {:.3e}", sol.iterations, sol.residual);

    let (next, rep) = stepper.time_step(&state, cfg.dt)?;
    println!(
        "after one step: u in [{:.3e}, {:.3e}], mass drift {:.2e}, divergence {:.1e}",
        rep.u_min,
        rep.u_max,
        (rep.mass_total - stepper.report(&state, 0, cfg.dt).mass_total) / rep.mass_total,
        rep.divergence
    );
    println!("max |q| = {:.3e}", next.q.max_abs());
    Ok(())
}
