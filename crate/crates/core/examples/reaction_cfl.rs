//! Reaction time-step bound for the Monod model and what happens to an
//! explicit update on either side of it.

use ssf_biofilm::fields::FieldP0;
use ssf_biofilm::reactions::{cfl_max_dt, reaction_step_unchecked, validate_spec, ReducedBiofilm};

fn main() -> ssf_biofilm::Result<()> {
    let (rho_b, rho_f) = (1117.0, 998.0);
    for (r1, r2) in [(20.0, 100.0), (100.0, 1000.0), (1000.0, 5000.0)] {
        let spec = ReducedBiofilm::with_rates(r1, r2).spec(rho_b, rho_f)?;
        let (lc, ls) = spec.lambda_bounds();
        println!(
            "R1 = {r1:>6}, R2 = {r2:>6}: Lambda_c = {lc}, Lambda_s = {ls}, R = {:.3e}, R_max = {:.3e}, dt_max = {:.3e} s",
            spec.bound_r,
            spec.bound_rmax,
            cfl_max_dt(&spec, spec.kb())
        );
        assert!(validate_spec(&spec)?.is_valid());
    }

    // A cell rich in both solids with little substrate left.
    let spec = ReducedBiofilm::with_rates(100.0, 1000.0).spec(rho_b, rho_f)?;
    let c = vec![FieldP0::new(vec![500.0]), FieldP0::new(vec![500.0])];
    let s = vec![FieldP0::new(vec![1e-3]), FieldP0::new(vec![100.0])];
    let u = FieldP0::new(vec![1000.0]);
    let bound = cfl_max_dt(&spec, spec.kb());
    for factor in [0.5, 0.99, 2.0, 10.0, 1e3] {
        let out = reaction_step_unchecked(&c, &s, &u, factor * bound, &spec)?;
        println!(
            "dt = {factor:>6} x bound: s1 {:+.4e}  c1 {:.6}  c2 {:.6}",
            out.s[0].values[0], out.c[0].values[0], out.c[1].values[0]
        );
    }
    Ok(())
}
