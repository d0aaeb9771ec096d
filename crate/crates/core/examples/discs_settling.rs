//! Two biomass discs of different composition settling in a closed box. The
//! heavier (upper) disc sinks faster; a vortex forms between them.

use ssf_biofilm::scenarios::{ScenarioConfig, ScenarioKind};
use ssf_biofilm::stepper::Event;
use ssf_biofilm::stokes::vorticity_integral;

fn main() -> ssf_biofilm::Result<()> {
    let mut cfg = ScenarioConfig::preset(ScenarioKind::DiscsFar);
    cfg.resolution = 24;
    cfg.t_end = 4e-3;
    cfg.snapshot_times = (0..=4).map(|k| k as f64 * 1e-3).collect();
    let (mut stepper, init) = cfg.build()?;
    let mesh = stepper.mesh.clone();
    stepper.run(init, cfg.dt, cfg.t_end, &cfg.snapshot_times, |ev| {
        if let Event::Snapshot(s) = ev {
            let c = &s.conc;
            let (mut mh, mut yh, mut ml, mut yl) = (0.0, 0.0, 0.0, 0.0);
            for k in 0..mesh.num_cells() {
                let w = c.u.values[k] * mesh.cell_areas[k];
                let y = mesh.cell_centroids[k][1];
                if c.c[0].values[k] > 0.375 * c.u.values[k] {
                    mh += w;
                    yh += w * y;
                } else {
                    ml += w;
                    yl += w * y;
                }
            }
            println!(
                "t = {:.3}  heavy y {:.5}  light y {:.5}  max|q| {:.3e}  curl(x<0.5) {:+.3e}",
                s.t,
                yh / mh,
                yl / ml,
                s.q.max_abs(),
                vorticity_integral(&s.q, &mesh, |x| x[0] < 0.5)
            );
        }
        Ok(())
    })?;
    Ok(())
}
