//! P2/P0 Stokes on a manufactured solution: velocity error in L2 should drop
//! by about 4 per refinement, pressure by about 2.

use std::f64::consts::PI;

use ssf_biofilm::fields::FieldP0;
use ssf_biofilm::mesh::{build_structured_mesh, Rect};
use ssf_biofilm::physics::Params;
use ssf_biofilm::quadrature::{map_point, triangle_degree5};
use ssf_biofilm::stokes::{assemble_stokes, divergence_check, solve_stokes, Force, VelocityBc};

// Stream function x^2 (1-x)^2 y^2 (1-y)^2.
fn velocity(x: [f64; 2]) -> [f64; 2] {
    let f = |t: f64| t * t * (1.0 - t) * (1.0 - t);
    let df = |t: f64| 2.0 * t * (1.0 - t) * (1.0 - 2.0 * t);
    [f(x[0]) * df(x[1]), -df(x[0]) * f(x[1])]
}

fn pressure(x: [f64; 2]) -> f64 {
    (PI * x[0]).cos() * (PI * x[1]).cos()
}

fn force(x: [f64; 2]) -> [f64; 2] {
    let f = |t: f64| t * t * (1.0 - t) * (1.0 - t);
    let d1 = |t: f64| 2.0 * t - 6.0 * t * t + 4.0 * t.powi(3);
    let d2 = |t: f64| 2.0 - 12.0 * t + 12.0 * t * t;
    let d3 = |t: f64| 24.0 * t - 12.0;
    let (a, b) = (x[0], x[1]);
    let lap1 = d2(a) * d1(b) + f(a) * d3(b);
    let lap2 = -(d3(a) * f(b) + d1(a) * d2(b));
    [
        -0.5 * lap1 - PI * (PI * a).sin() * (PI * b).cos(),
        -0.5 * lap2 - PI * (PI * a).cos() * (PI * b).sin(),
    ]
}

fn main() -> ssf_biofilm::Result<()> {
    let p = Params { nu_b: 1.0, nu_f: 1.0, ..Params::default() };
    let mut last: Option<(f64, f64)> = None;
    for n in [4, 8, 16, 32] {
        let m = build_structured_mesh(n, n, Rect::unit())?;
        let sys = assemble_stokes(&FieldP0::zeros(&m), Force::Function(&force), &m, &p, &VelocityBc::no_slip())?;
        let (q, pr) = solve_stokes(&sys)?;
        let (mut eq, mut ep) = (0.0, 0.0);
        for k in 0..m.num_cells() {
            let c = m.cells[k];
            let pts = [m.vertices[c[0]], m.vertices[c[1]], m.vertices[c[2]]];
            for (b, w) in triangle_degree5() {
                let x = map_point(pts, b);
                let (qh, qe) = (q.eval(&m, k, b), velocity(x));
                eq += w * m.cell_areas[k] * ((qh[0] - qe[0]).powi(2) + (qh[1] - qe[1]).powi(2));
                ep += w * m.cell_areas[k] * (pr.values[k] - pressure(x)).powi(2);
            }
        }
        let (eq, ep) = (eq.sqrt(), ep.sqrt());
        let rates = last.map_or(String::new(), |(a, b)| format!("  orders {:.2} {:.2}", (a / eq).log2(), (b / ep).log2()));
        println!(
            "n = {n:>2}  |q - q_h| {eq:.3e}  |p - p_h| {ep:.3e}  max div {:.1e}{rates}",
            divergence_check(&q, &m)
        );
        last = Some((eq, ep));
    }
    Ok(())
}
