//! Tabulates the degenerate mobility, its increasing/decreasing split and the
//! subphase mobilities for a few values of gamma.

use ssf_biofilm::physics::{mobility, mobility_split, subphase_mobilities, Params};

fn main() {
    for gamma in [0.0, 1.0, 2.0] {
        let p = Params { gamma, ..Params::default() };
        println!("gamma = {gamma}  (u_mid = {:.2})", p.u_mid());
        println!("{:>8} {:>10} {:>10} {:>10} {:>8} {:>8}", "u", "M", "M_up", "M_down", "M_c", "M_s");
        for i in 0..=10 {
            let u = p.rho_b * i as f64 / 10.0;
            let (up, down) = mobility_split(u, &p);
            let sub = subphase_mobilities(u, &p);
            println!(
                "{u:>8.1} {:>10.3e} {up:>10.3e} {down:>10.3e} {:>8.3} {:>8.3}",
                mobility(u, &p),
                sub.m_c,
                sub.m_s
            );
        }
        println!();
    }
}
