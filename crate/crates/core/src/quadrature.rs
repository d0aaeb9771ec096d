//! Quadrature rules on the reference triangle (barycentric points, weights
//! summing to one) and on the unit segment.

/// Edge-midpoint rule, exact for quadratics.
pub fn triangle_degree2() -> [([f64; 3], f64); 3] {
    let w = 1.0 / 3.0;
    [([0.5, 0.5, 0.0], w), ([0.0, 0.5, 0.5], w), ([0.5, 0.0, 0.5], w)]
}

/// Seven-point Radon rule, exact for polynomials of degree five.
pub fn triangle_degree5() -> [([f64; 3], f64); 7] {
    let r15 = 15f64.sqrt();
    let a1 = (6.0 - r15) / 21.0;
    let b1 = 1.0 - 2.0 * a1;
    let w1 = (155.0 - r15) / 1200.0;
    let a2 = (6.0 + r15) / 21.0;
    let b2 = 1.0 - 2.0 * a2;
    let w2 = (155.0 + r15) / 1200.0;
    let t = 1.0 / 3.0;
    [
        ([t, t, t], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

/// Two-point Gauss rule on [0, 1], exact for cubics.
pub fn segment_gauss2() -> [(f64, f64); 2] {
    let d = 3f64.sqrt() / 6.0;
    [(0.5 - d, 0.5), (0.5 + d, 0.5)]
}

pub fn map_point(p: [[f64; 2]; 3], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0],
        bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1],
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    // Exact reference-triangle moments: int x^a y^b = a! b! / (a + b + 2)!, area 1/2.
    fn moment(a: u32, b: u32) -> f64 {
        let f = |n: u32| (1..=n).map(f64::from).product::<f64>();
        f(a) * f(b) / f(a + b + 2)
    }

    fn check<const N: usize>(rule: [([f64; 3], f64); N], degree: u32) {
        for a in 0..=degree {
            for b in 0..=(degree - a) {
                let q: f64 = rule
                    .iter()
                    .map(|(l, w)| 0.5 * w * l[1].powi(a as i32) * l[2].powi(b as i32))
                    .sum();
                assert!((q - moment(a, b)).abs() < 1e-15, "x^{a} y^{b}");
            }
        }
    }

    #[test]
    fn triangle_rules_are_exact() {
        check(triangle_degree2(), 2);
        check(triangle_degree5(), 5);
    }

    #[test]
    fn gauss_is_exact_for_cubics() {
        for k in 0..=3 {
            let q: f64 = segment_gauss2().iter().map(|(t, w)| w * t.powi(k)).sum();
            assert!((q - 1.0 / (k as f64 + 1.0)).abs() < 1e-15);
        }
    }
}
