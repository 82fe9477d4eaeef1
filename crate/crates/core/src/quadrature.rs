//! One-dimensional Gauss–Legendre rules and a triangle rule.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order > 0);
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(order, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(order, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -x;
        nodes[order - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=order {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = order as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule on `[a, b]` with `panels` equal panels.
pub fn composite(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(order);
    let len = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let lo = a + p as f64 * len;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((lo + 0.5 * len * (xi + 1.0), 0.5 * len * wi));
        }
    }
    out
}

/// Degree-5 seven-point rule on the reference triangle (area 1/2). All nodes are interior.
pub fn triangle_rule() -> [([f64; 2], f64); 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let b1 = (9.0 + 2.0 * s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let b2 = (9.0 - 2.0 * s15) / 21.0;
    let w1 = (155.0 - s15) / 2400.0;
    let w2 = (155.0 + s15) / 2400.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0], 9.0 / 80.0),
        ([a1, a1], w1),
        ([b1, a1], w1),
        ([a1, b1], w1),
        ([a2, a2], w2),
        ([b2, a2], w2),
        ([a2, b2], w2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_integrates_polynomials_exactly() {
        for order in 1..12 {
            let (x, w) = gauss_legendre(order);
            for deg in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "order {order} deg {deg}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn triangle_rule_degree_five() {
        // ∫_T x^a y^b = a! b! / (a+b+2)!
        let fact = |k: u32| (1..=k).map(|i| i as f64).product::<f64>();
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let q: f64 = triangle_rule()
                    .iter()
                    .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                    .sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((q - exact).abs() < 1e-15, "{a} {b}");
            }
        }
    }

    #[test]
    fn composite_rule_integrates_sine() {
        let q: f64 = composite(0.0, PI, 4, 10).iter().map(|(x, w)| w * x.sin()).sum();
        assert!((q - 2.0).abs() < 1e-14);
    }
}
