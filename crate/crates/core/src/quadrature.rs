//! Gauss-Legendre rules on intervals and a degree-5 rule on triangles.

use alloc::vec::Vec;
use core::f64::consts::PI;
#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::{signed_area, Point};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "Gauss-Legendre rule needs at least one point");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            // Newton on P_n starting from the Chebyshev-like guess
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        self.nodes.iter().zip(self.weights.iter()).map(move |(x, w)| (c + r * x, r * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let nn = n as f64;
    let d = nn * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

// Dunavant degree-5 rule in barycentric coordinates, weights summing to 1.
const A1: f64 = 0.059_715_871_789_770;
const B1: f64 = 0.470_142_064_105_115;
const A2: f64 = 0.797_426_985_353_087;
const B2: f64 = 0.101_286_507_323_456;
const W0: f64 = 0.225;
const W1: f64 = 0.132_394_152_788_506;
const W2: f64 = 0.125_939_180_544_827;

/// Barycentric coordinates and weights of the 7-point degree-5 triangle rule.
pub const TRIANGLE_DEG5: [([f64; 3], f64); 7] = [
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
    ([A1, B1, B1], W1),
    ([B1, A1, B1], W1),
    ([B1, B1, A1], W1),
    ([A2, B2, B2], W2),
    ([B2, A2, B2], W2),
    ([B2, B2, A2], W2),
];

/// Physical points and weights of the degree-5 rule on triangle `t`.
pub fn triangle_points(t: &[Point; 3]) -> [(Point, f64); 7] {
    let area = signed_area(t[0], t[1], t[2]).abs();
    let mut out = [(Point::default(), 0.0); 7];
    for (k, (l, w)) in TRIANGLE_DEG5.iter().enumerate() {
        let p =
            Point::new(l[0] * t[0].x + l[1] * t[1].x + l[2] * t[2].x, l[0] * t[0].y + l[1] * t[1].y + l[2] * t[2].y);
        out[k] = (p, w * area);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..20 {
            let g = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let s: f64 = g.mapped(0.0, 1.0).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((s - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn triangle_rule_is_degree_five() {
        let t = [Point::new(0.0, 0.0), Point::new(1.0, 0.0), Point::new(0.0, 1.0)];
        let pts = triangle_points(&t);
        // int x^a y^b over the unit simplex = a! b! / (a+b+2)!
        let fact = |n: u32| (1..=n).product::<u32>() as f64;
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                let s: f64 = pts.iter().map(|(p, w)| w * p.x.powi(a as i32) * p.y.powi(b as i32)).sum();
                let exact = fact(a) * fact(b) / fact(a + b + 2);
                assert!((s - exact).abs() < 1e-12, "a={a} b={b}");
            }
        }
    }
}
