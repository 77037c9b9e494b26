//! Gauss rules on the unit interval and on triangles.

use std::f64::consts::PI;

/// Gauss-Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule on `[0, 1]`, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
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
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = 0.5 * (1.0 - x);
            nodes[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Iterate `(node, weight)` pairs mapped onto `[a, b]`.
    pub fn on(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let len = b - a;
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (a + len * x, len * w))
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// Quadrature on the reference triangle `{(a, b) : a, b >= 0, a + b <= 1}`.
///
/// Points are stored as barycentric coordinates `(l0, l1, l2)`; weights sum
/// to one, so integrals over a physical triangle are `area * sum(w * f)`.
#[derive(Debug, Clone)]
pub struct TriangleRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn centroid() -> Self {
        Self {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
        }
    }

    /// Symmetric 6-point rule of degree 4.
    pub fn degree4() -> Self {
        let a = 0.445_948_490_915_965;
        let wa = 0.223_381_589_678_011;
        let b = 0.091_576_213_509_771;
        let wb = 0.109_951_743_655_322;
        let points = vec![
            [a, a, 1.0 - 2.0 * a],
            [a, 1.0 - 2.0 * a, a],
            [1.0 - 2.0 * a, a, a],
            [b, b, 1.0 - 2.0 * b],
            [b, 1.0 - 2.0 * b, b],
            [1.0 - 2.0 * b, b, b],
        ];
        Self {
            points,
            weights: vec![wa, wa, wa, wb, wb, wb],
        }
    }

    /// Collapsed (Duffy) tensor Gauss rule with `n * n` points, exact for
    /// polynomials of degree `2n - 2`.
    pub fn collapsed(n: usize) -> Self {
        let g = GaussLegendre::new(n);
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&xi, &wx) in g.nodes.iter().zip(&g.weights) {
            for (&eta, &we) in g.nodes.iter().zip(&g.weights) {
                let a = xi;
                let b = (1.0 - xi) * eta;
                points.push([1.0 - a - b, a, b]);
                // Jacobian (1 - xi); reference area 1/2 normalised away.
                weights.push(2.0 * wx * we * (1.0 - xi) * 0.5);
            }
        }
        // Normalise so the weights sum to one.
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Map the rule onto a physical triangle: `(point, weight)` with weights
    /// scaled by the triangle area.
    pub fn on(&self, tri: &[[f64; 2]; 3]) -> Vec<([f64; 2], f64)> {
        let area = triangle_area(tri);
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(l, &w)| {
                let x = l[0] * tri[0][0] + l[1] * tri[1][0] + l[2] * tri[2][0];
                let y = l[0] * tri[0][1] + l[1] * tri[1][1] + l[2] * tri[2][1];
                ([x, y], w * area)
            })
            .collect()
    }
}

pub(crate) fn triangle_area(t: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..12 {
            let g = GaussLegendre::new(n);
            for deg in 0..(2 * n) {
                let approx: f64 = g.on(0.0, 1.0).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((approx - exact).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        let tri = [[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        // int x^2 y over the triangle = 2! 1! / 5! * 2 * area * 2^2 * 1 ... check numerically
        // via a dense collapsed rule instead of a closed form.
        let reference: f64 = TriangleRule::collapsed(12)
            .on(&tri)
            .iter()
            .map(|(p, w)| w * p[0] * p[0] * p[1])
            .sum();
        // x = 2a, y = b on the unit triangle: 8 * int a^2 b = 8 * 2/120 = 2/15.
        assert!((reference - 2.0 / 15.0).abs() < 1e-14);
        for rule in [TriangleRule::degree4(), TriangleRule::collapsed(3)] {
            let v: f64 = rule.on(&tri).iter().map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
            assert!((v - 2.0 / 15.0).abs() < 1e-12);
        }
        let area: f64 = TriangleRule::centroid().on(&tri).iter().map(|(_, w)| w).sum();
        assert!((area - 1.0).abs() < 1e-15);
    }
}
