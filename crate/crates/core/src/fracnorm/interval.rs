//! One-dimensional assembly of
//! `S_kl = ∬_{Ω×Ω} Δφ_k Δφ_l |x-y|^{-1-2s} + 2 ∫_Ω φ_k φ_l ρ`.
//!
//! Cell pairs are split by adjacency. For a cell T with neighbourhood
//! N(T) = T ∪ neighbours, the far-field part of the double integral and the
//! complement term combine into `2 ∫_T φ_k φ_l ρ_{N(T)}` with
//! `ρ_{[p,q]}(x) = ((x-p)^{-2s} + (q-x)^{-2s}) / 2s`, integrated exactly.

use faer::Mat;

use super::QuadConfig;
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::GaussLegendre;

struct Cell {
    x0: f64,
    x1: f64,
    v: [usize; 2],
}

pub(super) fn seminorm_matrix(mesh: &Mesh, s: f64, quad: &QuadConfig) -> Result<Mat<f64>> {
    let n = mesh.n_vertices();
    let mut cells: Vec<Cell> = (0..mesh.n_cells())
        .map(|k| {
            let c = mesh.cell(k);
            let (a, b) = (mesh.coords[c[0]], mesh.coords[c[1]]);
            if a < b {
                Cell { x0: a, x1: b, v: [c[0], c[1]] }
            } else {
                Cell { x0: b, x1: a, v: [c[1], c[0]] }
            }
        })
        .collect();
    cells.sort_by(|a, b| a.x0.total_cmp(&b.x0));
    for w in cells.windows(2) {
        if w[0].v[1] != w[1].v[0] {
            return Err(Error::Assembly("1D mesh must be a connected interval".into()));
        }
    }
    let nc = cells.len();
    let mut a = Mat::<f64>::zeros(n, n);
    let eta = GaussLegendre::new(quad.singular);
    let near = GaussLegendre::new(quad.singular);
    let far = GaussLegendre::new(quad.regular);

    for (t, c) in cells.iter().enumerate() {
        let h = c.x1 - c.x0;
        let g = [-1.0 / h, 1.0 / h];
        // Identical cell: ∫∫ |x-y|^{1-2s} = 2 h^{3-2s} / ((2-2s)(3-2s)).
        let self_int = 2.0 * h.powf(3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
        for p in 0..2 {
            for q in 0..2 {
                a[(c.v[p], c.v[q])] += g[p] * g[q] * self_int;
            }
        }

        // Neighbourhood complement term.
        let p_end = if t > 0 { cells[t - 1].x0 } else { c.x0 };
        let q_end = if t + 1 < nc { cells[t + 1].x1 } else { c.x1 };
        for p in 0..2 {
            for q in 0..2 {
                let v = 2.0 * complement_integral(c, p, q, p_end, q_end, s);
                a[(c.v[p], c.v[q])] += v;
            }
        }

        // Adjacent pair (T, right neighbour), counted for both orders.
        if t + 1 < nc {
            let r = &cells[t + 1];
            let j = adjacent_pair(h, r.x1 - r.x0, s, &eta);
            let verts = [c.v[0], c.v[1], r.v[1]];
            for p in 0..3 {
                for q in 0..3 {
                    a[(verts[p], verts[q])] += 2.0 * j[p][q];
                }
            }
        }

        // Separated pairs: −2 ∫_T ∫_T' φ_a(x) φ_b(y) k, both orders.
        for r in cells.iter().skip(t + 2) {
            let gap = r.x0 - c.x1;
            let len = h.max(r.x1 - r.x0);
            let rule = if gap < 2.0 * len { &near } else { &far };
            let mut b = [[0.0; 2]; 2];
            for (x, wx) in rule.on(c.x0, c.x1) {
                let lx = [(c.x1 - x) / h, (x - c.x0) / h];
                let hr = r.x1 - r.x0;
                for (y, wy) in rule.on(r.x0, r.x1) {
                    let ly = [(r.x1 - y) / hr, (y - r.x0) / hr];
                    let k = wx * wy * (y - x).powf(-1.0 - 2.0 * s);
                    for p in 0..2 {
                        for q in 0..2 {
                            b[p][q] += k * lx[p] * ly[q];
                        }
                    }
                }
            }
            for p in 0..2 {
                for q in 0..2 {
                    a[(c.v[p], r.v[q])] -= 2.0 * b[p][q];
                    a[(r.v[q], c.v[p])] -= 2.0 * b[p][q];
                }
            }
        }
    }
    Ok(a)
}

/// `∫_{x0}^{x1} φ_p φ_q ρ_{[pe,qe]}` in closed form. Both hats are linear, so
/// the product is a quadratic in the distance to either patch end.
fn complement_integral(c: &Cell, p: usize, q: usize, pe: f64, qe: f64, s: f64) -> f64 {
    let h = c.x1 - c.x0;
    // φ(x) = α + β x for the two local hats.
    let lin = |i: usize| -> (f64, f64) {
        if i == 0 { (c.x1 / h, -1.0 / h) } else { (-c.x0 / h, 1.0 / h) }
    };
    let (a1, b1) = lin(p);
    let (a2, b2) = lin(q);
    let e = -2.0 * s;
    // ∫_{lo}^{hi} (c0 + c1 u + c2 u²) u^e du
    let moment = |c0: f64, c1: f64, c2: f64, lo: f64, hi: f64| -> f64 {
        let term = |m: i32, cm: f64| {
            let k = m as f64 + 1.0 + e;
            let f = |u: f64| if u > 0.0 { u.powf(k) } else { 0.0 };
            cm * (f(hi) - f(lo)) / k
        };
        term(0, c0) + term(1, c1) + term(2, c2)
    };
    // Left end, u = x - pe: φ = (α + β pe) + β u.
    let (l1, m1) = (a1 + b1 * pe, b1);
    let (l2, m2) = (a2 + b2 * pe, b2);
    let left = moment(l1 * l2, l1 * m2 + l2 * m1, m1 * m2, c.x0 - pe, c.x1 - pe);
    // Right end, v = qe - x: φ = (α + β qe) − β v.
    let (r1, n1) = (a1 + b1 * qe, -b1);
    let (r2, n2) = (a2 + b2 * qe, -b2);
    let right = moment(r1 * r2, r1 * n2 + r2 * n1, n1 * n2, qe - c.x1, qe - c.x0);
    (left + right) / (2.0 * s)
}

/// `∫_T ∫_T' Δφ_k Δφ_l |x-y|^{-1-2s}` for T = [x0-h1, x0], T' = [x0, x0+h2]
/// and the three hats (left, shared, right) touching the pair.
///
/// With `x = x0 - a`, `y = x0 + b`, `Δφ = -(g1 a + g2 b)` where g1, g2 are the
/// slopes on T and T'. The square [0,h1]×[0,h2] is split along its diagonal;
/// on each triangle a Duffy map makes the radial integral analytic
/// (`∫ ξ^{2-2s} = 1/(3-2s)`) and leaves a smooth integral in η.
fn adjacent_pair(h1: f64, h2: f64, s: f64, rule: &GaussLegendre) -> [[f64; 3]; 3] {
    let g1 = [-1.0 / h1, 1.0 / h1, 0.0];
    let g2 = [0.0, -1.0 / h2, 1.0 / h2];
    let radial = 1.0 / (3.0 - 2.0 * s);
    let mut out = [[0.0; 3]; 3];
    for (eta, w) in rule.on(0.0, 1.0) {
        // Triangle b <= a h2/h1: a = ξ h1, b = ξ η h2.
        let ka = (h1 + eta * h2).powf(-1.0 - 2.0 * s) * h1 * h2 * w * radial;
        // Triangle a <= b h1/h2: b = ξ h2, a = ξ η h1.
        let kb = (eta * h1 + h2).powf(-1.0 - 2.0 * s) * h1 * h2 * w * radial;
        for p in 0..3 {
            let da = g1[p] * h1 + g2[p] * eta * h2;
            let db = g1[p] * eta * h1 + g2[p] * h2;
            for q in 0..3 {
                let ea = g1[q] * h1 + g2[q] * eta * h2;
                let eb = g1[q] * eta * h1 + g2[q] * h2;
                out[p][q] += ka * da * ea + kb * db * eb;
            }
        }
    }
    out
}
