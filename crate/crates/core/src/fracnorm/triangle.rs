//! Two-dimensional assembly of
//! `S_kl = ∬_{Ω×Ω} Δφ_k Δφ_l |x-y|^{-2-2s} + 2 ∫_Ω φ_k φ_l ρ`.
//!
//! For every triangle T let N(T) be the patch of triangles sharing a vertex
//! with T. Pairs inside the patch carry the singularity and are integrated
//! in polar coordinates centred at the outer quadrature point, with the
//! radial integral done exactly. Pairs outside the patch contribute only
//! `-2 ∫_T ∫_T' φ_k(x) φ_l(y) k`, while their diagonal parts merge with the
//! complement term into `2 ∫_T φ_k φ_l ρ_{N(T)}`, where
//! `ρ_{N(T)}(x) = ∫_{ℝ²∖N(T)} |x-y|^{-2-2s} dy` is evaluated by casting rays
//! against the patch boundary.

use std::collections::HashMap;
use std::f64::consts::PI;

use faer::Mat;

use super::QuadConfig;
use crate::error::Result;
use crate::mesh::Mesh;
use crate::quadrature::{GaussLegendre, TriangleRule};

/// Affine data of one triangle: `λ_a(x) = c[a] + g[a]·x`.
struct Tri {
    p: [[f64; 2]; 3],
    v: [usize; 3],
    c: [f64; 3],
    g: [[f64; 2]; 3],
    centroid: [f64; 2],
    diam: f64,
    on_boundary: bool,
}

impl Tri {
    fn new(mesh: &Mesh, k: usize) -> Self {
        let c = mesh.cell(k);
        let p = mesh.triangle(k);
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut g = [[0.0; 2]; 3];
        let mut cc = [0.0; 3];
        for a in 0..3 {
            let (b, d) = ((a + 1) % 3, (a + 2) % 3);
            // λ_a vanishes on edge (b, d) and is one at vertex a.
            g[a] = [(p[b][1] - p[d][1]) / det, (p[d][0] - p[b][0]) / det];
            cc[a] = 1.0 - g[a][0] * p[a][0] - g[a][1] * p[a][1];
        }
        let centroid = [
            (p[0][0] + p[1][0] + p[2][0]) / 3.0,
            (p[0][1] + p[1][1] + p[2][1]) / 3.0,
        ];
        Tri {
            p,
            v: [c[0], c[1], c[2]],
            c: cc,
            g,
            centroid,
            diam: mesh.cell_diameter(k),
            on_boundary: c.iter().any(|&i| mesh.boundary[i]),
        }
    }

    fn local(&self, vertex: usize) -> Option<usize> {
        self.v.iter().position(|&u| u == vertex)
    }

    fn eval(&self, a: usize, x: [f64; 2]) -> f64 {
        self.c[a] + self.g[a][0] * x[0] + self.g[a][1] * x[1]
    }

    /// Parameter interval `[r_in, r_out]` of the ray `x + r e` inside the
    /// triangle, clipped to `r >= 0`.
    fn clip(&self, x: [f64; 2], e: [f64; 2]) -> Option<(f64, f64)> {
        let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
        for a in 0..3 {
            // λ_a(x + r e) >= 0
            let base = self.eval(a, x);
            let slope = self.g[a][0] * e[0] + self.g[a][1] * e[1];
            if slope > 0.0 {
                lo = lo.max(-base / slope);
            } else if slope < 0.0 {
                hi = hi.min(-base / slope);
            } else if base < 0.0 {
                return None;
            }
        }
        (hi > lo).then_some((lo, hi))
    }
}

fn angle(x: [f64; 2], y: [f64; 2]) -> f64 {
    (y[1] - x[1]).atan2(y[0] - x[0])
}

/// `∫_{r0}^{r1} r^{e-1} dr` for `e = n - 2s`.
fn radial(e: f64, r0: f64, r1: f64) -> f64 {
    if e.abs() < 1e-12 {
        (r1 / r0).ln()
    } else {
        (r1.powf(e) - r0.powf(e)) / e
    }
}

struct Output {
    trip: Vec<(usize, usize, f64)>,
    strip: Vec<f64>,
}

pub(super) fn seminorm_matrix(mesh: &Mesh, s: f64, quad: &QuadConfig) -> Result<Mat<f64>> {
    let n = mesh.n_vertices();
    let tris: Vec<Tri> = (0..mesh.n_cells()).map(|k| Tri::new(mesh, k)).collect();
    let vertex_cells = mesh.vertex_cells();
    let ctx = Context {
        tris: &tris,
        vertex_cells: &vertex_cells,
        s,
        n,
        inner: TriangleRule::collapsed(quad.singular),
        inner_fine: TriangleRule::collapsed(2 * quad.singular),
        far: if quad.regular <= 4 {
            TriangleRule::degree4()
        } else {
            TriangleRule::collapsed(quad.regular)
        },
        theta: GaussLegendre::new(quad.singular),
    };
    let mut a = Mat::<f64>::zeros(n, n);
    // Fixed chunking keeps the reduction order independent of the number
    // of worker threads.
    const CHUNK: usize = 32;
    let ids: Vec<usize> = (0..tris.len()).collect();
    for chunk in ids.chunks(CHUNK) {
        #[cfg(feature = "parallel")]
        let outs: Vec<Output> = {
            use rayon::prelude::*;
            chunk.par_iter().map(|&t| ctx.triangle(t)).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let outs: Vec<Output> = chunk.iter().map(|&t| ctx.triangle(t)).collect();
        for (&t, out) in chunk.iter().zip(outs) {
            for (i, j, v) in out.trip {
                a[(i, j)] += v;
            }
            for (la, &row) in tris[t].v.iter().enumerate() {
                let strip = &out.strip[la * n..(la + 1) * n];
                for (col, &v) in strip.iter().enumerate() {
                    if v != 0.0 {
                        a[(row, col)] += v;
                    }
                }
            }
        }
    }
    Ok(a)
}

struct Context<'a> {
    tris: &'a [Tri],
    vertex_cells: &'a [Vec<usize>],
    s: f64,
    n: usize,
    inner: TriangleRule,
    inner_fine: TriangleRule,
    far: TriangleRule,
    theta: GaussLegendre,
}

impl Context<'_> {
    fn triangle(&self, t: usize) -> Output {
        let tri = &self.tris[t];
        let mut patch: Vec<usize> = tri
            .v
            .iter()
            .flat_map(|&v| self.vertex_cells[v].iter().copied())
            .collect();
        patch.sort_unstable();
        patch.dedup();

        let mut trip = Vec::new();
        let xrule = if tri.on_boundary { &self.inner_fine } else { &self.inner };
        let xpts = xrule.on(&tri.p);

        self.self_pair(tri, &xpts, &mut trip);
        for &u in &patch {
            if u > t {
                self.touching_pair(tri, &self.tris[u], &xpts, &mut trip);
            }
        }
        self.complement(tri, &patch, &xpts, &mut trip);

        // Separated pairs: only T' > T; each is added with weight 4 to the
        // rows of T and the caller symmetrises.
        let mut strip = vec![0.0; 3 * self.n];
        let far_x = self.far.on(&tri.p);
        let near_x = &self.inner;
        for (u, other) in self.tris.iter().enumerate().skip(t + 1) {
            if patch.binary_search(&u).is_ok() {
                continue;
            }
            let d = ((other.centroid[0] - tri.centroid[0]).powi(2)
                + (other.centroid[1] - tri.centroid[1]).powi(2))
            .sqrt();
            let b = if d < 3.0 * tri.diam.max(other.diam) {
                self.separated(&near_x.on(&tri.p), &near_x.on(&other.p), tri, other)
            } else {
                self.separated(&far_x, &self.far.on(&other.p), tri, other)
            };
            for la in 0..3 {
                for lb in 0..3 {
                    strip[la * self.n + other.v[lb]] -= 4.0 * b[la][lb];
                }
            }
        }
        Output { trip, strip }
    }

    fn separated(
        &self,
        xs: &[([f64; 2], f64)],
        ys: &[([f64; 2], f64)],
        tx: &Tri,
        ty: &Tri,
    ) -> [[f64; 3]; 3] {
        let ex = -(1.0 + self.s);
        let mut b = [[0.0; 3]; 3];
        for &(x, wx) in xs {
            let lx = [tx.eval(0, x), tx.eval(1, x), tx.eval(2, x)];
            let mut acc = [0.0; 3];
            for &(y, wy) in ys {
                let r2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
                let k = wy * r2.powf(ex);
                for lb in 0..3 {
                    acc[lb] += k * ty.eval(lb, y);
                }
            }
            for la in 0..3 {
                for lb in 0..3 {
                    b[la][lb] += wx * lx[la] * acc[lb];
                }
            }
        }
        b
    }

    /// `∫_T ∫_T (∇φ_a·(x-y)) (∇φ_b·(x-y)) |x-y|^{-2-2s}` in polar form:
    /// `∫_T ∫_θ (g_a·e)(g_b·e) R(θ)^{2-2s} / (2-2s)`.
    fn self_pair(&self, tri: &Tri, xpts: &[([f64; 2], f64)], trip: &mut Vec<(usize, usize, f64)>) {
        let e2 = 2.0 - 2.0 * self.s;
        let mut loc = [[0.0; 3]; 3];
        for &(x, wx) in xpts {
            let mut th = [angle(x, tri.p[0]), angle(x, tri.p[1]), angle(x, tri.p[2])];
            th.sort_by(f64::total_cmp);
            let bounds = [(th[0], th[1]), (th[1], th[2]), (th[2], th[0] + 2.0 * PI)];
            for (t0, t1) in bounds {
                for (theta, wt) in self.theta.on(t0, t1) {
                    let e = [theta.cos(), theta.sin()];
                    let Some((_, r)) = tri.clip(x, e) else { continue };
                    let w = wx * wt * r.powf(e2) / e2;
                    let ge = [
                        tri.g[0][0] * e[0] + tri.g[0][1] * e[1],
                        tri.g[1][0] * e[0] + tri.g[1][1] * e[1],
                        tri.g[2][0] * e[0] + tri.g[2][1] * e[1],
                    ];
                    for a in 0..3 {
                        for b in 0..3 {
                            loc[a][b] += w * ge[a] * ge[b];
                        }
                    }
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                trip.push((tri.v[a], tri.v[b], loc[a][b]));
            }
        }
    }

    /// Touching pair `T ≠ T'`, both orders. For `y = x + r e ∈ T'` a hat
    /// difference is `A - r B` with `A = φ|_T(x) - φ|_T'(x)` and
    /// `B = ∇φ|_T'·e`, so every radial integral is a power of `r`.
    fn touching_pair(
        &self,
        tx: &Tri,
        ty: &Tri,
        xpts: &[([f64; 2], f64)],
        trip: &mut Vec<(usize, usize, f64)>,
    ) {
        let mut verts: Vec<usize> = tx.v.to_vec();
        for &v in &ty.v {
            if !verts.contains(&v) {
                verts.push(v);
            }
        }
        let nl = verts.len();
        let in_x: Vec<Option<usize>> = verts.iter().map(|&v| tx.local(v)).collect();
        let in_y: Vec<Option<usize>> = verts.iter().map(|&v| ty.local(v)).collect();
        let s2 = 2.0 * self.s;
        let mut loc = vec![0.0; nl * nl];
        let mut amp = vec![0.0; nl];
        let mut slope = vec![0.0; nl];
        for &(x, wx) in xpts {
            for i in 0..nl {
                let fx = in_x[i].map_or(0.0, |a| tx.eval(a, x));
                let fy = in_y[i].map_or(0.0, |b| ty.eval(b, x));
                amp[i] = fx - fy;
            }
            // Angular span of T' seen from x (< π since x ∉ T').
            let base = angle(x, ty.p[0]);
            let mut th = [0.0, 0.0, 0.0];
            for (k, p) in ty.p.iter().enumerate() {
                let mut d = angle(x, *p) - base;
                if d > PI {
                    d -= 2.0 * PI;
                } else if d < -PI {
                    d += 2.0 * PI;
                }
                th[k] = base + d;
            }
            th.sort_by(f64::total_cmp);
            for (t0, t1) in [(th[0], th[1]), (th[1], th[2])] {
                if t1 - t0 < 1e-15 {
                    continue;
                }
                for (theta, wt) in self.theta.on(t0, t1) {
                    let e = [theta.cos(), theta.sin()];
                    let Some((r0, r1)) = ty.clip(x, e) else { continue };
                    let p0 = radial(-s2, r0, r1);
                    let p1 = radial(1.0 - s2, r0, r1);
                    let p2 = radial(2.0 - s2, r0, r1);
                    for i in 0..nl {
                        slope[i] = in_y[i].map_or(0.0, |b| ty.g[b][0] * e[0] + ty.g[b][1] * e[1]);
                    }
                    let w = 2.0 * wx * wt;
                    for i in 0..nl {
                        for j in 0..nl {
                            loc[i * nl + j] += w
                                * (amp[i] * amp[j] * p0 - (amp[i] * slope[j] + amp[j] * slope[i]) * p1
                                    + slope[i] * slope[j] * p2);
                        }
                    }
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                trip.push((verts[i], verts[j], loc[i * nl + j]));
            }
        }
    }

    /// `2 ∫_T φ_a φ_b ρ_{N(T)}`. Rays from x cross the patch boundary at
    /// `c_1 < c_2 < ...`, alternately leaving and re-entering, so
    /// `ρ = (c_1^{-2s} - c_2^{-2s} + c_3^{-2s} - ...) / 2s`.
    fn complement(
        &self,
        tri: &Tri,
        patch: &[usize],
        xpts: &[([f64; 2], f64)],
        trip: &mut Vec<(usize, usize, f64)>,
    ) {
        let mut count: HashMap<(usize, usize), (usize, [[f64; 2]; 2])> = HashMap::new();
        for &u in patch {
            let o = &self.tris[u];
            for a in 0..3 {
                let b = (a + 1) % 3;
                let key = (o.v[a].min(o.v[b]), o.v[a].max(o.v[b]));
                count.entry(key).or_insert((0, [o.p[a], o.p[b]])).0 += 1;
            }
        }
        let mut edges: Vec<((usize, usize), [[f64; 2]; 2])> = count
            .into_iter()
            .filter(|(_, (c, _))| *c == 1)
            .map(|(k, (_, e))| (k, e))
            .collect();
        edges.sort_by_key(|(k, _)| *k);
        let edges: Vec<[[f64; 2]; 2]> = edges.into_iter().map(|(_, e)| e).collect();

        let s2 = 2.0 * self.s;
        let mut loc = [[0.0; 3]; 3];
        let mut hits = Vec::new();
        for &(x, wx) in xpts {
            let mut th: Vec<f64> = edges
                .iter()
                .flat_map(|e| [angle(x, e[0]), angle(x, e[1])])
                .collect();
            th.sort_by(f64::total_cmp);
            th.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
            let nt = th.len();
            let mut rho = 0.0;
            for k in 0..nt {
                let t0 = th[k];
                let t1 = if k + 1 < nt { th[k + 1] } else { th[0] + 2.0 * PI };
                for (theta, wt) in self.theta.on(t0, t1) {
                    let e = [theta.cos(), theta.sin()];
                    hits.clear();
                    for seg in &edges {
                        if let Some(r) = ray_segment(x, e, seg) {
                            hits.push(r);
                        }
                    }
                    hits.sort_by(f64::total_cmp);
                    let mut acc = 0.0;
                    for (i, &r) in hits.iter().enumerate() {
                        let term = r.powf(-s2);
                        acc += if i % 2 == 0 { term } else { -term };
                    }
                    rho += wt * acc;
                }
            }
            rho /= s2;
            let l = [tri.eval(0, x), tri.eval(1, x), tri.eval(2, x)];
            for a in 0..3 {
                for b in 0..3 {
                    loc[a][b] += 2.0 * wx * rho * l[a] * l[b];
                }
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                trip.push((tri.v[a], tri.v[b], loc[a][b]));
            }
        }
    }
}

/// Distance along `x + r e` to the segment, if the ray hits it.
fn ray_segment(x: [f64; 2], e: [f64; 2], seg: &[[f64; 2]; 2]) -> Option<f64> {
    let d = [seg[1][0] - seg[0][0], seg[1][1] - seg[0][1]];
    let det = e[0] * (-d[1]) - e[1] * (-d[0]);
    if det.abs() < 1e-300 {
        return None;
    }
    let rhs = [seg[0][0] - x[0], seg[0][1] - x[1]];
    let r = (rhs[0] * (-d[1]) - rhs[1] * (-d[0])) / det;
    let t = (e[0] * rhs[1] - e[1] * rhs[0]) / det;
    (r > 0.0 && (0.0..=1.0).contains(&t)).then_some(r)
}
