//! Simplicial meshes of the spatial domain, the uniform time grid, and the
//! space-time DOF layout.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A conforming simplicial mesh in one or two dimensions.
///
/// Coordinates and cells are stored flat: vertex `i` occupies
/// `coords[i*dim..(i+1)*dim]`, cell `k` occupies `cells[k*(dim+1)..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub coords: Vec<f64>,
    pub cells: Vec<usize>,
    pub boundary: Vec<bool>,
    pub h: f64,
}

impl Mesh {
    /// Validate raw data and derive boundary flags and mesh size.
    pub fn new(dim: usize, coords: Vec<f64>, cells: Vec<usize>) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} not in {{1, 2}}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidArgument("coordinate list not a multiple of dim".into()));
        }
        let nv = dim + 1;
        if cells.is_empty() || cells.len() % nv != 0 {
            return Err(Error::InvalidArgument("cell list empty or ragged".into()));
        }
        let n = coords.len() / dim;
        let mut mesh = Mesh {
            dim,
            coords,
            cells,
            boundary: vec![false; n],
            h: 0.0,
        };
        for k in 0..mesh.n_cells() {
            let c = mesh.cell(k);
            if c.iter().any(|&v| v >= n) {
                return Err(Error::InvalidArgument(format!("cell {k} references a missing vertex")));
            }
            for a in 0..nv {
                for b in a + 1..nv {
                    if c[a] == c[b] {
                        return Err(Error::InvalidArgument(format!("cell {k} repeats a vertex")));
                    }
                }
            }
            let m = mesh.cell_measure(k);
            if !(m > 0.0) {
                return Err(Error::Assembly(format!("cell {k} is degenerate (measure {m:e})")));
            }
            mesh.h = mesh.h.max(mesh.cell_diameter(k));
        }
        mesh.boundary = mesh.compute_boundary();
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    /// Vertex as a 2D point; in 1D the second coordinate is zero.
    pub fn point(&self, i: usize) -> [f64; 2] {
        let v = self.vertex(i);
        [v[0], if self.dim == 2 { v[1] } else { 0.0 }]
    }

    pub fn cell(&self, k: usize) -> &[usize] {
        let nv = self.dim + 1;
        &self.cells[k * nv..(k + 1) * nv]
    }

    pub fn triangle(&self, k: usize) -> [[f64; 2]; 3] {
        let c = self.cell(k);
        [self.point(c[0]), self.point(c[1]), self.point(c[2])]
    }

    /// Endpoints of an interval cell, sorted.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        let c = self.cell(k);
        let (a, b) = (self.coords[c[0]], self.coords[c[1]]);
        if a < b { (a, b) } else { (b, a) }
    }

    pub fn cell_measure(&self, k: usize) -> f64 {
        match self.dim {
            1 => {
                let (a, b) = self.interval(k);
                b - a
            }
            _ => crate::quadrature::triangle_area(&self.triangle(k)),
        }
    }

    pub fn cell_diameter(&self, k: usize) -> f64 {
        let c = self.cell(k);
        let mut d: f64 = 0.0;
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let (p, q) = (self.point(c[a]), self.point(c[b]));
                d = d.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
            }
        }
        d
    }

    /// Total measure of the meshed domain.
    pub fn measure(&self) -> f64 {
        (0..self.n_cells()).map(|k| self.cell_measure(k)).sum()
    }

    /// Facets (vertex in 1D, edge in 2D) that belong to exactly one cell.
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let mut count: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut order = Vec::new();
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            for skip in 0..c.len() {
                let mut f: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                let e = count.entry(f.clone()).or_insert(0);
                if *e == 0 {
                    order.push(f);
                }
                *e += 1;
            }
        }
        order.into_iter().filter(|f| count[f] < 2).collect()
    }

    fn compute_boundary(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n_vertices()];
        for f in self.boundary_facets() {
            for v in f {
                flags[v] = true;
            }
        }
        flags
    }

    /// Cells incident to each vertex.
    pub fn vertex_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices()];
        for k in 0..self.n_cells() {
            for &v in self.cell(k) {
                out[v].push(k);
            }
        }
        out
    }

    /// Lumped (row-sum) mass of every vertex: `m_i = ∫ φ_i`.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        let share = 1.0 / (self.dim as f64 + 1.0);
        for k in 0..self.n_cells() {
            let meas = self.cell_measure(k) * share;
            for &v in self.cell(k) {
                m[v] += meas;
            }
        }
        m
    }

    /// Evaluate the P1 interpolant of `values` at `x`. Returns `None` if `x`
    /// lies outside every cell (with a small tolerance).
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> Option<f64> {
        const TOL: f64 = 1e-12;
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            if self.dim == 1 {
                let (a, b) = (self.coords[c[0]], self.coords[c[1]]);
                let t = (x[0] - a) / (b - a);
                if (-TOL..=1.0 + TOL).contains(&t) {
                    return Some((1.0 - t) * values[c[0]] + t * values[c[1]]);
                }
            } else {
                let l = barycentric(&self.triangle(k), [x[0], x[1]]);
                if l.iter().all(|&li| li >= -TOL) {
                    return Some(l[0] * values[c[0]] + l[1] * values[c[1]] + l[2] * values[c[2]]);
                }
            }
        }
        None
    }

    /// Plain-text export: header `dim N n_cells`, coordinate lines, cell lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.dim, self.n_vertices(), self.n_cells());
        for i in 0..self.n_vertices() {
            let v: Vec<String> = self.vertex(i).iter().map(|x| format!("{x:?}")).collect();
            let _ = writeln!(s, "{}", v.join(" "));
        }
        for k in 0..self.n_cells() {
            let v: Vec<String> = self.cell(k).iter().map(|x| x.to_string()).collect();
            let _ = writeln!(s, "{}", v.join(" "));
        }
        s
    }

    /// Parse the plain-text format written by [`Mesh::to_text`]. Blank lines
    /// and lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let bad = |line: usize, msg: &str| Error::Parse(format!("mesh line {line}: {msg}"));
        let (ln, header) = lines.next().ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(ln, "header must be `dim N n_cells`"))?;
        if head.len() != 3 {
            return Err(bad(ln, "header must be `dim N n_cells`"));
        }
        let (dim, n, nc) = (head[0], head[1], head[2]);
        let mut coords = Vec::with_capacity(n * dim);
        for _ in 0..n {
            let (ln, l) = lines.next().ok_or_else(|| Error::Parse("truncated coordinates".into()))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "invalid coordinate"))?;
            if v.len() != dim {
                return Err(bad(ln, "wrong number of coordinates"));
            }
            coords.extend(v);
        }
        let mut cells = Vec::with_capacity(nc * (dim + 1));
        for _ in 0..nc {
            let (ln, l) = lines.next().ok_or_else(|| Error::Parse("truncated cells".into()))?;
            let v: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad(ln, "invalid vertex index"))?;
            if v.len() != dim + 1 {
                return Err(bad(ln, "wrong number of cell vertices"));
            }
            cells.extend(v);
        }
        if let Some((ln, _)) = lines.next() {
            return Err(bad(ln, "trailing data"));
        }
        Mesh::new(dim, coords, cells)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn barycentric(t: &[[f64; 2]; 3], x: [f64; 2]) -> [f64; 3] {
    let det = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]);
    let l1 = ((x[0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (x[1] - t[0][1])) / det;
    let l2 = ((t[1][0] - t[0][0]) * (x[1] - t[0][1]) - (x[0] - t[0][0]) * (t[1][1] - t[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Uniform mesh of `[a, b]` with `n` vertices.
pub fn build_interval_mesh(a: f64, b: f64, n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("interval mesh needs N >= 2, got {n}")));
    }
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty interval ({a}, {b})")));
    }
    let h = (b - a) / (n - 1) as f64;
    let mut coords: Vec<f64> = (0..n).map(|i| a + h * i as f64).collect();
    coords[n - 1] = b;
    let cells = (0..n - 1).flat_map(|i| [i, i + 1]).collect();
    let mut mesh = Mesh::new(1, coords, cells)?;
    mesh.h = h;
    Ok(mesh)
}

/// Structured triangulation of `side × side` with `n` vertices per side.
///
/// Each square is cut along the diagonal that points towards the centre of
/// the domain, so the mesh is symmetric under reflection in both axes
/// whenever the number of squares per side is even.
pub fn build_square_mesh(side: (f64, f64), n: usize) -> Result<Mesh> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("square mesh needs n_per_side >= 2, got {n}")));
    }
    let (a, b) = side;
    if !(a < b) {
        return Err(Error::InvalidArgument(format!("empty side ({a}, {b})")));
    }
    let h = (b - a) / (n - 1) as f64;
    let x = |i: usize| if i == n - 1 { b } else { a + h * i as f64 };
    let mut coords = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            coords.push(x(i));
            coords.push(x(j));
        }
    }
    let id = |i: usize, j: usize| j * n + i;
    let mid = 0.5 * (a + b);
    let mut cells = Vec::with_capacity(12 * (n - 1) * (n - 1));
    for j in 0..n - 1 {
        for i in 0..n - 1 {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            let cx = 0.5 * (x(i) + x(i + 1)) - mid;
            let cy = 0.5 * (x(j) + x(j + 1)) - mid;
            if cx * cy >= 0.0 {
                cells.extend([v00, v10, v11, v00, v11, v01]);
            } else {
                cells.extend([v00, v10, v01, v10, v11, v01]);
            }
        }
    }
    Mesh::new(2, coords, cells)
}

/// Equidistant nodes `0 = t_1 < ... < t_M = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub t_final: f64,
    pub nodes: Vec<f64>,
}

impl TimeGrid {
    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    pub fn dt(&self) -> f64 {
        self.t_final / (self.m() - 1) as f64
    }

    /// Lumped temporal weights `∫ φ_j dt` (trapezoidal rule).
    pub fn lumped_weights(&self) -> Vec<f64> {
        let dt = self.dt();
        let m = self.m();
        (0..m)
            .map(|j| if j == 0 || j == m - 1 { 0.5 * dt } else { dt })
            .collect()
    }
}

pub fn build_time_grid(t_final: f64, m: usize) -> Result<TimeGrid> {
    if !(t_final > 0.0) {
        return Err(Error::InvalidArgument(format!("final time must be positive, got {t_final}")));
    }
    if m < 2 {
        return Err(Error::InvalidArgument(format!("time grid needs M >= 2, got {m}")));
    }
    let dt = t_final / (m - 1) as f64;
    let mut nodes: Vec<f64> = (0..m).map(|j| dt * j as f64).collect();
    nodes[m - 1] = t_final;
    Ok(TimeGrid { t_final, nodes })
}

/// Space-time DOF layout. Ordering is time-major: all `N` spatial values of
/// time node 0, then time node 1, and so on.
///
/// Every spatial vertex, including those on the boundary, is a DOF of the
/// bound variable `w`; the nonlocal norm penalises boundary values through
/// its complement term instead of a Dirichlet condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub n: usize,
    pub m: usize,
}

impl DofMap {
    pub fn new(mesh: &Mesh, grid: &TimeGrid) -> Self {
        Self {
            n: mesh.n_vertices(),
            m: grid.m(),
        }
    }

    pub fn spatial_dofs(&self) -> usize {
        self.n
    }

    pub fn spacetime_dofs(&self) -> usize {
        self.n * self.m
    }

    /// Linear index of spatial vertex `i` at time node `j`.
    #[inline]
    pub fn flatten(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn unflatten(&self, idx: usize) -> (usize, usize) {
        (idx % self.n, idx / self.n)
    }

    /// The bound `w_i` that constrains space-time DOF `idx`.
    #[inline]
    pub fn constraint_partner(&self, idx: usize) -> usize {
        idx % self.n
    }
}
