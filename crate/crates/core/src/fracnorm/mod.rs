//! Discrete inner products: spatial and space-time mass, and the stiffness
//! matrix of the fractional space H̃ˢ(Ω) (zero extension, Hˢ(ℝᵈ) norm).
//!
//! The stiffness matrix represents the full inner product
//!
//! ```text
//! (u, v)_W = ∫_Ω u v + (c_{d,s}/2) [ ∬_{Ω×Ω} (u(x)-u(y))(v(x)-v(y)) k(x,y)
//!                                    + 2 ∫_Ω u v ρ ]
//! ```
//!
//! with `k(x,y) = |x-y|^{-d-2s}` and `ρ(x) = ∫_{ℝᵈ∖Ω} k(x,y) dy`.

mod interval;
mod triangle;

use std::io::Write as _;
use std::path::Path;

use faer::Mat;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, TimeGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalKernel {
    pub s: f64,
    pub d: usize,
    pub c_ds: f64,
}

impl FractionalKernel {
    pub fn new(s: f64, d: usize) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidArgument(format!("fractional order s = {s} not in (0, 1)")));
        }
        if d != 1 && d != 2 {
            return Err(Error::InvalidArgument(format!("dimension {d} not in {{1, 2}}")));
        }
        Ok(Self {
            s,
            d,
            c_ds: normalization_constant(d, s),
        })
    }
}

/// `c_{d,s} = s 2^{2s} Γ(s + d/2) / (π^{d/2} Γ(1 - s))`.
pub fn normalization_constant(d: usize, s: f64) -> f64 {
    let half_d = d as f64 / 2.0;
    s * 4f64.powf(s) * libm::tgamma(s + half_d)
        / (std::f64::consts::PI.powf(half_d) * libm::tgamma(1.0 - s))
}

/// Quadrature orders (Gauss points per direction) for the stiffness
/// assembly: `regular` for well-separated cell pairs, `singular` for
/// touching or nearby pairs and the complement term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadConfig {
    pub regular: usize,
    pub singular: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            regular: 4,
            singular: 6,
        }
    }
}

/// Sparse symmetric matrix in compressed-row form.
pub type SparseSym = CsMat<f64>;

pub(crate) fn from_triplets(n: usize, trip: &[(usize, usize, f64)]) -> SparseSym {
    let mut t = TriMat::with_capacity((n, n), trip.len());
    for &(i, j, v) in trip {
        t.add_triplet(i, j, v);
    }
    t.to_csr()
}

pub fn sparse_get(m: &SparseSym, i: usize, j: usize) -> f64 {
    m.get(i, j).copied().unwrap_or(0.0)
}

pub fn sparse_mul_vec(m: &SparseSym, x: &[f64], y: &mut [f64]) {
    y.iter_mut().for_each(|v| *v = 0.0);
    sprs::prod::mul_acc_mat_vec_csr(m.view(), x, y);
}

pub fn sparse_row_sums(m: &SparseSym) -> Vec<f64> {
    m.outer_iterator().map(|row| row.data().iter().sum()).collect()
}

pub fn sparse_triplets(m: &SparseSym) -> Vec<(usize, usize, f64)> {
    m.iter().map(|(&v, (i, j))| (i, j, v)).collect()
}

/// Consistent P1 mass matrix `∫ φ_k φ_l`.
pub fn assemble_mass(mesh: &Mesh) -> Result<SparseSym> {
    let mut trip = Vec::with_capacity(mesh.n_cells() * (mesh.dim + 1).pow(2));
    let nv = mesh.dim + 1;
    // ∫_T λ_a λ_b = |T| (1 + δ_ab) / ((d+1)(d+2))
    let denom = ((mesh.dim + 1) * (mesh.dim + 2)) as f64;
    for k in 0..mesh.n_cells() {
        let meas = mesh.cell_measure(k);
        if !(meas > 0.0) {
            return Err(Error::Assembly(format!("cell {k} is degenerate")));
        }
        let c = mesh.cell(k);
        for a in 0..nv {
            for b in 0..nv {
                let f = if a == b { 2.0 } else { 1.0 };
                trip.push((c[a], c[b], meas * f / denom));
            }
        }
    }
    Ok(from_triplets(mesh.n_vertices(), &trip))
}

/// P1 mass matrix of the time grid (tridiagonal).
pub fn assemble_time_mass(grid: &TimeGrid) -> SparseSym {
    let m = grid.m();
    let dt = grid.dt();
    let mut trip = Vec::with_capacity(4 * m);
    for j in 0..m - 1 {
        trip.push((j, j, dt / 3.0));
        trip.push((j + 1, j + 1, dt / 3.0));
        trip.push((j, j + 1, dt / 6.0));
        trip.push((j + 1, j, dt / 6.0));
    }
    from_triplets(m, &trip)
}

/// Space-time mass `M_t ⊗ M_Ω`, applied without forming the product.
#[derive(Debug, Clone)]
pub struct SpaceTimeMass {
    pub space: SparseSym,
    pub time: SparseSym,
}

impl SpaceTimeMass {
    pub fn dim(&self) -> usize {
        self.space.rows() * self.time.rows()
    }

    /// `y = (M_t ⊗ M_Ω) x` with time-major layout.
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.space.rows(), self.time.rows());
        crate::error::check_len("space-time vector", n * m, x.len())?;
        let mut spatial = vec![0.0; n * m];
        for j in 0..m {
            sparse_mul_vec(
                &self.space,
                &x[j * n..(j + 1) * n],
                &mut spatial[j * n..(j + 1) * n],
            );
        }
        let mut y = vec![0.0; n * m];
        for (j, row) in self.time.outer_iterator().enumerate() {
            for (l, &c) in row.iter() {
                for i in 0..n {
                    y[j * n + i] += c * spatial[l * n + i];
                }
            }
        }
        Ok(y)
    }

    pub fn inner(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let mx = self.apply(x)?;
        crate::error::check_len("space-time vector", mx.len(), y.len())?;
        Ok(mx.iter().zip(y).map(|(a, b)| a * b).sum())
    }

    /// Entry `((i,j),(k,l))` of the Kronecker product.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        let n = self.space.rows();
        sparse_get(&self.time, row / n, col / n) * sparse_get(&self.space, row % n, col % n)
    }
}

pub fn assemble_spacetime_mass(mesh: &Mesh, grid: &TimeGrid) -> Result<SpaceTimeMass> {
    Ok(SpaceTimeMass {
        space: assemble_mass(mesh)?,
        time: assemble_time_mass(grid),
    })
}

/// `∫_Ω (∫_I v dt) z dx` through the space-time mass, with `z` extended
/// constantly in time.
pub fn time_average_pairing(mass: &SpaceTimeMass, v: &[f64], z: &[f64]) -> Result<f64> {
    let (n, m) = (mass.space.rows(), mass.time.rows());
    crate::error::check_len("space-time vector", n * m, v.len())?;
    crate::error::check_len("spatial vector", n, z.len())?;
    // Σ_l (M_t)_{jl} summed over j is ∫ φ_l dt; collapse time first.
    let tw = sparse_row_sums(&mass.time);
    let mut avg = vec![0.0; n];
    for (j, w) in tw.iter().enumerate() {
        for i in 0..n {
            avg[i] += w * v[j * n + i];
        }
    }
    let mut mz = vec![0.0; n];
    sparse_mul_vec(&mass.space, z, &mut mz);
    Ok(avg.iter().zip(&mz).map(|(a, b)| a * b).sum())
}

/// Dense stiffness matrix of the full H̃ˢ(Ω) inner product.
pub fn assemble_fractional_stiffness(
    mesh: &Mesh,
    kernel: &FractionalKernel,
    quad: &QuadConfig,
) -> Result<Mat<f64>> {
    if kernel.d != mesh.dim {
        return Err(Error::InvalidArgument(format!(
            "kernel dimension {} does not match mesh dimension {}",
            kernel.d, mesh.dim
        )));
    }
    if quad.regular == 0 || quad.singular == 0 {
        return Err(Error::InvalidArgument("quadrature orders must be positive".into()));
    }
    if kernel.s >= 0.5 {
        log::warn!(
            "fractional order s = {} >= 1/2: boundary values are not controlled, accuracy is not certified",
            kernel.s
        );
    }
    let seminorm = match mesh.dim {
        1 => interval::seminorm_matrix(mesh, kernel.s, quad)?,
        _ => triangle::seminorm_matrix(mesh, kernel.s, quad)?,
    };
    let mass = assemble_mass(mesh)?;
    let n = mesh.n_vertices();
    let half_c = 0.5 * kernel.c_ds;
    let mut a = Mat::<f64>::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = half_c * 0.5 * (seminorm[(i, j)] + seminorm[(j, i)]);
        }
    }
    for (i, j, v) in sparse_triplets(&mass) {
        a[(i, j)] += v;
    }
    for j in 0..n {
        for i in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(Error::Assembly(format!("non-finite stiffness entry ({i}, {j})")));
            }
        }
    }
    Ok(a)
}

/// All matrices needed by the discrete problem.
#[derive(Debug, Clone)]
pub struct GramSet {
    pub spacetime: SpaceTimeMass,
    pub stiffness: Mat<f64>,
    /// `∫ φ_i dx`, the lumped spatial mass.
    pub lumped_space: Vec<f64>,
    /// `∫ φ_j dt`, the lumped temporal mass.
    pub lumped_time: Vec<f64>,
}

impl GramSet {
    pub fn assemble(
        mesh: &Mesh,
        grid: &TimeGrid,
        kernel: &FractionalKernel,
        quad: &QuadConfig,
    ) -> Result<Self> {
        Ok(Self {
            spacetime: assemble_spacetime_mass(mesh, grid)?,
            stiffness: assemble_fractional_stiffness(mesh, kernel, quad)?,
            lumped_space: mesh.lumped_mass(),
            lumped_time: grid.lumped_weights(),
        })
    }

    pub fn mass(&self) -> &SparseSym {
        &self.spacetime.space
    }

    pub fn w_inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let mut acc = 0.0;
        for j in 0..n {
            let mut col = 0.0;
            for i in 0..n {
                col += self.stiffness[(i, j)] * x[i];
            }
            acc += col * y[j];
        }
        acc
    }
}

/// Coordinate-list text export: one `row col value` line per nonzero.
pub fn write_coo(path: &Path, entries: impl Iterator<Item = (usize, usize, f64)>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for (i, j, v) in entries {
        if v != 0.0 {
            writeln!(f, "{i} {j} {v:e}")?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn dense_entries(m: &Mat<f64>) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
    (0..m.nrows()).flat_map(move |i| (0..m.ncols()).map(move |j| (i, j, m[(i, j)])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_square_mesh, build_time_grid};

    #[test]
    fn normalization_constant_closed_forms() {
        // d = 1: s 4^s Γ(s + 1/2) / (√π Γ(1 - s)); at s = 1/2 this is 1/π.
        assert!((normalization_constant(1, 0.5) - 1.0 / std::f64::consts::PI).abs() < 1e-14);
        // d = 2, s = 1/2: (1/2)·2·Γ(3/2)/(π Γ(1/2)) = 1/(2π).
        let v = normalization_constant(2, 0.5);
        assert!((v - 0.5 / std::f64::consts::PI).abs() < 1e-14);
        assert!(FractionalKernel::new(1.0, 1).is_err());
    }

    #[test]
    fn mass_examples() {
        let m = build_interval_mesh(-1.0, 1.0, 5).unwrap();
        let h = m.h;
        let mass = assemble_mass(&m).unwrap();
        assert!((sparse_get(&mass, 2, 2) - 2.0 * h / 3.0).abs() < 1e-15);
        assert!((sparse_get(&mass, 2, 3) - h / 6.0).abs() < 1e-15);
        let total: f64 = sparse_row_sums(&mass).iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        let sq = build_square_mesh((-1.0, 1.0), 3).unwrap();
        let total: f64 = sparse_row_sums(&assemble_mass(&sq).unwrap()).iter().sum();
        assert!((total - 4.0).abs() < 1e-14);
    }

    #[test]
    fn spacetime_examples() {
        let mesh = build_interval_mesh(-1.0, 1.0, 2).unwrap();
        let grid = build_time_grid(1.0, 2).unwrap();
        let st = assemble_spacetime_mass(&mesh, &grid).unwrap();
        assert!((sparse_get(&st.time, 0, 0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((sparse_get(&st.time, 0, 1) - 1.0 / 6.0).abs() < 1e-15);
        for r in 0..4 {
            for c in 0..4 {
                let want = sparse_get(&st.time, r / 2, c / 2) * sparse_get(&st.space, r % 2, c % 2);
                assert_eq!(st.entry(r, c), want);
            }
        }
        let mesh = build_interval_mesh(-1.0, 1.0, 7).unwrap();
        let grid = build_time_grid(0.5, 4).unwrap();
        let st = assemble_spacetime_mass(&mesh, &grid).unwrap();
        let ones = vec![1.0; st.dim()];
        assert!((st.inner(&ones, &ones).unwrap() - 1.0).abs() < 1e-12);
        let z = vec![1.0; 7];
        assert!((time_average_pairing(&st, &ones, &z).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(time_average_pairing(&st, &vec![0.0; st.dim()], &z).unwrap(), 0.0);
        assert!(time_average_pairing(&st, &ones, &[1.0; 3]).is_err());
    }

    #[test]
    fn constant_function_has_norm_above_l2() {
        let mesh = build_interval_mesh(-1.0, 1.0, 9).unwrap();
        let k = FractionalKernel::new(0.1, 1).unwrap();
        let a = assemble_fractional_stiffness(&mesh, &k, &QuadConfig::default()).unwrap();
        let ones = vec![1.0; 9];
        let mut quad = 0.0;
        for i in 0..9 {
            for j in 0..9 {
                quad += a[(i, j)] * ones[i] * ones[j];
                assert_eq!(a[(i, j)], a[(j, i)]);
            }
        }
        assert!(quad > 2.0);
    }
}
