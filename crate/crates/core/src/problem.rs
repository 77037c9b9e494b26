//! Problem instance: the smooth term f, the weights, and the objectives
//! Φ_ε and the majorizing subproblem objective.
//!
//! Inner products on U use the lumped space-time weights
//! `d_ij = τ_j m_i` (`τ_j = ∫ φ_j dt`, `m_i = ∫ φ_i dx`). With this choice
//! the pointwise bound `|u_ij| ≤ w_i` decouples node by node and every
//! gradient on U is represented by a nodal coefficient vector.

use std::sync::Arc;

use faer::Mat;

use crate::error::{check_len, Error, Result};
use crate::fracnorm::{FractionalKernel, GramSet, QuadConfig};
use crate::mesh::{DofMap, Mesh, TimeGrid};
use crate::smoothing::{majorizer_gap_with, SmoothingParams, SpatialQuadrature};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub p: f64,
    pub s: f64,
    /// Tracking weight in `f(u) = (a/2)‖u - u_d‖²_U`.
    pub a: f64,
}

impl Params {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::InvalidArgument(format!("{what} = {v} out of range")));
        if !(self.alpha > 0.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.beta > 0.0) {
            return bad("beta", self.beta);
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma", self.gamma);
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad("p", self.p);
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return bad("s", self.s);
        }
        if !(self.a > 0.0) {
            return bad("a", self.a);
        }
        Ok(())
    }
}

/// Weighted Euclidean inner product with diagonal weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagonal {
    pub weights: Vec<f64>,
}

impl Diagonal {
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights.iter().zip(x).zip(y).map(|((d, a), b)| d * a * b).sum()
    }

    pub fn norm_sq(&self, x: &[f64]) -> f64 {
        self.inner(x, x)
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.norm_sq(x).sqrt()
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(x)
            .zip(y)
            .map(|((d, a), b)| d * (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// A smooth term `f` on U: value and Riesz representative of `f'(u)`.
pub trait SmoothTerm: Send + Sync + std::fmt::Debug {
    fn value(&self, u: &[f64], inner: &Diagonal) -> f64;
    fn gradient(&self, u: &[f64]) -> Vec<f64>;

    /// `f(u + du) - f(u) - f'(u) du`. Implementors with a closed form
    /// should override this: the generic difference loses all accuracy once
    /// `du` is near the square root of machine precision.
    fn remainder(&self, u: &[f64], du: &[f64], inner: &Diagonal) -> f64 {
        let un: Vec<f64> = u.iter().zip(du).map(|(a, b)| a + b).collect();
        self.value(&un, inner) - self.value(u, inner) - inner.inner(&self.gradient(u), du)
    }
}

/// `f(u) = (a/2)‖u - u_d‖²_U`, gradient representative `a (u - u_d)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracking {
    pub a: f64,
    pub u_d: Vec<f64>,
}

impl SmoothTerm for Tracking {
    fn value(&self, u: &[f64], inner: &Diagonal) -> f64 {
        0.5 * self.a * inner.dist(u, &self.u_d).powi(2)
    }

    fn gradient(&self, u: &[f64]) -> Vec<f64> {
        u.iter().zip(&self.u_d).map(|(x, d)| self.a * (x - d)).collect()
    }

    fn remainder(&self, _u: &[f64], du: &[f64], inner: &Diagonal) -> f64 {
        0.5 * self.a * inner.norm_sq(du)
    }
}

#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub params: Params,
    pub mesh: Mesh,
    pub grid: TimeGrid,
    pub dofs: DofMap,
    pub gram: GramSet,
    pub kernel: FractionalKernel,
    pub f: Arc<dyn SmoothTerm>,
    /// Lumped space-time weights `d_ij`.
    pub u_inner: Diagonal,
    /// Quadrature used for G_ε and its derivative.
    pub quad: SpatialQuadrature,
}

/// Nodal interpolation of `u_d(t, x)` on the space-time grid.
pub fn sample_spacetime(mesh: &Mesh, grid: &TimeGrid, f: impl Fn(f64, &[f64]) -> f64) -> Vec<f64> {
    let n = mesh.n_vertices();
    let mut out = Vec::with_capacity(n * grid.m());
    for &t in &grid.nodes {
        for i in 0..n {
            out.push(f(t, mesh.vertex(i)));
        }
    }
    out
}

impl ProblemSpec {
    /// Tracking problem; assembles all matrices.
    pub fn tracking(
        params: Params,
        mesh: Mesh,
        grid: TimeGrid,
        u_d: Vec<f64>,
        quad: &QuadConfig,
    ) -> Result<Self> {
        params.validate()?;
        let kernel = FractionalKernel::new(params.s, mesh.dim)?;
        let gram = GramSet::assemble(&mesh, &grid, &kernel, quad)?;
        Self::with_gram(params, mesh, grid, gram, Arc::new(Tracking { a: params.a, u_d }))
    }

    /// Build from pre-assembled matrices (e.g. to reuse the stiffness matrix
    /// across a parameter sweep).
    pub fn with_gram(
        params: Params,
        mesh: Mesh,
        grid: TimeGrid,
        gram: GramSet,
        f: Arc<dyn SmoothTerm>,
    ) -> Result<Self> {
        params.validate()?;
        let kernel = FractionalKernel::new(params.s, mesh.dim)?;
        let dofs = DofMap::new(&mesh, &grid);
        check_len("stiffness rows", dofs.n, gram.stiffness.nrows())?;
        let probe = vec![0.0; dofs.spacetime_dofs()];
        check_len("smooth term gradient", dofs.spacetime_dofs(), f.gradient(&probe).len())?;
        let mut weights = Vec::with_capacity(dofs.spacetime_dofs());
        for &tau in &gram.lumped_time {
            for &m in &gram.lumped_space {
                weights.push(tau * m);
            }
        }
        let quad = SpatialQuadrature::nodal(&mesh);
        Ok(Self {
            params,
            mesh,
            grid,
            dofs,
            gram,
            kernel,
            f,
            u_inner: Diagonal { weights },
            quad,
        })
    }

    pub fn n(&self) -> usize {
        self.dofs.n
    }

    pub fn m(&self) -> usize {
        self.dofs.m
    }

    pub fn smoothing(&self, eps: f64) -> SmoothingParams {
        SmoothingParams {
            p: self.params.p,
            eps,
        }
    }

    pub fn f_value(&self, u: &[f64]) -> Result<f64> {
        check_len("u", self.dofs.spacetime_dofs(), u.len())?;
        Ok(self.f.value(u, &self.u_inner))
    }

    pub fn f_grad(&self, u: &[f64]) -> Result<Vec<f64>> {
        check_len("u", self.dofs.spacetime_dofs(), u.len())?;
        Ok(self.f.gradient(u))
    }

    pub fn w_norm_sq(&self, w: &[f64]) -> f64 {
        self.gram.w_inner(w, w)
    }

    /// `∫ |w|^p` (ε = 0) or `G_ε(w)`.
    pub fn sparsity_term(&self, eps: f64, w: &[f64]) -> f64 {
        let sp = self.smoothing(eps);
        self.quad.integrate(w, |v| sp.value(v * v))
    }

    /// `Φ_ε(u, w) = f(u) + (α/2)‖u‖²_U + (β/2)‖w‖²_W + γ G_ε(w)`.
    pub fn phi_eps(&self, eps: f64, u: &[f64], w: &[f64]) -> Result<f64> {
        check_len("w", self.n(), w.len())?;
        let pr = &self.params;
        Ok(self.f_value(u)?
            + 0.5 * pr.alpha * self.u_inner.norm_sq(u)
            + 0.5 * pr.beta * self.w_norm_sq(w)
            + pr.gamma * self.sparsity_term(eps, w))
    }

    /// Subproblem objective around `(u_k, w_k)`:
    /// `(f'(u_k), u - u_k)_U + (α/2)‖u‖² + (β/2)‖w‖²_W
    ///  + γ ∫ ψ'(w_k²)(w² - w_k²) + (L/2)‖u - u_k‖²`, minus its value at
    /// `(u_k, w_k)` so that it vanishes there.
    pub fn subproblem_objective(
        &self,
        eps_k: f64,
        u_k: &[f64],
        w_k: &[f64],
        l_k: f64,
        u: &[f64],
        w: &[f64],
    ) -> Result<f64> {
        check_len("w", self.n(), w.len())?;
        check_len("w_k", self.n(), w_k.len())?;
        let g = self.f_grad(u_k)?;
        let du: Vec<f64> = u.iter().zip(u_k).map(|(a, b)| a - b).collect();
        let pr = &self.params;
        let sp = self.smoothing(eps_k);
        let mut lin = 0.0;
        for (q, b) in &self.quad.points {
            let wk: f64 = b.iter().map(|&(i, v)| v * w_k[i]).sum();
            let wx: f64 = b.iter().map(|&(i, v)| v * w[i]).sum();
            lin += q * sp.derivative(wk * wk) * (wx * wx - wk * wk);
        }
        Ok(self.u_inner.inner(&g, &du)
            + 0.5 * pr.alpha * (self.u_inner.norm_sq(u) - self.u_inner.norm_sq(u_k))
            + 0.5 * pr.beta * (self.w_norm_sq(w) - self.w_norm_sq(w_k))
            + pr.gamma * lin
            + 0.5 * l_k * self.u_inner.norm_sq(&du))
    }

    /// Dense w-block of the subproblem Hessian, `β A_s + 2γ D_k` with
    /// `D_k = ∫ ψ'_ε(w_k²) φ_k φ_l`.
    pub fn w_hessian(&self, eps_k: f64, w_k: &[f64]) -> Mat<f64> {
        let n = self.n();
        let sp = self.smoothing(eps_k);
        let (beta, gamma) = (self.params.beta, self.params.gamma);
        let mut h = Mat::<f64>::from_fn(n, n, |i, j| beta * self.gram.stiffness[(i, j)]);
        if gamma > 0.0 {
            for (i, j, v) in self.quad.weighted_entries(w_k, |x| sp.derivative(x * x)) {
                h[(i, j)] += 2.0 * gamma * v;
            }
        }
        h
    }

    /// The concavity gap of the majorizer, `∫ ψ'(w_k²)(w² - w_k²) - (ψ(w²) - ψ(w_k²))`.
    pub fn majorizer_gap(&self, eps: f64, w_k: &[f64], w: &[f64]) -> f64 {
        majorizer_gap_with(&self.smoothing(eps), w_k, w, &self.quad)
    }
}

/// Coefficients of an iterate and its multipliers. Multipliers follow the
/// sign convention `μ ≤ 0`; their M_U-weighted representatives are
/// `d_ij μ_ij`. `lambda` holds the dual vector `ℓ_i = ⟨λ, φ_i⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateState {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl IterateState {
    pub fn zeros(dofs: &DofMap) -> Self {
        let nm = dofs.spacetime_dofs();
        Self {
            u: vec![0.0; nm],
            w: vec![0.0; dofs.n],
            mu1: vec![0.0; nm],
            mu2: vec![0.0; nm],
            lambda: vec![0.0; dofs.n],
        }
    }

    /// Largest violation of `|u_ij| ≤ w_i` and of `w ≥ 0`.
    pub fn infeasibility(&self, dofs: &DofMap) -> f64 {
        let mut v: f64 = 0.0;
        for (idx, &x) in self.u.iter().enumerate() {
            v = v.max(x.abs() - self.w[dofs.constraint_partner(idx)]);
        }
        for &w in &self.w {
            v = v.max(-w);
        }
        v.max(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_interval_mesh, build_time_grid};

    fn spec() -> ProblemSpec {
        let mesh = build_interval_mesh(-1.0, 1.0, 9).unwrap();
        let grid = build_time_grid(0.5, 5).unwrap();
        let u_d = sample_spacetime(&mesh, &grid, |t, x| t * (1.5 * (x[0] - 1.0)).sin());
        let params = Params {
            alpha: 2.0,
            beta: 0.2,
            gamma: 1.0,
            p: 0.5,
            s: 0.1,
            a: 25.0,
        };
        ProblemSpec::tracking(params, mesh, grid, u_d, &QuadConfig::default()).unwrap()
    }

    #[test]
    fn tracking_examples() {
        let sp = spec();
        let tr = Tracking {
            a: 25.0,
            u_d: sample_spacetime(&sp.mesh, &sp.grid, |t, x| t * (1.5 * (x[0] - 1.0)).sin()),
        };
        assert_eq!(sp.f_value(&tr.u_d).unwrap(), 0.0);
        assert!(sp.f_grad(&tr.u_d).unwrap().iter().all(|&g| g == 0.0));
        let shifted: Vec<f64> = tr.u_d.iter().map(|x| x + 1.0).collect();
        assert!((sp.f_value(&shifted).unwrap() - 12.5 * 0.5 * 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_at_zero() {
        let sp = spec();
        let (u, w) = (vec![0.0; 45], vec![0.0; 9]);
        let f0 = sp.f_value(&u).unwrap();
        assert_eq!(sp.phi_eps(0.0, &u, &w).unwrap(), f0);
        let want = f0 + (1.0 - 0.25) * 0.1f64.powf(0.5) * 2.0;
        assert!((sp.phi_eps(0.1, &u, &w).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn subproblem_objective_vanishes_at_center() {
        let sp = spec();
        let u: Vec<f64> = (0..45).map(|i| (i as f64 * 0.3).sin()).collect();
        let w: Vec<f64> = (0..9).map(|i| 1.0 + (i as f64).cos()).collect();
        assert_eq!(sp.subproblem_objective(0.1, &u, &w, 4.0, &u, &w).unwrap(), 0.0);
    }
}
