//! The smoothing family ψ_ε of `t ↦ t^{p/2}` and the smoothed sparsity
//! functional `G_ε(w) = ∫ ψ_ε(w²)`.

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::quadrature::{GaussLegendre, TriangleRule};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    pub p: f64,
    pub eps: f64,
}

impl SmoothingParams {
    /// `p` is accepted in `(0, 1]`; `p = 1` gives the L¹ case.
    pub fn new(p: f64, eps: f64) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidArgument(format!("exponent p = {p} not in (0, 1]")));
        }
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("smoothing level {eps} is negative")));
        }
        Ok(Self { p, eps })
    }

    /// ψ_ε(t); for ε = 0 this is `t^{p/2}` with `0^{p/2} = 0`.
    #[inline]
    pub fn value(&self, t: f64) -> f64 {
        let (p, e) = (self.p, self.eps);
        if e > 0.0 && t < e * e {
            0.5 * p * t * e.powf(p - 2.0) + (1.0 - 0.5 * p) * e.powf(p)
        } else if t > 0.0 {
            t.powf(0.5 * p)
        } else {
            0.0
        }
    }

    /// ψ'_ε(t) = (p/2) min(ε^{p-2}, t^{(p-2)/2}).
    #[inline]
    pub fn derivative(&self, t: f64) -> f64 {
        let (p, e) = (self.p, self.eps);
        if t < e * e {
            0.5 * p * e.powf(p - 2.0)
        } else {
            0.5 * p * t.powf(0.5 * p - 1.0)
        }
    }
}

pub fn psi(params: &SmoothingParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("ψ evaluated at negative argument {t}")));
    }
    Ok(params.value(t))
}

pub fn psi_prime(params: &SmoothingParams, t: f64) -> Result<f64> {
    if !(params.eps > 0.0) {
        return Err(Error::Unsupported("ψ' is unbounded for ε = 0".into()));
    }
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("ψ' evaluated at negative argument {t}")));
    }
    Ok(params.derivative(t))
}

/// A quadrature rule on Ω expressed through the P1 basis: each point
/// carries a weight and the nonzero basis values `(vertex, φ(x))`.
#[derive(Debug, Clone)]
pub struct SpatialQuadrature {
    pub points: Vec<(f64, Vec<(usize, f64)>)>,
    nodal: bool,
}

impl SpatialQuadrature {
    /// Vertex rule with lumped weights `∫ φ_i`. Point `i` is vertex `i`.
    pub fn nodal(mesh: &Mesh) -> Self {
        let m = mesh.lumped_mass();
        Self {
            points: m.into_iter().enumerate().map(|(i, w)| (w, vec![(i, 1.0)])).collect(),
            nodal: true,
        }
    }

    /// Element Gauss rule with `order` points per direction.
    pub fn gauss(mesh: &Mesh, order: usize) -> Self {
        let mut points = Vec::new();
        match mesh.dim {
            1 => {
                let g = GaussLegendre::new(order);
                for k in 0..mesh.n_cells() {
                    let c = mesh.cell(k);
                    let (a, b) = (mesh.coords[c[0]], mesh.coords[c[1]]);
                    let len = (b - a).abs();
                    for (&t, &w) in g.nodes.iter().zip(&g.weights) {
                        points.push((w * len, vec![(c[0], 1.0 - t), (c[1], t)]));
                    }
                }
            }
            _ => {
                let rule = TriangleRule::collapsed(order);
                for k in 0..mesh.n_cells() {
                    let c = mesh.cell(k);
                    let area = mesh.cell_measure(k);
                    for (l, &w) in rule.points.iter().zip(&rule.weights) {
                        points.push((w * area, vec![(c[0], l[0]), (c[1], l[1]), (c[2], l[2])]));
                    }
                }
            }
        }
        Self {
            points,
            nodal: false,
        }
    }

    pub fn is_nodal(&self) -> bool {
        self.nodal
    }

    #[inline]
    fn eval(basis: &[(usize, f64)], w: &[f64]) -> f64 {
        basis.iter().map(|&(i, v)| v * w[i]).sum()
    }

    /// `∫ F(w(x)) dx` for a pointwise map `F`.
    pub fn integrate(&self, w: &[f64], f: impl Fn(f64) -> f64) -> f64 {
        self.points.iter().map(|(q, b)| q * f(Self::eval(b, w))).sum()
    }

    /// `∫ F(a(x), b(x)) dx` for two fields.
    pub fn integrate_pair(&self, a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .map(|(q, basis)| q * f(Self::eval(basis, a), Self::eval(basis, b)))
            .sum()
    }

    /// `∫ F(w(x)) φ_k(x) dx` for every basis function.
    pub fn integrate_against_basis(&self, w: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        for (q, b) in &self.points {
            let v = q * f(Self::eval(b, w));
            for &(i, phi) in b {
                out[i] += v * phi;
            }
        }
        out
    }

    /// Dense matrix `∫ c(x) φ_k φ_l` in coordinate form (needed for the
    /// Gauss rule, where it is not diagonal).
    pub fn weighted_entries(&self, w: &[f64], c: impl Fn(f64) -> f64) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for (q, b) in &self.points {
            let v = q * c(Self::eval(b, w));
            for &(i, pi) in b {
                for &(j, pj) in b {
                    out.push((i, j, v * pi * pj));
                }
            }
        }
        out
    }
}

/// `G_ε(w) = ∫ ψ_ε(w²)` with the nodal rule.
pub fn g_value(params: &SmoothingParams, w: &[f64], mesh: &Mesh) -> Result<f64> {
    crate::error::check_len("spatial vector", mesh.n_vertices(), w.len())?;
    Ok(g_value_with(params, w, &SpatialQuadrature::nodal(mesh)))
}

pub fn g_value_with(params: &SmoothingParams, w: &[f64], quad: &SpatialQuadrature) -> f64 {
    quad.integrate(w, |v| params.value(v * v))
}

/// Coefficients `g_k = ∫ 2 w ψ'_ε(w²) φ_k` of the derivative of `G_ε`.
pub fn g_grad(params: &SmoothingParams, w: &[f64], mesh: &Mesh) -> Result<Vec<f64>> {
    crate::error::check_len("spatial vector", mesh.n_vertices(), w.len())?;
    if !(params.eps > 0.0) {
        return Err(Error::Unsupported("G' is unbounded for ε = 0".into()));
    }
    Ok(g_grad_with(params, w, &SpatialQuadrature::nodal(mesh)))
}

pub fn g_grad_with(params: &SmoothingParams, w: &[f64], quad: &SpatialQuadrature) -> Vec<f64> {
    quad.integrate_against_basis(w, |v| 2.0 * v * params.derivative(v * v))
}

/// `∫ [ψ'(w_ref²)(w² - w_ref²) - (ψ(w²) - ψ(w_ref²))]`, nonnegative by
/// concavity of ψ.
pub fn majorizer_gap(params: &SmoothingParams, w_ref: &[f64], w: &[f64], mesh: &Mesh) -> Result<f64> {
    crate::error::check_len("spatial vector", mesh.n_vertices(), w.len())?;
    crate::error::check_len("spatial vector", mesh.n_vertices(), w_ref.len())?;
    if !(params.eps > 0.0) {
        return Err(Error::Unsupported("majorizer needs ε > 0".into()));
    }
    let quad = SpatialQuadrature::nodal(mesh);
    Ok(majorizer_gap_with(params, w_ref, w, &quad))
}

pub fn majorizer_gap_with(
    params: &SmoothingParams,
    w_ref: &[f64],
    w: &[f64],
    quad: &SpatialQuadrature,
) -> f64 {
    let mut acc = 0.0;
    for (q, b) in &quad.points {
        let r = SpatialQuadrature::eval(b, w_ref);
        let v = SpatialQuadrature::eval(b, w);
        let (r2, v2) = (r * r, v * v);
        acc += q * (params.derivative(r2) * (v2 - r2) - (params.value(v2) - params.value(r2)));
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_interval_mesh;

    #[test]
    fn psi_examples() {
        let sp = SmoothingParams::new(0.5, 1.0).unwrap();
        assert!((psi(&sp, 4.0).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        assert!((psi(&sp, 0.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(psi(&sp, -1.0).is_err());
        let sp = SmoothingParams::new(0.3, 0.2).unwrap();
        let t = 0.04;
        let lower = 0.5 * 0.3 * t / 0.2f64.powf(1.7) + (1.0 - 0.15) * 0.2f64.powf(0.3);
        assert!((lower - t.powf(0.15)).abs() < 1e-14);
        assert!((psi(&sp, t).unwrap() - 0.2f64.powf(0.3)).abs() < 1e-14);
    }

    #[test]
    fn psi_prime_examples() {
        let sp = SmoothingParams::new(1.0, 0.1).unwrap();
        assert!((psi_prime(&sp, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((psi_prime(&sp, 0.0).unwrap() - 5.0).abs() < 1e-12);
        let zero = SmoothingParams::new(1.0, 0.0).unwrap();
        assert!(psi_prime(&zero, 1.0).is_err());
        let sp = SmoothingParams::new(0.4, 0.3).unwrap();
        let t = 2.0 * 0.09;
        let h = 1e-6;
        let fd = (sp.value(t + h) - sp.value(t - h)) / (2.0 * h);
        assert!((fd - sp.derivative(t)).abs() / sp.derivative(t) < 1e-6);
    }

    #[test]
    fn g_examples() {
        let mesh = build_interval_mesh(-1.0, 1.0, 11).unwrap();
        let sp = SmoothingParams::new(0.5, 0.1).unwrap();
        let zero = vec![0.0; 11];
        let want = 0.75 * 0.1f64.sqrt() * 2.0;
        assert!((g_value(&sp, &zero, &mesh).unwrap() - want).abs() < 1e-14);
        let c = vec![0.3; 11];
        assert!((g_value(&sp, &c, &mesh).unwrap() - 2.0 * 0.3f64.sqrt()).abs() < 1e-14);
        assert!(g_grad(&sp, &zero, &mesh).unwrap().iter().all(|&v| v == 0.0));
        assert_eq!(majorizer_gap(&sp, &c, &c, &mesh).unwrap(), 0.0);
        // w_ref = 0, w = ε: (p/2) ε^p - (ε^p - (1 - p/2) ε^p) = 0 per unit
        // measure, since ψ is linear below ε².
        let e = vec![0.1; 11];
        let gap = majorizer_gap(&sp, &zero, &e, &mesh).unwrap();
        let per_unit = 0.25 * 0.1f64.sqrt() - (0.1f64.sqrt() - 0.75 * 0.1f64.sqrt());
        assert!((gap - 2.0 * per_unit).abs() < 1e-14);
    }

    #[test]
    fn gauss_rule_agrees_on_constants() {
        let mesh = crate::mesh::build_square_mesh((-1.0, 1.0), 4).unwrap();
        let sp = SmoothingParams::new(0.5, 0.1).unwrap();
        let c = vec![0.7; mesh.n_vertices()];
        let q = SpatialQuadrature::gauss(&mesh, 3);
        assert!((g_value_with(&sp, &c, &q) - 4.0 * 0.7f64.sqrt()).abs() < 1e-12);
    }
}
