//! Residuals of the limiting stationarity system
//!
//! ```text
//! f'(u) + α u - μ1 + μ2 = 0
//! β A_s w + γ ℓ + Σ_j d_ij (μ1 + μ2)_ij = 0
//! μ ≤ 0,  μ1 (w - u) = 0,  μ2 (w + u) = 0,  |u| ≤ w
//! ⟨λ, w⟩ ≥ p ∫ |w|^p
//! ```

use crate::problem::{IterateState, ProblemSpec};
use crate::smoothing::g_grad_with;

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct StationarityReport {
    /// `‖f'(u) + αu - μ1 + μ2‖_∞` (nodal).
    pub residual_u: f64,
    /// `‖(βAw + γℓ)_i / m_i + Σ_j τ_j (μ1 + μ2)_ij‖_∞`.
    pub residual_w: f64,
    pub complementarity1: f64,
    pub complementarity2: f64,
    /// Largest positive multiplier entry.
    pub sign_violation: f64,
    pub infeasibility: f64,
    /// `⟨λ, w⟩`.
    pub lambda_pairing: f64,
    /// `p ∫ |w|^p`.
    pub lp_term: f64,
    /// `⟨λ, w⟩ - p ∫ |w|^p`.
    pub lambda_gap: f64,
}

impl StationarityReport {
    pub fn residual(&self) -> f64 {
        self.residual_u.max(self.residual_w)
    }

    pub fn complementarity(&self) -> f64 {
        self.complementarity1.max(self.complementarity2)
    }
}

/// Evaluate the stationarity system at `state`. With `eps > 0`, `ℓ` is
/// replaced by the derivative of `G_ε` at `w` (stationarity of Φ_ε);
/// with `eps = 0` the multiplier `state.lambda` is used.
pub fn stationarity_residual(spec: &ProblemSpec, state: &IterateState, eps: f64) -> StationarityReport {
    let (n, nm) = (spec.n(), spec.dofs.spacetime_dofs());
    let pr = spec.params;
    let ell = if eps > 0.0 {
        g_grad_with(&spec.smoothing(eps), &state.w, &spec.quad)
    } else {
        state.lambda.clone()
    };
    let g = spec.f.gradient(&state.u);
    let aw = super::matvec(&spec.gram.stiffness, &state.w);
    let mass = &spec.gram.lumped_space;
    let tau = &spec.gram.lumped_time;
    let mut rep = StationarityReport::default();
    let mut rw: Vec<f64> = (0..n).map(|i| (pr.beta * aw[i] + pr.gamma * ell[i]) / mass[i]).collect();
    for idx in 0..nm {
        let (i, j) = (idx % n, idx / n);
        let (u, w, m1, m2) = (state.u[idx], state.w[i], state.mu1[idx], state.mu2[idx]);
        let ru = g[idx] + pr.alpha * u - m1 + m2;
        rep.residual_u = rep.residual_u.max(ru.abs());
        rw[i] += tau[j] * (m1 + m2);
        rep.complementarity1 = rep.complementarity1.max((m1 * (w - u)).abs());
        rep.complementarity2 = rep.complementarity2.max((m2 * (w + u)).abs());
        rep.sign_violation = rep.sign_violation.max(m1).max(m2);
    }
    rep.residual_w = rw.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    rep.infeasibility = state.infeasibility(&spec.dofs);
    rep.lambda_pairing = ell.iter().zip(&state.w).map(|(a, b)| a * b).sum();
    rep.lp_term = pr.p * spec.sparsity_term(0.0, &state.w);
    rep.lambda_gap = rep.lambda_pairing - rep.lp_term;
    rep
}
