//! Penalized subproblem: the bound `|u| ≤ w` is replaced by
//! `(1/2δ)‖(w-u)₋‖²_U + (1/2δ)‖(w+u)₋‖²_U`. The objective is convex and
//! C¹ with semismooth gradient; it is minimized by semismooth Newton with
//! an Armijo line search on the objective itself.

use faer::Mat;

use super::{cholesky_solve, NewtonConfig, Subproblem};
use crate::error::{Error, Result};
use crate::problem::{IterateState, ProblemSpec};

#[inline]
fn neg(x: f64) -> f64 {
    x.min(0.0)
}

struct Penalized<'a> {
    sub: &'a Subproblem,
    delta: f64,
}

impl Penalized<'_> {
    fn value(&self, u: &[f64], w: &[f64]) -> f64 {
        let s = self.sub;
        let mut pen = 0.0;
        for (idx, &x) in u.iter().enumerate() {
            let b = w[idx % s.n];
            pen += s.weight(idx) * (neg(b - x).powi(2) + neg(b + x).powi(2));
        }
        s.objective(u, w) + pen / (2.0 * self.delta)
    }

    /// Gradient `(G_u, G_w)` (unscaled, i.e. already weighted by d and M).
    fn gradient(&self, u: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let s = self.sub;
        let mut gw = s.hw(w);
        let mut gu = vec![0.0; u.len()];
        for (idx, &x) in u.iter().enumerate() {
            let i = idx % s.n;
            let d = s.weight(idx);
            let m1 = neg(w[i] - x) / self.delta;
            let m2 = neg(w[i] + x) / self.delta;
            gu[idx] = d * (s.kappa * x - s.r[idx] - m1 + m2);
            gw[i] += d * (m1 + m2);
        }
        (gu, gw)
    }

    fn scaled_norm(&self, gu: &[f64], gw: &[f64]) -> f64 {
        let s = self.sub;
        let a = gu
            .iter()
            .enumerate()
            .fold(0.0f64, |acc, (idx, g)| acc.max((g / s.weight(idx)).abs()));
        gw.iter()
            .zip(&s.mass)
            .fold(a, |acc, (g, m)| acc.max((g / m).abs()))
    }

    fn direction(&self, u: &[f64], w: &[f64], gu: &[f64], gw: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let s = self.sub;
        let inv = 1.0 / self.delta;
        let mut diag = vec![0.0; s.n];
        let mut rhs: Vec<f64> = gw.iter().map(|g| -g).collect();
        let mut huu = vec![0.0; u.len()];
        let mut huw = vec![0.0; u.len()];
        for (idx, &x) in u.iter().enumerate() {
            let i = idx % s.n;
            let d = s.weight(idx);
            let c1 = if w[i] - x < 0.0 { 1.0 } else { 0.0 };
            let c2 = if w[i] + x < 0.0 { 1.0 } else { 0.0 };
            huu[idx] = d * (s.kappa + (c1 + c2) * inv);
            huw[idx] = d * (c2 - c1) * inv;
            diag[i] += d * (c1 + c2) * inv - huw[idx] * huw[idx] / huu[idx];
            rhs[i] += huw[idx] * gu[idx] / huu[idx];
        }
        let schur = Mat::<f64>::from_fn(s.n, s.n, |a, b| s.h[(a, b)] + if a == b { diag[a] } else { 0.0 });
        let dw = cholesky_solve(&schur, &rhs)?;
        let du = (0..u.len())
            .map(|idx| (-gu[idx] - huw[idx] * dw[idx % s.n]) / huu[idx])
            .collect();
        Some((du, dw))
    }
}

/// Minimize the penalized subproblem around `state_k`. The returned
/// multipliers are `μ1 = (w-u)₋/δ`, `μ2 = (w+u)₋/δ`.
pub fn solve_penalized_subproblem(
    spec: &ProblemSpec,
    eps_k: f64,
    state_k: &IterateState,
    l_k: f64,
    delta: f64,
    config: &NewtonConfig,
) -> Result<IterateState> {
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("penalty parameter must be positive, got {delta}")));
    }
    config.validate()?;
    let sub = Subproblem::new(spec, eps_k, &state_k.u, &state_k.w, l_k)?;
    let pen = Penalized { sub: &sub, delta };
    let mut u = state_k.u.clone();
    let mut w = state_k.w.clone();
    let mut val = pen.value(&u, &w);
    let mut best = f64::INFINITY;
    let mut converged = false;
    for _ in 0..config.max_iter {
        let (gu, gw) = pen.gradient(&u, &w);
        let gn = pen.scaled_norm(&gu, &gw);
        best = best.min(gn);
        if gn <= config.tol_f {
            converged = true;
            break;
        }
        let Some((du, dw)) = pen.direction(&u, &w, &gu, &gw) else { break };
        let slope: f64 =
            gu.iter().zip(&du).map(|(a, b)| a * b).sum::<f64>() + gw.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..config.max_backtracks {
            let un: Vec<f64> = u.iter().zip(&du).map(|(a, b)| a + t * b).collect();
            let wn: Vec<f64> = w.iter().zip(&dw).map(|(a, b)| a + t * b).collect();
            let vn = pen.value(&un, &wn);
            if vn <= val + config.sigma * t * slope {
                u = un;
                w = wn;
                val = vn;
                moved = true;
                break;
            }
            t *= config.backtrack;
        }
        if !moved {
            // Objective can no longer be decreased in floating point; accept
            // if the gradient is already at rounding level.
            converged = gn <= config.tol_f.max(1e-12 * (1.0 + val.abs()) / delta);
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: config.max_iter,
            best_residual: best,
        });
    }
    let n = sub.n;
    let mu1: Vec<f64> = u.iter().enumerate().map(|(idx, &x)| neg(w[idx % n] - x) / delta).collect();
    let mu2: Vec<f64> = u.iter().enumerate().map(|(idx, &x)| neg(w[idx % n] + x) / delta).collect();
    let lambda = sub.lambda(spec, &w);
    Ok(IterateState {
        u,
        w,
        mu1,
        mu2,
        lambda,
    })
}
