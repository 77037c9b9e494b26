//! Exhaustive-search reference solver for tiny subproblems.
//!
//! For fixed `w` the problem in `u` separates and is solved by
//! `u = clamp(r/κ, -w, w)`. The remaining function of `w` is convex and is
//! minimized over a box by repeated grid search, zooming in around the
//! incumbent until the grid spacing reaches rounding level.

use super::Subproblem;
use crate::error::{Error, Result};
use crate::problem::{IterateState, ProblemSpec};

const MAX_SPATIAL: usize = 4;
const MAX_TOTAL: usize = 24;

pub fn brute_force_oracle(
    spec: &ProblemSpec,
    eps_k: f64,
    state_k: &IterateState,
    l_k: f64,
    grid_density: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (n, m) = (spec.n(), spec.m());
    if n > MAX_SPATIAL || n * m + n > MAX_TOTAL {
        return Err(Error::Unsupported(format!(
            "oracle limited to {MAX_SPATIAL} spatial and {MAX_TOTAL} total dofs, got N = {n}, M = {m}"
        )));
    }
    if grid_density < 3 {
        return Err(Error::InvalidArgument("grid density must be at least 3".into()));
    }
    let sub = Subproblem::new(spec, eps_k, &state_k.u, &state_k.w, l_k)?;
    let reduced = |w: &[f64]| sub.objective(&sub.best_u(w), w);

    let rmax = sub.r.iter().fold(0.0f64, |a, r| a.max(r.abs())) / sub.kappa;
    let mut upper = 2.0 * rmax.max(1e-8);
    let g = grid_density;
    'restart: loop {
        let mut lo = vec![0.0; n];
        let mut hi = vec![upper; n];
        let mut best = vec![0.0; n];
        let mut best_val = reduced(&best);
        let mut first = true;
        loop {
            let step: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| (b - a) / (g - 1) as f64).collect();
            let mut idx = vec![0usize; n];
            let mut w = lo.clone();
            loop {
                let v = reduced(&w);
                if v < best_val {
                    best_val = v;
                    best.copy_from_slice(&w);
                }
                // Odometer increment.
                let mut k = 0;
                while k < n {
                    idx[k] += 1;
                    if idx[k] < g {
                        w[k] = lo[k] + step[k] * idx[k] as f64;
                        break;
                    }
                    idx[k] = 0;
                    w[k] = lo[k];
                    k += 1;
                }
                if k == n {
                    break;
                }
            }
            if first && best.iter().any(|&b| b >= upper * (1.0 - 1e-12)) {
                upper *= 2.0;
                continue 'restart;
            }
            first = false;
            let h = step.iter().fold(0.0f64, |a, &b| a.max(b));
            if h <= 1e-13 * upper.max(1.0) {
                return Ok((sub.best_u(&best), best));
            }
            for k in 0..n {
                lo[k] = (best[k] - 3.0 * step[k]).max(0.0);
                hi[k] = best[k] + 3.0 * step[k];
            }
        }
    }
}
