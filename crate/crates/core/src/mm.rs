//! Outer majorize-minimize loop: smoothing schedule, search for the
//! curvature constant L_k, and stopping.

use crate::error::{Error, Result};
use crate::mesh::{Mesh, TimeGrid};
use crate::problem::{IterateState, ProblemSpec};
use crate::subqp::{solve_subproblem, stationarity_residual, InnerReport, NewtonConfig, StationarityReport};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MmConfig {
    /// Base curvature constant L.
    pub l: f64,
    /// Growth factor b of the search over `L b^l`.
    pub b: f64,
    pub eps0: f64,
    pub eps_decay: f64,
    pub eps_min: f64,
    /// Stop when `‖Δu‖_U + ‖Δw‖_W ≤ tol` with ε at its floor.
    pub tol: f64,
    pub max_outer: usize,
    pub max_doublings: usize,
    /// Support threshold relative to `‖u‖_∞`.
    pub support_tol: f64,
    pub newton: NewtonConfig,
}

impl Default for MmConfig {
    fn default() -> Self {
        Self {
            l: 1.0,
            b: 2.0,
            eps0: 0.1,
            eps_decay: 0.8,
            eps_min: 1e-6,
            tol: 1e-10,
            max_outer: 500,
            max_doublings: 60,
            support_tol: 1e-8,
            newton: NewtonConfig::default(),
        }
    }
}

impl MmConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if !(self.l > 0.0) {
            return bad("L must be positive");
        }
        if !(self.b > 1.0) {
            return bad("growth factor b must exceed 1");
        }
        if !(self.eps0 > self.eps_min && self.eps_min > 0.0) {
            return bad("need eps0 > eps_min > 0");
        }
        if !(self.eps_decay > 0.0 && self.eps_decay < 1.0) {
            return bad("eps_decay must lie in (0, 1)");
        }
        if !(self.tol > 0.0) {
            return bad("stopping tolerance must be positive");
        }
        if self.max_outer == 0 {
            return bad("max_outer must be at least 1");
        }
        self.newton.validate()
    }

    /// `ε_k = max(ε₀ rᵏ, ε_min)`.
    pub fn eps(&self, k: usize) -> f64 {
        (self.eps0 * self.eps_decay.powi(k.min(i32::MAX as usize) as i32)).max(self.eps_min)
    }
}

/// `f(u⁺) ≤ f(u_k) + f'(u_k)(u⁺ - u_k) + L_k ‖u⁺ - u_k‖²_U`, evaluated as
/// `remainder ≤ L_k ‖Δu‖²` so that tiny steps are not decided by
/// cancellation.
pub fn descent_condition(spec: &ProblemSpec, u_k: &[f64], u_next: &[f64], l_k: f64) -> Result<bool> {
    crate::error::check_len("u_k", spec.dofs.spacetime_dofs(), u_k.len())?;
    crate::error::check_len("u_next", spec.dofs.spacetime_dofs(), u_next.len())?;
    let du: Vec<f64> = u_next.iter().zip(u_k).map(|(a, b)| a - b).collect();
    let rem = spec.f.remainder(u_k, &du, &spec.u_inner);
    Ok(rem <= l_k * spec.u_inner.norm_sq(&du))
}

#[derive(Debug, Clone)]
pub struct LkResult {
    pub l_k: f64,
    pub doublings: usize,
    pub state: IterateState,
    pub inner: InnerReport,
    /// Inner reports of all rejected trials.
    pub rejected: Vec<InnerReport>,
}

/// Smallest `L b^l` whose subproblem solution passes the descent test.
pub fn find_lk(spec: &ProblemSpec, eps_k: f64, state_k: &IterateState, config: &MmConfig) -> Result<LkResult> {
    let mut l_k = config.l;
    let mut rejected = Vec::new();
    for l in 0..=config.max_doublings {
        let (state, inner) = solve_subproblem(spec, eps_k, state_k, l_k, &config.newton)?;
        if descent_condition(spec, &state_k.u, &state.u, l_k)? {
            return Ok(LkResult {
                l_k,
                doublings: l,
                state,
                inner,
                rejected,
            });
        }
        rejected.push(inner);
        l_k *= config.b;
    }
    Err(Error::LkSearch(config.max_doublings))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct IterRecord {
    pub k: usize,
    pub eps: f64,
    /// `Φ_{ε_k}(u_k, w_k)` before the step.
    pub phi_prev: f64,
    /// `Φ_{ε_{k+1}}(u_{k+1}, w_{k+1})`.
    pub phi: f64,
    /// `Φ₀(u_{k+1}, w_{k+1})`.
    pub phi0: f64,
    pub l_k: f64,
    pub step_u: f64,
    pub step_w: f64,
    pub inner_iterations: usize,
    pub inner_gradient_steps: usize,
    pub inner_residual: f64,
    pub trials: usize,
    /// Slack of the full-strength descent inequality (≥ 0 up to rounding).
    pub descent_slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SupportFraction {
    /// Fraction of I×Ω where `|u| ≤ threshold`.
    pub spacetime: f64,
    /// Fraction of Ω where `max_t |u| ≤ threshold`.
    pub spatial: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum Status {
    Converged,
    MaxIterations,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SolveReport {
    pub records: Vec<IterRecord>,
    /// Stationarity at the limit-point estimate (see [`snap_support`]).
    pub stationarity: StationarityReport,
    /// Stationarity at the raw final iterate.
    pub stationarity_raw: StationarityReport,
    /// `Φ₀` at the limit-point estimate.
    pub phi0_limit: f64,
    /// Number of bound entries set to zero by the snap.
    pub snapped: usize,
    pub support: SupportFraction,
    pub status: Status,
    pub config: MmConfig,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    /// Smallest full-strength descent slack relative to `1 + |Φ|` over all
    /// accepted steps (`+∞` for an empty run).
    pub fn worst_descent_slack(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.descent_slack / (1.0 + r.phi_prev.abs()))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn final_phi0(&self) -> Option<f64> {
        self.records.last().map(|r| r.phi0)
    }

    /// Comma-separated table, one row per outer iteration, with a
    /// versioned schema line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("#schema=solve_report.v1\n");
        s.push_str("k,eps,phi_prev,phi,phi0,L_k,step_u,step_w,inner_iterations,inner_gradient_steps,inner_residual,trials,descent_slack\n");
        for r in &self.records {
            s.push_str(&format!(
                "{},{:e},{:.17e},{:.17e},{:.17e},{:e},{:e},{:e},{},{},{:e},{},{:e}\n",
                r.k,
                r.eps,
                r.phi_prev,
                r.phi,
                r.phi0,
                r.l_k,
                r.step_u,
                r.step_w,
                r.inner_iterations,
                r.inner_gradient_steps,
                r.inner_residual,
                r.trials,
                r.descent_slack
            ));
        }
        s
    }
}

/// Measure of the zero set of the P1 interpolant. A space-time cell
/// (spatial cell × time interval) counts if `|u| ≤ threshold` at all of its
/// nodes, i.e. if the interpolant vanishes on the whole cell; the spatial
/// fraction uses `max_t |u|` instead. Sets of measure zero, such as a
/// single time slice where `u_d = 0`, do not contribute. The threshold is
/// relative to `‖u‖_∞`, so a control that is small everywhere counts as
/// nonzero everywhere.
pub fn support_fraction(u: &[f64], mesh: &Mesh, grid: &TimeGrid, tol: f64) -> Result<SupportFraction> {
    let n = mesh.n_vertices();
    let m = grid.m();
    crate::error::check_len("u", n * m, u.len())?;
    if !(tol >= 0.0) {
        return Err(Error::InvalidArgument(format!("support tolerance {tol} is negative")));
    }
    let umax = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let thr = tol * umax;
    let zero = |i: usize, j: usize| u[j * n + i].abs() <= thr;
    let (mut st, mut sp) = (0.0, 0.0);
    for k in 0..mesh.n_cells() {
        let cell = mesh.cell(k);
        let meas = mesh.cell_measure(k);
        let mut all = true;
        for j in 0..m - 1 {
            let dt = grid.nodes[j + 1] - grid.nodes[j];
            if cell.iter().all(|&i| zero(i, j) && zero(i, j + 1)) {
                st += meas * dt;
            } else {
                all = false;
            }
        }
        if all {
            sp += meas;
        }
    }
    let omega = mesh.measure();
    Ok(SupportFraction {
        spacetime: (st / (omega * grid.t_final)).min(1.0),
        spatial: (sp / omega).min(1.0),
        threshold: thr,
    })
}

/// Limit-point estimate of a converged iterate. As `ε → 0` the bound decays
/// like `ε^{2-p}` on the inactive set but never reaches zero, and `|w|^p`
/// stays of order one there for small `p`. Entries `w_i ≤ tol·‖w‖_∞` are set
/// to zero and `u` is clamped to the new bound; multipliers are kept.
pub fn snap_support(state: &IterateState, n: usize, tol: f64) -> (IterateState, usize) {
    let wmax = state.w.iter().fold(0.0f64, |a, &w| a.max(w.abs()));
    let thr = tol * wmax;
    let mut out = state.clone();
    let mut count = 0;
    for w in out.w.iter_mut() {
        if *w <= thr {
            *w = 0.0;
            count += 1;
        }
    }
    for (idx, u) in out.u.iter_mut().enumerate() {
        let b = out.w[idx % n];
        *u = u.clamp(-b, b);
    }
    (out, count)
}

pub fn mm_solve(spec: &ProblemSpec, config: &MmConfig) -> Result<(IterateState, SolveReport)> {
    mm_solve_with(spec, config, IterateState::zeros(&spec.dofs), |_, _| {})
}

/// Run the outer loop from `init`, calling `observer(k, state)` with every
/// accepted iterate `(u_{k+1}, w_{k+1})`.
pub fn mm_solve_with(
    spec: &ProblemSpec,
    config: &MmConfig,
    init: IterateState,
    mut observer: impl FnMut(usize, &IterateState),
) -> Result<(IterateState, SolveReport)> {
    config.validate()?;
    let pr = spec.params;
    let mut state = init;
    let mut records = Vec::new();
    let mut status = Status::MaxIterations;
    for k in 0..config.max_outer {
        let eps = config.eps(k);
        let phi_prev = spec.phi_eps(eps, &state.u, &state.w)?;
        let found = match find_lk(spec, eps, &state, config) {
            Ok(f) => f,
            Err(e) => {
                status = Status::Failed(e.to_string());
                break;
            }
        };
        let next = found.state;
        let du: Vec<f64> = next.u.iter().zip(&state.u).map(|(a, b)| a - b).collect();
        let dw: Vec<f64> = next.w.iter().zip(&state.w).map(|(a, b)| a - b).collect();
        let step_u = spec.u_inner.norm(&du);
        let step_w = spec.w_norm_sq(&dw).max(0.0).sqrt();
        let eps_next = config.eps(k + 1);
        let phi = spec.phi_eps(eps_next, &next.u, &next.w)?;
        let sp = spec.smoothing(eps);
        let curvature = spec.quad.integrate_pair(&state.w, &dw, |wk, d| sp.derivative(wk * wk) * d * d);
        let descent_slack = phi_prev
            - (phi + 0.5 * pr.alpha * step_u * step_u + 0.5 * pr.beta * step_w * step_w + pr.gamma * curvature);
        records.push(IterRecord {
            k,
            eps,
            phi_prev,
            phi,
            phi0: spec.phi_eps(0.0, &next.u, &next.w)?,
            l_k: found.l_k,
            step_u,
            step_w,
            inner_iterations: found.inner.iterations,
            inner_gradient_steps: found.inner.gradient_steps,
            inner_residual: found.inner.final_residual,
            trials: found.doublings + 1,
            descent_slack,
        });
        log::debug!(
            "k={k} eps={eps:.2e} L={} phi={phi:.10} steps={step_u:.2e}/{step_w:.2e} newton={}",
            found.l_k,
            found.inner.iterations
        );
        state = next;
        observer(k, &state);
        if step_u + step_w <= config.tol && eps <= config.eps_min {
            status = Status::Converged;
            break;
        }
    }
    let stationarity_raw = stationarity_residual(spec, &state, 0.0);
    let (limit, snapped) = snap_support(&state, spec.n(), config.support_tol);
    let stationarity = stationarity_residual(spec, &limit, 0.0);
    let phi0_limit = spec.phi_eps(0.0, &limit.u, &limit.w)?;
    let support = support_fraction(&state.u, &spec.mesh, &spec.grid, config.support_tol)?;
    Ok((
        state,
        SolveReport {
            records,
            stationarity,
            stationarity_raw,
            phi0_limit,
            snapped,
            support,
            status,
            config: *config,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eps_schedule() {
        let c = MmConfig::default();
        assert_eq!(c.eps(0), 0.1);
        assert!((c.eps(1) - 0.08).abs() < 1e-16);
        assert_eq!(c.eps(10_000), 1e-6);
    }
}
