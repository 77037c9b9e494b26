//! The convex subproblem of one majorize-minimize step:
//!
//! ```text
//! min  Σ_ij d_ij (κ/2 u_ij² - r_ij u_ij) + ½ wᵀ H w   s.t.  |u_ij| ≤ w_i
//! ```
//!
//! with `κ = α + L_k`, `r = L_k u_k - f'(u_k)` and `H = β A_s + 2γ D_k`.
//! The KKT system is solved by a semismooth Newton method on its
//! Fischer-Burmeister reformulation, globalized with the merit ½‖F‖².
//!
//! Multipliers satisfy `μ ≤ 0`; the Lagrangian term is
//! `Σ d_ij [μ1_ij (w_i - u_ij) + μ2_ij (w_i + u_ij)]`, so the nodal KKT
//! residual reads
//!
//! ```text
//! F_u  = κ u - r - μ1 + μ2
//! F_w  = (H w)_i / m_i + Σ_j τ_j (μ1 + μ2)_ij
//! F_1  = fb(w_i - u_ij, -μ1_ij),   F_2 = fb(w_i + u_ij, -μ2_ij)
//! ```

mod oracle;
mod penalty;
mod stationarity;

pub use oracle::brute_force_oracle;
pub use penalty::solve_penalized_subproblem;
pub use stationarity::{stationarity_residual, StationarityReport};

use faer::{Mat, Side};
use faer::linalg::solvers::Solve;

use crate::error::{Error, Result};
use crate::problem::{IterateState, ProblemSpec};

/// Generalized-Jacobian selection at the kink `a = b = 0`.
pub const FB_KINK_GRADIENT: f64 = std::f64::consts::FRAC_1_SQRT_2 - 1.0;

/// Fischer-Burmeister function `√(a² + b²) - a - b`.
#[inline]
pub fn fb(a: f64, b: f64) -> f64 {
    a.hypot(b) - a - b
}

/// Partial derivatives of [`fb`], with the fixed selection at the kink.
#[inline]
pub fn fb_grad(a: f64, b: f64) -> (f64, f64) {
    let r = a.hypot(b);
    if r == 0.0 {
        (FB_KINK_GRADIENT, FB_KINK_GRADIENT)
    } else {
        (a / r - 1.0, b / r - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonConfig {
    pub max_iter: usize,
    /// Stop when `‖F‖_∞ ≤ tol_f`.
    pub tol_f: f64,
    pub feas_tol: f64,
    /// Armijo slope for the merit line search.
    pub sigma: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// The Newton direction is used only if
    /// `∇Ψᵀd ≤ -descent_rho ‖d‖^descent_power`.
    pub descent_rho: f64,
    pub descent_power: f64,
    /// Floor on `|∂fb/∂b|` in the Newton matrix; keeps the local 3×3
    /// systems invertible where both bounds are active.
    pub regularization: f64,
    /// Record the residual of every Newton linear system.
    pub check_linear: bool,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_f: 1e-9,
            feas_tol: 1e-9,
            sigma: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            descent_rho: 1e-8,
            descent_power: 2.1,
            regularization: 1e-10,
            check_linear: false,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_f > 0.0 && self.feas_tol > 0.0) {
            return Err(Error::InvalidArgument("Newton tolerances must be positive".into()));
        }
        if !(self.sigma > 0.0 && self.sigma <= 0.5) {
            return Err(Error::InvalidArgument(format!("Armijo sigma {} not in (0, 1/2]", self.sigma)));
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::InvalidArgument("backtracking factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct InnerReport {
    pub iterations: usize,
    pub newton_steps: usize,
    pub gradient_steps: usize,
    pub final_residual: f64,
    pub final_merit: f64,
    /// Merit values after each accepted step.
    pub merit_history: Vec<f64>,
    /// Largest relative residual of a Newton linear solve (if checked).
    pub linear_residual: f64,
}

/// Data of one subproblem, shared by the Newton, penalty and oracle paths.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub n: usize,
    pub m: usize,
    pub kappa: f64,
    pub r: Vec<f64>,
    pub h: Mat<f64>,
    /// Lumped spatial masses `m_i`.
    pub mass: Vec<f64>,
    /// Lumped temporal weights `τ_j`.
    pub tau: Vec<f64>,
    eps: f64,
    w_k: Vec<f64>,
}

impl Subproblem {
    pub fn new(spec: &ProblemSpec, eps_k: f64, u_k: &[f64], w_k: &[f64], l_k: f64) -> Result<Self> {
        if !(eps_k > 0.0) {
            return Err(Error::InvalidArgument(format!("smoothing level must be positive, got {eps_k}")));
        }
        if !(l_k > 0.0) {
            return Err(Error::InvalidArgument(format!("L_k must be positive, got {l_k}")));
        }
        let g = spec.f_grad(u_k)?;
        crate::error::check_len("w_k", spec.n(), w_k.len())?;
        Ok(Self {
            n: spec.n(),
            m: spec.m(),
            kappa: spec.params.alpha + l_k,
            r: u_k.iter().zip(&g).map(|(u, g)| l_k * u - g).collect(),
            h: spec.w_hessian(eps_k, w_k),
            mass: spec.gram.lumped_space.clone(),
            tau: spec.gram.lumped_time.clone(),
            eps: eps_k,
            w_k: w_k.to_vec(),
        })
    }

    #[inline]
    pub fn weight(&self, idx: usize) -> f64 {
        self.tau[idx / self.n] * self.mass[idx % self.n]
    }

    pub fn hw(&self, w: &[f64]) -> Vec<f64> {
        matvec(&self.h, w)
    }

    /// `Σ d (κ/2 u² - r u) + ½ wᵀHw`; equals the subproblem objective up to
    /// an additive constant.
    pub fn objective(&self, u: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (idx, (&x, &r)) in u.iter().zip(&self.r).enumerate() {
            acc += self.weight(idx) * (0.5 * self.kappa * x * x - r * x);
        }
        let hw = self.hw(w);
        acc + 0.5 * hw.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Minimizer in `u` for fixed `w`: `clamp(r/κ, -w, w)`.
    pub fn best_u(&self, w: &[f64]) -> Vec<f64> {
        self.r
            .iter()
            .enumerate()
            .map(|(idx, &r)| {
                let b = w[idx % self.n];
                (r / self.kappa).clamp(-b.max(0.0), b.max(0.0))
            })
            .collect()
    }

    /// Dual vector `ℓ_i = ∫ 2 ψ'_ε(w_k²) w φ_i` of the linearized sparsity
    /// term at a new bound `w`.
    pub fn lambda(&self, spec: &ProblemSpec, w: &[f64]) -> Vec<f64> {
        let sp = spec.smoothing(self.eps);
        let mut out = vec![0.0; self.n];
        for (q, b) in &spec.quad.points {
            let wk: f64 = b.iter().map(|&(i, v)| v * self.w_k[i]).sum();
            let wx: f64 = b.iter().map(|&(i, v)| v * w[i]).sum();
            let c = q * 2.0 * sp.derivative(wk * wk) * wx;
            for &(i, v) in b {
                out[i] += c * v;
            }
        }
        out
    }

    /// Scaled KKT residual `(F_u, F_w, F_1, F_2)`.
    pub fn residual(&self, z: &Kkt) -> Kkt {
        let nm = self.n * self.m;
        let mut f = Kkt::zeros(self.n, nm);
        let hw = self.hw(&z.w);
        for i in 0..self.n {
            f.w[i] = hw[i] / self.mass[i];
        }
        for idx in 0..nm {
            let i = idx % self.n;
            let j = idx / self.n;
            let (u, w, m1, m2) = (z.u[idx], z.w[i], z.mu1[idx], z.mu2[idx]);
            f.u[idx] = self.kappa * u - self.r[idx] - m1 + m2;
            f.w[i] += self.tau[j] * (m1 + m2);
            f.mu1[idx] = fb(w - u, -m1);
            f.mu2[idx] = fb(w + u, -m2);
        }
        f
    }

    /// Level below which `‖F‖_∞` is dominated by rounding: a small multiple
    /// of machine epsilon times the magnitude of the summed terms.
    pub fn residual_floor(&self, z: &Kkt) -> f64 {
        let nm = self.n * self.m;
        let mut sw: Vec<f64> = (0..self.n)
            .map(|i| (0..self.n).map(|k| (self.h[(i, k)] * z.w[k]).abs()).sum::<f64>() / self.mass[i])
            .collect();
        let mut su = 0.0f64;
        for idx in 0..nm {
            let (m1, m2) = (z.mu1[idx].abs(), z.mu2[idx].abs());
            sw[idx % self.n] += self.tau[idx / self.n] * (m1 + m2);
            su = su.max((self.kappa * z.u[idx]).abs() + self.r[idx].abs() + m1 + m2);
        }
        64.0 * f64::EPSILON * sw.into_iter().fold(su, f64::max)
    }

    /// `Jᵀ F`, the gradient of the merit ½‖F‖².
    fn merit_gradient(&self, z: &Kkt, f: &Kkt) -> Kkt {
        let nm = self.n * self.m;
        let mut g = Kkt::zeros(self.n, nm);
        let scaled: Vec<f64> = f.w.iter().zip(&self.mass).map(|(r, m)| r / m).collect();
        // H symmetric: Σ_i H_ik F_w,i / m_i
        g.w = self.hw(&scaled);
        for idx in 0..nm {
            let i = idx % self.n;
            let j = idx / self.n;
            let (c1, d1) = fb_grad(z.w[i] - z.u[idx], -z.mu1[idx]);
            let (c2, d2) = fb_grad(z.w[i] + z.u[idx], -z.mu2[idx]);
            let (fu, f1, f2) = (f.u[idx], f.mu1[idx], f.mu2[idx]);
            g.u[idx] = self.kappa * fu - c1 * f1 + c2 * f2;
            g.w[i] += c1 * f1 + c2 * f2;
            g.mu1[idx] = -fu + self.tau[j] * f.w[i] - d1 * f1;
            g.mu2[idx] = fu + self.tau[j] * f.w[i] - d2 * f2;
        }
        g
    }

    /// Newton direction by local elimination of `(Δu, Δμ1, Δμ2)` per node
    /// followed by a dense Cholesky solve of the Schur complement in `Δw`.
    ///
    /// Each local system is
    /// `[κ -1 1; -c1 -d1 0; c2 0 -d2] (Δu, Δμ1, Δμ2) = rhs(Δw)`; with
    /// `p = c/d ≥ 0` the Schur complement is
    /// `H + diag(m_i Σ_j τ_j (κ(p1+p2) + 4 p1 p2) / (κ + p1 + p2))`, which
    /// is symmetric positive definite.
    fn newton_direction(&self, z: &Kkt, f: &Kkt, reg: f64) -> Option<(Kkt, LocalJacobian)> {
        let nm = self.n * self.m;
        let mut jac = LocalJacobian::with_capacity(nm);
        let mut diag = vec![0.0; self.n];
        for idx in 0..nm {
            let i = idx % self.n;
            let j = idx / self.n;
            let (c1, d1) = fb_grad(z.w[i] - z.u[idx], -z.mu1[idx]);
            let (c2, d2) = fb_grad(z.w[i] + z.u[idx], -z.mu2[idx]);
            let (d1, d2) = (d1.min(-reg), d2.min(-reg));
            jac.push([c1, d1, c2, d2]);
            let (p1, p2) = (c1 / d1, c2 / d2);
            let bu = (p1 - p2) / (self.kappa + p1 + p2);
            diag[i] += self.tau[j] * self.mass[i] * (p1 * (1.0 - bu) + p2 * (1.0 + bu));
        }
        let schur = Mat::<f64>::from_fn(self.n, self.n, |a, b| {
            self.h[(a, b)] + if a == b { diag[a] } else { 0.0 }
        });
        let llt = schur.llt(Side::Lower).ok()?;
        let mut d = self.eliminate(&jac, &llt, f);
        // Dividing by the regularized ∂fb/∂b loses digits; refinement
        // with the same factor recovers them.
        let fnorm = f.norm();
        for _ in 0..3 {
            let r = self.apply_jacobian(&jac, &d, f);
            if r.norm() <= 1e-13 * fnorm {
                break;
            }
            let c = self.eliminate(&jac, &llt, &r);
            for (a, b) in d.iter_mut().zip(c.iter()) {
                *a += b;
            }
        }
        if d.iter().all(|v| v.is_finite()) {
            Some((d, jac))
        } else {
            None
        }
    }

    /// Solve `J d = -f` by eliminating the local (u, μ1, μ2) blocks and
    /// factoring the Schur complement in w.
    fn eliminate(&self, jac: &LocalJacobian, llt: &faer::linalg::solvers::Llt<f64>, f: &Kkt) -> Kkt {
        let nm = self.n * self.m;
        let mut base = Kkt::zeros(self.n, nm);
        let mut coef = Kkt::zeros(self.n, nm);
        let mut rhs: Vec<f64> = (0..self.n).map(|i| -self.mass[i] * f.w[i]).collect();
        for idx in 0..nm {
            let i = idx % self.n;
            let j = idx / self.n;
            let [c1, d1, c2, d2] = jac[idx];
            let (p1, p2) = (c1 / d1, c2 / d2);
            let (q1, q2) = (f.mu1[idx] / d1, f.mu2[idx] / d2);
            let k = self.kappa + p1 + p2;
            let u0 = (-f.u[idx] + q1 - q2) / k;
            let bu = (p1 - p2) / k;
            base.u[idx] = u0;
            coef.u[idx] = bu;
            base.mu1[idx] = q1 - p1 * u0;
            coef.mu1[idx] = p1 * (1.0 - bu);
            base.mu2[idx] = q2 + p2 * u0;
            coef.mu2[idx] = p2 * (1.0 + bu);
            rhs[i] -= self.tau[j] * self.mass[i] * (base.mu1[idx] + base.mu2[idx]);
        }
        let b = faer::Col::<f64>::from_fn(self.n, |i| rhs[i]);
        let x = llt.solve(&b);
        let mut d = Kkt::zeros(self.n, nm);
        for idx in 0..nm {
            let w = x[idx % self.n];
            d.u[idx] = base.u[idx] + coef.u[idx] * w;
            d.mu1[idx] = base.mu1[idx] + coef.mu1[idx] * w;
            d.mu2[idx] = base.mu2[idx] + coef.mu2[idx] * w;
        }
        d.w = (0..self.n).map(|i| x[i]).collect();
        d
    }

    /// `J d + F` for the (regularized) Newton matrix.
    fn apply_jacobian(&self, jac: &LocalJacobian, d: &Kkt, f: &Kkt) -> Kkt {
        let nm = self.n * self.m;
        let mut out = Kkt::zeros(self.n, nm);
        let hdw = self.hw(&d.w);
        for i in 0..self.n {
            out.w[i] = hdw[i] / self.mass[i] + f.w[i];
        }
        for idx in 0..nm {
            let i = idx % self.n;
            let j = idx / self.n;
            let [c1, d1, c2, d2] = jac[idx];
            out.u[idx] = self.kappa * d.u[idx] - d.mu1[idx] + d.mu2[idx] + f.u[idx];
            out.w[i] += self.tau[j] * (d.mu1[idx] + d.mu2[idx]);
            out.mu1[idx] = c1 * (d.w[i] - d.u[idx]) - d1 * d.mu1[idx] + f.mu1[idx];
            out.mu2[idx] = c2 * (d.w[i] + d.u[idx]) - d2 * d.mu2[idx] + f.mu2[idx];
        }
        out
    }

    /// Relative residual `‖J d + F‖ / ‖F‖` of the Newton system.
    fn linear_residual(&self, jac: &LocalJacobian, d: &Kkt, f: &Kkt) -> f64 {
        self.apply_jacobian(jac, d, f).norm() / f.norm().max(f64::MIN_POSITIVE)
    }
}

type LocalJacobian = Vec<[f64; 4]>;

/// Stacked KKT unknowns (or residuals) `(u, w, μ1, μ2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Kkt {
    pub u: Vec<f64>,
    pub w: Vec<f64>,
    pub mu1: Vec<f64>,
    pub mu2: Vec<f64>,
}

impl Kkt {
    fn zeros(n: usize, nm: usize) -> Self {
        Self {
            u: vec![0.0; nm],
            w: vec![0.0; n],
            mu1: vec![0.0; nm],
            mu2: vec![0.0; nm],
        }
    }

    fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.u
            .iter()
            .chain(&self.w)
            .chain(&self.mu1)
            .chain(&self.mu2)
            .copied()
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.u
            .iter_mut()
            .chain(&mut self.w)
            .chain(&mut self.mu1)
            .chain(&mut self.mu2)
    }

    pub fn norm_inf(&self) -> f64 {
        self.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    fn dot(&self, o: &Kkt) -> f64 {
        self.iter().zip(o.iter()).map(|(a, b)| a * b).sum()
    }

    fn axpy(&self, t: f64, d: &Kkt) -> Kkt {
        let f = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x + t * y).collect();
        Kkt {
            u: f(&self.u, &d.u),
            w: f(&self.w, &d.w),
            mu1: f(&self.mu1, &d.mu1),
            mu2: f(&self.mu2, &d.mu2),
        }
    }

    fn scaled(&self, t: f64) -> Kkt {
        Kkt::zeros(self.w.len(), self.u.len()).axpy(t, self)
    }
}

pub(crate) fn matvec(h: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    let xc = faer::ColRef::from_slice(x);
    let y = h * xc;
    (0..h.nrows()).map(|i| y[i]).collect()
}

pub(crate) fn cholesky_solve(a: &Mat<f64>, b: &[f64]) -> Option<Vec<f64>> {
    let llt = a.llt(Side::Lower).ok()?;
    let rhs = faer::Col::<f64>::from_fn(b.len(), |i| b[i]);
    let x = llt.solve(&rhs);
    Some((0..b.len()).map(|i| x[i]).collect())
}

/// Solve the subproblem around `state_k` by globalized semismooth Newton,
/// warm-started from `state_k` (including its multipliers).
pub fn solve_subproblem(
    spec: &ProblemSpec,
    eps_k: f64,
    state_k: &IterateState,
    l_k: f64,
    config: &NewtonConfig,
) -> Result<(IterateState, InnerReport)> {
    let sub = Subproblem::new(spec, eps_k, &state_k.u, &state_k.w, l_k)?;
    let start = Kkt {
        u: state_k.u.clone(),
        w: state_k.w.clone(),
        mu1: state_k.mu1.clone(),
        mu2: state_k.mu2.clone(),
    };
    let (z, report) = newton(&sub, start, config)?;
    let lambda = sub.lambda(spec, &z.w);
    Ok((
        IterateState {
            u: z.u,
            w: z.w,
            mu1: z.mu1,
            mu2: z.mu2,
            lambda,
        },
        report,
    ))
}

/// Semismooth Newton iteration on a prepared subproblem.
pub fn newton(sub: &Subproblem, start: Kkt, config: &NewtonConfig) -> Result<(Kkt, InnerReport)> {
    config.validate()?;
    let mut z = start;
    let mut f = sub.residual(&z);
    let mut merit = 0.5 * f.dot(&f);
    let mut report = InnerReport::default();
    let mut best = f.norm_inf();
    for it in 0..config.max_iter {
        let res = f.norm_inf();
        best = best.min(res);
        if res <= config.tol_f.max(sub.residual_floor(&z)) {
            report.iterations = it;
            report.final_residual = res;
            report.final_merit = merit;
            return Ok((z, report));
        }
        let grad = sub.merit_gradient(&z, &f);
        let mut accepted = false;
        if let Some((d, jac)) = sub.newton_direction(&z, &f, config.regularization) {
            if config.check_linear {
                report.linear_residual = report.linear_residual.max(sub.linear_residual(&jac, &d, &f));
            }
            let slope = grad.dot(&d);
            let dn = d.norm();
            if slope <= -config.descent_rho * dn.powf(config.descent_power) {
                if let Some((zn, fn_, mn)) = line_search(sub, &z, &d, merit, slope, config) {
                    z = zn;
                    f = fn_;
                    merit = mn;
                    report.newton_steps += 1;
                    accepted = true;
                }
            }
        }
        if !accepted {
            let d = grad.scaled(-1.0);
            let slope = -grad.dot(&grad);
            match line_search(sub, &z, &d, merit, slope, config) {
                Some((zn, fn_, mn)) => {
                    z = zn;
                    f = fn_;
                    merit = mn;
                    report.gradient_steps += 1;
                }
                None => {
                    return Err(Error::NonConvergence {
                        iterations: it,
                        best_residual: best,
                    })
                }
            }
        }
        report.merit_history.push(merit);
    }
    let res = f.norm_inf();
    if res <= config.tol_f.max(sub.residual_floor(&z)) {
        report.iterations = config.max_iter;
        report.final_residual = res;
        report.final_merit = merit;
        return Ok((z, report));
    }
    Err(Error::NonConvergence {
        iterations: config.max_iter,
        best_residual: best.min(res),
    })
}

fn line_search(
    sub: &Subproblem,
    z: &Kkt,
    d: &Kkt,
    merit: f64,
    slope: f64,
    config: &NewtonConfig,
) -> Option<(Kkt, Kkt, f64)> {
    let mut t = 1.0;
    for _ in 0..config.max_backtracks {
        let zt = z.axpy(t, d);
        let ft = sub.residual(&zt);
        let mt = 0.5 * ft.dot(&ft);
        if mt.is_finite() && mt <= merit + config.sigma * t * slope {
            return Some((zt, ft, mt));
        }
        t *= config.backtrack;
    }
    None
}
