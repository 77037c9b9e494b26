//! Fast self-test: a fixed set of named invariants on tiny instances.

use std::time::Instant;

use faer::Side;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::fracnorm::{sparse_row_sums, QuadConfig};
use crate::mesh::{build_interval_mesh, build_square_mesh, build_time_grid};
use crate::mm::{mm_solve, MmConfig};
use crate::problem::{sample_spacetime, IterateState, Params, ProblemSpec};
use crate::smoothing::{g_grad_with, g_value_with, SmoothingParams};
use crate::subqp::{brute_force_oracle, fb, solve_penalized_subproblem, solve_subproblem, NewtonConfig};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

type Outcome = std::result::Result<String, String>;

const SEED: u64 = 0x5eed;

pub fn run_all() -> Vec<CheckResult> {
    let checks: [(&'static str, fn() -> Outcome); 10] = [
        ("kernel_inequality", kernel_inequality),
        ("fb_soundness", fb_soundness),
        ("psi_properties", psi_properties),
        ("g_gradient", g_gradient),
        ("f_gradient", f_gradient),
        ("stiffness_spd", stiffness_spd),
        ("mass_sums", mass_sums),
        ("oracle_equivalence", oracle_equivalence),
        ("penalty_path", penalty_path),
        ("monotone_descent", monotone_descent),
    ];
    checks
        .iter()
        .map(|&(name, f)| {
            let t0 = Instant::now();
            let out = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
            let (passed, detail) = match out {
                Ok(d) => (true, d),
                Err(d) => (false, d),
            };
            CheckResult {
                name,
                passed,
                detail,
                seconds: t0.elapsed().as_secs_f64(),
            }
        })
        .collect()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_pair(rng: &mut StdRng) -> (f64, f64) {
    let scale = 10f64.powf(rng.gen_range(-6.0..3.0));
    (rng.gen_range(-1.0..1.0) * scale, rng.gen_range(-1.0..1.0) * scale)
}

/// `(a₊ - b₊)(a - b) ≤ (a - b)²`.
fn kernel_inequality() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut violations = 0;
    for _ in 0..100_000 {
        let (a, b) = random_pair(&mut rng);
        if (a.max(0.0) - b.max(0.0)) * (a - b) > (a - b) * (a - b) {
            violations += 1;
        }
    }
    ensure(violations == 0, || format!("{violations} violations"))?;
    Ok("1e5 pairs, 0 violations".into())
}

/// `fb(a, b) = 0` exactly on the complementarity set and nowhere else.
fn fb_soundness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    for _ in 0..100_000 {
        let (a, b) = random_pair(&mut rng);
        let v = fb(a, b);
        let scale = a.abs().max(b.abs());
        if a > 0.0 && b > 0.0 {
            // Strictly positive pair: fb < 0 by a margin ~ min(a, b).
            ensure(v < 0.0, || format!("fb({a:e}, {b:e}) = {v:e} not negative"))?;
        } else {
            ensure(v > 0.0 || scale == 0.0, || format!("fb({a:e}, {b:e}) = {v:e} not positive"))?;
        }
        let c = a.abs();
        ensure(fb(c, 0.0) == 0.0 && fb(0.0, c) == 0.0, || format!("fb nonzero on the axis at {c:e}"))?;
    }
    Ok("1e5 pairs".into())
}

/// Continuity and C¹ at `t = ε²`, derivative by differences, majorization
/// of `t^{p/2}` and exactness for `t ≥ ε²`.
fn psi_properties() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    for _ in 0..2000 {
        let p = rng.gen_range(0.01..=1.0);
        let eps = 10f64.powf(rng.gen_range(-4.0..0.0));
        let sp = SmoothingParams::new(p, eps).map_err(|e| e.to_string())?;
        let e2 = eps * eps;
        let (below, above) = (sp.value(e2 * (1.0 - 1e-12)), sp.value(e2));
        ensure((below - above).abs() <= 1e-10 * above, || format!("jump at ε² for p={p}, ε={eps:e}"))?;
        ensure(
            (sp.derivative(e2 * (1.0 - 1e-12)) - sp.derivative(e2 * (1.0 + 1e-12))).abs()
                <= 1e-9 * sp.derivative(e2),
            || format!("derivative jump at ε² for p={p}"),
        )?;
        let t = e2 * 10f64.powf(rng.gen_range(-3.0..3.0));
        let h = 1e-6 * t;
        let fd = (sp.value(t + h) - sp.value(t - h)) / (2.0 * h);
        ensure((fd - sp.derivative(t)).abs() <= 1e-5 * sp.derivative(t), || {
            format!("ψ' mismatch at t={t:e}: {fd:e} vs {:e}", sp.derivative(t))
        })?;
        let exact = t.powf(0.5 * p);
        ensure(sp.value(t) >= exact * (1.0 - 1e-14), || format!("ψ below t^(p/2) at t={t:e}"))?;
        if t >= e2 {
            ensure(sp.value(t) == exact, || format!("ψ ≠ t^(p/2) above ε² at t={t:e}"))?;
        }
    }
    Ok("2000 random (p, ε, t)".into())
}

fn small_spec(dim: usize, p: f64) -> ProblemSpec {
    let (mesh, grid) = if dim == 1 {
        (build_interval_mesh(-1.0, 1.0, 9).unwrap(), build_time_grid(0.5, 5).unwrap())
    } else {
        (build_square_mesh((-1.0, 1.0), 4).unwrap(), build_time_grid(0.3, 3).unwrap())
    };
    let u_d = sample_spacetime(&mesh, &grid, |t, x| t * (1.5 * (x[0] - 1.0)).sin() + x.get(1).unwrap_or(&0.0));
    let params = Params {
        alpha: 2.0,
        beta: 0.2,
        gamma: 1.0,
        p,
        s: 0.1,
        a: 25.0,
    };
    ProblemSpec::tracking(params, mesh, grid, u_d, &QuadConfig::default()).unwrap()
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let n = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / n.max(f64::MIN_POSITIVE)
}

fn central_difference(n: usize, x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut y = x.to_vec();
    (0..n)
        .map(|i| {
            y[i] = x[i] + h;
            let fp = f(&y);
            y[i] = x[i] - h;
            let fm = f(&y);
            y[i] = x[i];
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

fn g_gradient() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let mut worst = 0.0f64;
    for dim in [1, 2] {
        for p in [0.1, 0.5, 1.0] {
            let spec = small_spec(dim, p);
            let sp = spec.smoothing(0.05);
            let w: Vec<f64> = (0..spec.n()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = g_grad_with(&sp, &w, &spec.quad);
            let fd = central_difference(w.len(), &w, 1e-6, |v| g_value_with(&sp, v, &spec.quad));
            worst = worst.max(rel_err(&fd, &g));
        }
    }
    ensure(worst <= 1e-5, || format!("relative error {worst:e} > 1e-5"))?;
    Ok(format!("relative error {worst:.1e}"))
}

fn f_gradient() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let mut worst = 0.0f64;
    for dim in [1, 2] {
        let spec = small_spec(dim, 0.5);
        let nm = spec.dofs.spacetime_dofs();
        let u: Vec<f64> = (0..nm).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = spec.f_grad(&u).map_err(|e| e.to_string())?;
        // The gradient is taken in the U inner product; differences give
        // its Euclidean representative.
        let ge: Vec<f64> = g.iter().enumerate().map(|(i, v)| v * spec.u_inner.weights[i]).collect();
        let fd = central_difference(nm, &u, 1e-5, |v| spec.f_value(v).unwrap());
        worst = worst.max(rel_err(&fd, &ge));
    }
    ensure(worst <= 1e-7, || format!("relative error {worst:e} > 1e-7"))?;
    Ok(format!("relative error {worst:.1e}"))
}

fn stiffness_spd() -> Outcome {
    let mut detail = Vec::new();
    for dim in [1, 2] {
        let spec = small_spec(dim, 0.5);
        let a = &spec.gram.stiffness;
        let n = a.nrows();
        let mut asym = 0.0f64;
        let mut amax = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                asym = asym.max((a[(i, j)] - a[(j, i)]).abs());
                amax = amax.max(a[(i, j)].abs());
            }
        }
        ensure(asym <= 1e-13 * amax, || format!("{dim}D stiffness asymmetry {asym:e}"))?;
        let eig = a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| format!("{e:?}"))?;
        let lo = eig.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(lo > 0.0, || format!("{dim}D smallest eigenvalue {lo:e}"))?;
        detail.push(format!("{dim}D λ_min = {lo:.3e}"));
    }
    Ok(detail.join(", "))
}

fn mass_sums() -> Outcome {
    for dim in [1, 2] {
        let spec = small_spec(dim, 0.5);
        let area = spec.mesh.measure();
        let consistent: f64 = sparse_row_sums(spec.gram.mass()).iter().sum();
        let lumped: f64 = spec.gram.lumped_space.iter().sum();
        let time: f64 = spec.gram.lumped_time.iter().sum();
        let t_final = *spec.grid.nodes.last().unwrap();
        ensure((consistent - area).abs() <= 1e-13 * area, || format!("{dim}D consistent mass sums to {consistent}"))?;
        ensure((lumped - area).abs() <= 1e-13 * area, || format!("{dim}D lumped mass sums to {lumped}"))?;
        ensure((time - t_final).abs() <= 1e-13, || format!("time weights sum to {time}"))?;
    }
    Ok("1D and 2D".into())
}

fn tiny_instance(rng: &mut StdRng) -> (ProblemSpec, IterateState, f64, f64) {
    let n = rng.gen_range(2..=4);
    let m = rng.gen_range(2..=4);
    let mesh = build_interval_mesh(-1.0, 1.0, n).unwrap();
    let grid = build_time_grid(0.5, m).unwrap();
    let shift: f64 = rng.gen_range(-1.0..1.0);
    let amp: f64 = rng.gen_range(0.2..3.0);
    let u_d = sample_spacetime(&mesh, &grid, |t, x| amp * (t + 0.1) * (2.0 * x[0] + shift).sin());
    let params = Params {
        alpha: rng.gen_range(0.5..3.0),
        beta: rng.gen_range(0.05..1.0),
        gamma: rng.gen_range(0.0..2.0),
        p: rng.gen_range(0.05..=1.0),
        s: rng.gen_range(0.05..0.45),
        a: rng.gen_range(1.0..30.0),
    };
    let spec = ProblemSpec::tracking(params, mesh, grid, u_d, &QuadConfig::default()).unwrap();
    let mut state = IterateState::zeros(&spec.dofs);
    for w in state.w.iter_mut() {
        *w = rng.gen_range(0.0..1.0);
    }
    for (idx, u) in state.u.iter_mut().enumerate() {
        let w = state.w[idx % n];
        *u = rng.gen_range(-w..=w);
    }
    let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
    let l_k = params.a * rng.gen_range(0.5..2.0);
    (spec, state, eps, l_k)
}

/// Semismooth Newton against exhaustive search on tiny subproblems.
fn oracle_equivalence() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 5);
    let config = NewtonConfig {
        tol_f: 1e-12,
        ..NewtonConfig::default()
    };
    let (mut dc, mut dv) = (0.0f64, 0.0f64);
    let count = 20;
    for case in 0..count {
        let (spec, state, eps, l_k) = tiny_instance(&mut rng);
        let (ours, _) = solve_subproblem(&spec, eps, &state, l_k, &config).map_err(|e| format!("case {case}: {e}"))?;
        let (ou, ow) = brute_force_oracle(&spec, eps, &state, l_k, 9).map_err(|e| format!("case {case}: {e}"))?;
        let sub = crate::subqp::Subproblem::new(&spec, eps, &state.u, &state.w, l_k).map_err(|e| e.to_string())?;
        let c = ours
            .u
            .iter()
            .zip(&ou)
            .chain(ours.w.iter().zip(&ow))
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let v = (sub.objective(&ours.u, &ours.w) - sub.objective(&ou, &ow)).abs();
        ensure(c <= 1e-6 && v <= 1e-9, || format!("case {case}: coefficient gap {c:e}, objective gap {v:e}"))?;
        dc = dc.max(c);
        dv = dv.max(v);
    }
    Ok(format!("{count} instances, max gaps {dc:.1e} / {dv:.1e}"))
}

/// Penalized solutions approach the constrained one as δ → 0. With the
/// discrete W inner product `w ≥ 0` holds only up to O(δ) (A_s has
/// positive off-diagonal entries), so the negative part must shrink with δ.
fn penalty_path() -> Outcome {
    let spec = small_spec(1, 0.5);
    let mut state = IterateState::zeros(&spec.dofs);
    state.w.iter_mut().for_each(|w| *w = 0.3);
    let config = NewtonConfig {
        tol_f: 1e-11,
        max_iter: 500,
        ..NewtonConfig::default()
    };
    let (exact, _) = solve_subproblem(&spec, 0.1, &state, 25.0, &config).map_err(|e| e.to_string())?;
    let wmax = exact.w.iter().fold(0.0f64, |a, w| a.max(w.abs()));
    let mut last = f64::INFINITY;
    let mut min_w = f64::INFINITY;
    for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let pen = solve_penalized_subproblem(&spec, 0.1, &state, 25.0, delta, &config).map_err(|e| e.to_string())?;
        let lo = pen.w.iter().cloned().fold(f64::INFINITY, f64::min);
        ensure(lo >= -delta * wmax, || format!("min w = {lo:e} at δ = {delta:e}"))?;
        min_w = min_w.min(lo);
        let du: Vec<f64> = pen.u.iter().zip(&exact.u).map(|(a, b)| a - b).collect();
        let dw: Vec<f64> = pen.w.iter().zip(&exact.w).map(|(a, b)| a - b).collect();
        let gap = (spec.u_inner.norm_sq(&du) + spec.w_norm_sq(&dw)).max(0.0).sqrt();
        ensure(gap <= last * (1.0 + 1e-9), || format!("gap grew to {gap:e} at δ = {delta:e}"))?;
        last = gap;
    }
    ensure(last < 1e-4, || format!("final gap {last:e}"))?;
    Ok(format!("final gap {last:.1e}, min w {min_w:.1e}"))
}

fn monotone_descent() -> Outcome {
    let spec = small_spec(1, 0.5);
    let config = MmConfig {
        max_outer: 80,
        ..MmConfig::default()
    };
    let (_, report) = mm_solve(&spec, &config).map_err(|e| e.to_string())?;
    let mut worst = f64::INFINITY;
    for r in &report.records {
        let bound = -1e-8 * (1.0 + r.phi.abs());
        ensure(r.descent_slack >= bound, || format!("k = {}: slack {:e}", r.k, r.descent_slack))?;
        ensure(r.phi <= r.phi_prev + 1e-12 * (1.0 + r.phi.abs()), || format!("k = {}: Φ increased", r.k))?;
        worst = worst.min(r.descent_slack);
    }
    Ok(format!("{} steps, min slack {worst:.1e}", report.records.len()))
}
