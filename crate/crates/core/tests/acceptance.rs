//! End-to-end acceptance runs. Each criterion prints one `PASS`/`FAIL`
//! line (written past the test harness's capture) and then asserts.
//! Solves shared between criteria are cached.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::quad::oracle_entry;
use common::{sub, tiny_instance};
use fracsparse::analysis::{
    run_convergence_table, run_mesh_study, run_support_sweep, ConvergenceTable, Experiment, MeshTable, SupportTable,
    SweepParam,
};
use fracsparse::fracnorm::{assemble_fractional_stiffness, FractionalKernel, QuadConfig};
use fracsparse::mesh::build_interval_mesh;
use fracsparse::mm::{mm_solve, MmConfig, SolveReport};
use fracsparse::problem::IterateState;
use fracsparse::subqp::{brute_force_oracle, solve_penalized_subproblem, solve_subproblem, NewtonConfig, Subproblem};
use rand::rngs::StdRng;
use rand::SeedableRng;

const SUPPORT_TARGET: [f64; 4] = [0.0, 18.5, 43.0, 68.0];
const PHI0_TARGET: f64 = 1.8347;

fn verdict(id: usize, name: &str, passed: bool, detail: &str) {
    let line = format!("{} {id} {name}: {detail}\n", if passed { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    assert!(passed, "criterion {id} ({name}) failed: {detail}");
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed().as_secs_f64())
}

fn gamma_sweep() -> &'static (SupportTable, f64) {
    static T: OnceLock<(SupportTable, f64)> = OnceLock::new();
    T.get_or_init(|| {
        timed(|| {
            run_support_sweep(&Experiment::example_1d(), &MmConfig::default(), SweepParam::Gamma, &[0.0, 1.0, 5.0, 10.0])
                .unwrap()
        })
    })
}

fn p_sweep() -> &'static (SupportTable, f64) {
    static T: OnceLock<(SupportTable, f64)> = OnceLock::new();
    T.get_or_init(|| {
        timed(|| {
            run_support_sweep(
                &Experiment::example_2d(),
                &MmConfig::default(),
                SweepParam::P,
                &[1.0, 0.9, 0.7, 0.3, 0.1, 0.05],
            )
            .unwrap()
        })
    })
}

fn convergence_table() -> &'static ConvergenceTable {
    static T: OnceLock<ConvergenceTable> = OnceLock::new();
    T.get_or_init(|| run_convergence_table(&Experiment::example_1d(), &MmConfig::default(), &[10, 20, 30, 40, 50, 55]).unwrap())
}

fn mesh_study() -> &'static MeshTable {
    static T: OnceLock<MeshTable> = OnceLock::new();
    T.get_or_init(|| run_mesh_study(&Experiment::example_1d(), &MmConfig::default(), &[33, 65, 125], 257).unwrap())
}

/// Full 1D preset solves at `γ = 1` and `γ = 5`.
fn solves_1d() -> &'static Vec<(f64, SolveReport)> {
    static T: OnceLock<Vec<(f64, SolveReport)>> = OnceLock::new();
    T.get_or_init(|| {
        [1.0, 5.0]
            .iter()
            .map(|&gamma| {
                let mut e = Experiment::example_1d();
                e.params.gamma = gamma;
                (gamma, mm_solve(&e.build().unwrap(), &MmConfig::default()).unwrap().1)
            })
            .collect()
    })
}

#[test]
fn criterion_1_support_vs_gamma() {
    let (t, secs) = gamma_sweep();
    let pct: Vec<f64> = t.rows.iter().map(|r| 100.0 * r.spacetime).collect();
    let within = pct.iter().zip(SUPPORT_TARGET).all(|(a, b)| (a - b).abs() <= 6.0);
    let converged = t.rows.iter().all(|r| r.status == "converged");
    let passed = within && pct[0] == 0.0 && converged && *secs < 300.0;
    let detail = format!(
        "vanish % for gamma 0/1/5/10 = {:.1}/{:.1}/{:.1}/{:.1} (target 0/18.5/43/68, tolerance 6 points), {secs:.0}s",
        pct[0], pct[1], pct[2], pct[3]
    );
    verdict(1, "support_vs_gamma", passed, &detail);
}

#[test]
fn criterion_2_support_vs_p() {
    let (t, secs) = p_sweep();
    let pct: Vec<f64> = t.rows.iter().map(|r| 100.0 * r.spatial).collect();
    let at = |p: f64| 100.0 * t.rows.iter().find(|r| r.value == p).unwrap().spatial;
    let max = pct.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let strict_max = pct.iter().zip(&t.rows).all(|(&v, r)| r.value == 0.3 || v < at(0.3));
    let gap = at(0.3) - at(1.0);
    let converged = t.rows.iter().all(|r| r.status == "converged");
    let passed = strict_max && at(0.3) == max && gap >= 10.0 && converged && *secs < 1800.0;
    let listing: Vec<String> = t.rows.iter().zip(&pct).map(|(r, v)| format!("p={}:{v:.1}", r.value)).collect();
    let detail = format!("spatial vanish % {}; gap p=0.3 vs p=1 {gap:.1} points, {secs:.0}s", listing.join(" "));
    verdict(2, "support_vs_p", passed, &detail);
}

#[test]
fn criterion_3_convergence_and_mesh_trends() {
    let t = convergence_table();
    let rows: Vec<_> = t.rows.iter().filter(|r| !r.truncated).collect();
    let cols = |r: &fracsparse::analysis::ConvergenceRow| [r.err_u, r.err_w, r.err_phi0];
    let nonincreasing = rows.windows(2).all(|w| (0..3).all(|c| cols(w[1])[c] <= cols(w[0])[c]));
    // Compare k = 10 with the last checkpoint before the reference iterate.
    let first = rows.iter().find(|r| r.k == 10);
    let last = rows.iter().rev().find(|r| r.k < t.final_k);
    let drop = match (first, last) {
        (Some(a), Some(b)) if b.k > a.k => (0..3).map(|c| cols(a)[c] / cols(b)[c].max(f64::MIN_POSITIVE)).fold(f64::INFINITY, f64::min),
        _ => 0.0,
    };
    let m = mesh_study();
    let mesh_ok = m.rows.windows(2).all(|w| w[1].err_u < w[0].err_u && w[1].err_w < w[0].err_w);
    let rep = &solves_1d()[0].1;
    let phi0 = rep.phi0_limit;
    let rel = (phi0 - PHI0_TARGET).abs() / PHI0_TARGET;
    let passed = nonincreasing && drop >= 100.0 && mesh_ok && rel <= 0.02 && t.status == "converged";
    let mesh: Vec<String> = m.rows.iter().map(|r| format!("N={}:{:.2e}/{:.2e}", r.n, r.err_u, r.err_w)).collect();
    let detail = format!(
        "errors nonincreasing over k={:?}: {nonincreasing}, smallest drop k=10 -> k={} is {drop:.1e}x; mesh errors (u/w) {}; Phi0 at limit {phi0:.4} (raw {:.4}), {:.2}% from {PHI0_TARGET}",
        rows.iter().map(|r| r.k).collect::<Vec<_>>(),
        last.map_or(0, |r| r.k),
        mesh.join(" "),
        rep.final_phi0().unwrap_or(f64::NAN),
        100.0 * rel
    );
    verdict(3, "convergence_and_mesh_trends", passed, &detail);
}

#[test]
fn criterion_4_monotone_majorization() {
    let mut worst = f64::INFINITY;
    let mut runs = 0;
    for (t, _) in [gamma_sweep(), p_sweep()] {
        for r in &t.rows {
            worst = worst.min(r.descent_slack);
            runs += 1;
        }
    }
    worst = worst.min(convergence_table().descent_slack);
    let m = mesh_study();
    worst = worst.min(m.ref_descent_slack);
    runs += 2;
    for r in &m.rows {
        worst = worst.min(r.descent_slack);
        runs += 1;
    }
    for (_, rep) in solves_1d() {
        worst = worst.min(rep.worst_descent_slack());
        runs += 1;
    }
    let passed = worst >= -1e-8;
    let detail = format!("{runs} runs, smallest descent slack / (1 + |Phi|) = {worst:.3e} (bound -1e-8)");
    verdict(4, "monotone_majorization", passed, &detail);
}

#[test]
fn criterion_5_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed_0005);
    let cfg = NewtonConfig {
        tol_f: 1e-12,
        ..NewtonConfig::default()
    };
    let (mut worst_c, mut worst_obj, mut count) = (0.0f64, 0.0f64, 0);
    while count < 20 {
        let (spec, st, eps, l) = tiny_instance(&mut rng);
        if spec.n() * spec.m() + spec.n() > 12 {
            continue;
        }
        count += 1;
        let (ours, _) = solve_subproblem(&spec, eps, &st, l, &cfg).unwrap();
        let (u, w) = brute_force_oracle(&spec, eps, &st, l, 9).unwrap();
        let sp = Subproblem::new(&spec, eps, &st.u, &st.w, l).unwrap();
        let diff = ours.u.iter().zip(&u).chain(ours.w.iter().zip(&w)).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        worst_c = worst_c.max(diff);
        worst_obj = worst_obj.max((sp.objective(&ours.u, &ours.w) - sp.objective(&u, &w)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    let passed = worst_c <= 1e-6 && worst_obj <= 1e-9 && secs < 120.0;
    let detail = format!("{count} instances (<= 12 dofs): max coefficient gap {worst_c:.1e}, max objective gap {worst_obj:.1e}, {secs:.1}s");
    verdict(5, "oracle_equivalence", passed, &detail);
}

#[test]
fn criterion_6_penalty_path() {
    // The first subproblem of the 1D example on a 9-node grid: zero start,
    // ε = ε₀, L = 16 (the accepted constant for a = 25).
    let spec = Experiment::example_1d().refined(9).build().unwrap();
    let st = IterateState::zeros(&spec.dofs);
    let mm = MmConfig::default();
    let (eps, l) = (mm.eps(0), 16.0);
    let cfg = NewtonConfig {
        max_iter: 500,
        tol_f: 1e-11,
        ..NewtonConfig::default()
    };
    let (exact, _) = solve_subproblem(&spec, eps, &st, l, &cfg).unwrap();
    let mut gaps = Vec::new();
    let mut min_ws = Vec::new();
    for delta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let p = solve_penalized_subproblem(&spec, eps, &st, l, delta, &cfg).unwrap();
        gaps.push((spec.u_inner.norm_sq(&sub(&p.u, &exact.u)) + spec.w_norm_sq(&sub(&p.w, &exact.w))).sqrt());
        min_ws.push(p.w.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let min_w = min_ws.iter().cloned().fold(f64::INFINITY, f64::min);
    let decreasing = gaps.windows(2).all(|g| g[1] < g[0]);
    let final_gap = *gaps.last().unwrap();
    let passed = decreasing && final_gap < 1e-4 && min_w >= -1e-10;
    let detail = format!(
        "gaps {} (decreasing: {decreasing}, final < 1e-4: {}); min w_delta {} (required >= -1e-10)",
        gaps.iter().map(|g| format!("{g:.1e}")).collect::<Vec<_>>().join(" "),
        final_gap < 1e-4,
        min_ws.iter().map(|g| format!("{g:.1e}")).collect::<Vec<_>>().join(" ")
    );
    verdict(6, "penalty_path", passed, &detail);
}

#[test]
fn criterion_7_gradient_and_assembly_oracles() {
    let checks = fracsparse::cli::check::run_all();
    let mut notes = Vec::new();
    let mut passed = true;
    for name in ["g_gradient", "f_gradient", "fb_soundness", "kernel_inequality"] {
        let c = checks.iter().find(|c| c.name == name).unwrap();
        passed &= c.passed;
        notes.push(format!("{name}: {}", c.detail));
    }
    let mesh = build_interval_mesh(-1.0, 1.0, 3).unwrap();
    let a = assemble_fractional_stiffness(&mesh, &FractionalKernel::new(0.1, 1).unwrap(), &QuadConfig::default()).unwrap();
    let centre = |x: f64| (1.0 - x.abs()).max(0.0);
    let left = |x: f64| (-x).max(0.0);
    let knots = [-1.0, 0.0, 1.0];
    let err = (a[(1, 1)] - oracle_entry(&centre, &knots, 0.1))
        .abs()
        .max((a[(0, 0)] - oracle_entry(&left, &knots, 0.1)).abs());
    passed &= err < 1e-8;
    notes.push(format!("stiffness diagonal vs quadrature: {err:.1e}"));
    verdict(7, "gradient_and_assembly_oracles", passed, &notes.join("; "));
}

#[test]
fn criterion_8_stationarity() {
    let tol = 10.0 * NewtonConfig::default().tol_f;
    let mut passed = true;
    let mut notes = Vec::new();
    for (gamma, rep) in solves_1d() {
        let s = &rep.stationarity;
        let ok = rep.converged()
            && s.residual() <= tol
            && s.sign_violation <= 1e-8
            && s.complementarity() <= 1e-8
            && s.lambda_gap >= -1e-6;
        passed &= ok;
        notes.push(format!(
            "gamma={gamma}: residual {:.1e} (raw {:.1e}), sign {:.1e}, compl {:.1e}, lambda gap {:.2e} = {:.2e} x p*int|w|^p",
            s.residual(),
            rep.stationarity_raw.residual(),
            s.sign_violation,
            s.complementarity(),
            s.lambda_gap,
            s.lambda_gap / s.lp_term.max(f64::MIN_POSITIVE)
        ));
    }
    verdict(8, "stationarity_at_convergence", passed, &notes.join("; "));
}
