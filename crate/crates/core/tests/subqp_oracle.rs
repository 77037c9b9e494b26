mod common;

use common::{max_abs_diff, params, random_state, spec_1d, sub, tiny_instance};
use fracsparse::mm::{mm_solve, MmConfig};
use fracsparse::problem::{sample_spacetime, IterateState, ProblemSpec};
use fracsparse::subqp::{
    brute_force_oracle, fb, newton, solve_penalized_subproblem, solve_subproblem, stationarity_residual, Kkt, NewtonConfig,
    Subproblem,
};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn tight() -> NewtonConfig {
    NewtonConfig {
        tol_f: 1e-12,
        ..NewtonConfig::default()
    }
}

#[test]
fn fb_examples() {
    assert_eq!(fb(1.0, 0.0), 0.0);
    assert_eq!(fb(0.0, 0.0), 0.0);
    assert!((fb(1.0, 1.0) - (2f64.sqrt() - 2.0)).abs() < 1e-15);
}

proptest! {
    #[test]
    fn fb_vanishes_exactly_on_complementary_pairs(a in -1e3f64..1e3, b in -1e3f64..1e3) {
        // Exact complementary inputs.
        prop_assert!(fb(a.abs(), 0.0).abs() <= 1e-9 && fb(0.0, b.abs()).abs() <= 1e-9);
        let v = fb(a, b);
        if a < 0.0 || b < 0.0 {
            // √(a²+b²) ≥ max(a, b) gives fb ≥ -min(a, b).
            prop_assert!(v >= -a.min(b) * (1.0 - 1e-12));
        } else {
            // -fb = 2ab / (a + b + √(a²+b²)) ≥ (2 - √2) min(a, b).
            prop_assert!(-v >= (2.0 - 2f64.sqrt()) * a.min(b) * (1.0 - 1e-12));
        }
    }
}

/// `(α + L) u = L u_k - f'(u_k)` wherever the bound is inactive.
fn unconstrained_u(spec: &ProblemSpec, u_k: &[f64], l: f64) -> Vec<f64> {
    let g = spec.f_grad(u_k).unwrap();
    u_k.iter().zip(&g).map(|(u, g)| (l * u - g) / (spec.params.alpha + l)).collect()
}

#[test]
fn inactive_entries_solve_the_unconstrained_equation() {
    let spec = spec_1d(9, 5, params(1.0, 0.5));
    let mut rng = StdRng::seed_from_u64(1);
    let st = random_state(&mut rng, &spec);
    let (sol, _) = solve_subproblem(&spec, 0.1, &st, 16.0, &tight()).unwrap();
    let free = unconstrained_u(&spec, &st.u, 16.0);
    let mut inactive = 0;
    for idx in 0..sol.u.len() {
        if sol.u[idx].abs() < sol.w[idx % 9] - 1e-8 {
            inactive += 1;
            assert!((sol.u[idx] - free[idx]).abs() < 1e-8);
        } else {
            // Active: u is the clipped free value.
            let w = sol.w[idx % 9];
            assert!((sol.u[idx] - free[idx].clamp(-w, w)).abs() < 1e-8);
        }
    }
    assert!(inactive > 0);
}

#[test]
fn tiny_instance_matches_oracle() {
    let spec = spec_1d(3, 2, params(1.0, 0.5));
    let mut rng = StdRng::seed_from_u64(2);
    let st = random_state(&mut rng, &spec);
    let (ours, _) = solve_subproblem(&spec, 0.05, &st, 16.0, &tight()).unwrap();
    let (u, w) = brute_force_oracle(&spec, 0.05, &st, 16.0, 9).unwrap();
    assert!(max_abs_diff(&ours.u, &u) < 1e-6 && max_abs_diff(&ours.w, &w) < 1e-6);
}

#[test]
fn oracle_refuses_large_instances() {
    let spec = spec_1d(9, 5, params(1.0, 0.5));
    let st = IterateState::zeros(&spec.dofs);
    assert!(brute_force_oracle(&spec, 0.1, &st, 16.0, 9).is_err());
}

/// Spiky target: the oracle clips u at ±w.
#[test]
fn oracle_clips_at_active_bounds() {
    let mesh = fracsparse::mesh::build_interval_mesh(-1.0, 1.0, 3).unwrap();
    let grid = fracsparse::mesh::build_time_grid(0.5, 3).unwrap();
    let u_d = sample_spacetime(&mesh, &grid, |t, x| if x[0] == 0.0 && t > 0.2 { 8.0 } else { 0.1 });
    let spec = ProblemSpec::tracking(params(1.0, 0.5), mesh, grid, u_d, &Default::default()).unwrap();
    let st = IterateState::zeros(&spec.dofs);
    let (u, w) = brute_force_oracle(&spec, 0.1, &st, 30.0, 9).unwrap();
    let free = unconstrained_u(&spec, &st.u, 30.0);
    let spike = 2 * 3 + 1;
    assert!(free[spike] > w[1] + 0.1);
    assert!((u[spike] - w[1]).abs() < 1e-12);
}

#[test]
fn oracle_beats_random_feasible_points() {
    let mut rng = StdRng::seed_from_u64(4);
    let (spec, st, eps, l) = tiny_instance(&mut rng);
    let (u, w) = brute_force_oracle(&spec, eps, &st, l, 9).unwrap();
    let sp = Subproblem::new(&spec, eps, &st.u, &st.w, l).unwrap();
    let best = sp.objective(&u, &w);
    for _ in 0..1000 {
        let cand = random_state(&mut rng, &spec);
        let scale: f64 = rng.gen_range(0.0..3.0);
        let cu: Vec<f64> = cand.u.iter().map(|v| v * scale).collect();
        let cw: Vec<f64> = cand.w.iter().map(|v| v * scale).collect();
        assert!(best <= sp.objective(&cu, &cw) + 1e-12);
    }
}

#[test]
fn odd_target_gives_odd_u_and_even_w() {
    let mesh = fracsparse::mesh::build_interval_mesh(-1.0, 1.0, 11).unwrap();
    let grid = fracsparse::mesh::build_time_grid(0.5, 4).unwrap();
    let u_d = sample_spacetime(&mesh, &grid, |t, x| t * (2.0 * x[0]).sin());
    let spec = ProblemSpec::tracking(params(1.0, 0.5), mesh, grid, u_d, &Default::default()).unwrap();
    let st = IterateState::zeros(&spec.dofs);
    let (sol, _) = solve_subproblem(&spec, 0.1, &st, 16.0, &tight()).unwrap();
    for i in 0..11 {
        assert!((sol.w[i] - sol.w[10 - i]).abs() < 1e-8);
        for j in 0..4 {
            assert!((sol.u[j * 11 + i] + sol.u[j * 11 + 10 - i]).abs() < 1e-8);
        }
    }
}

#[test]
fn warm_start_does_not_change_the_solution() {
    let spec = spec_1d(9, 5, params(1.0, 0.3));
    let mut rng = StdRng::seed_from_u64(6);
    let st = random_state(&mut rng, &spec);
    let sp = Subproblem::new(&spec, 0.1, &st.u, &st.w, 16.0).unwrap();
    let start = |s: &IterateState| Kkt {
        u: s.u.clone(),
        w: s.w.clone(),
        mu1: s.mu1.clone(),
        mu2: s.mu2.clone(),
    };
    let other = random_state(&mut rng, &spec);
    let (a, ra) = newton(&sp, start(&st), &tight()).unwrap();
    let (b, _) = newton(&sp, start(&other), &tight()).unwrap();
    assert!(max_abs_diff(&a.u, &b.u) < 1e-6 && max_abs_diff(&a.w, &b.w) < 1e-6);
    assert!(ra.merit_history.windows(2).all(|m| m[1] <= m[0]));
}

#[test]
fn newton_systems_are_solved_accurately() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..5 {
        let (spec, st, eps, l) = tiny_instance(&mut rng);
        let cfg = NewtonConfig {
            check_linear: true,
            ..tight()
        };
        let (_, rep) = solve_subproblem(&spec, eps, &st, l, &cfg).unwrap();
        assert!(rep.linear_residual <= 1e-10, "{}", rep.linear_residual);
    }
}

#[test]
fn feasibility_and_signs_of_the_solution() {
    let spec = spec_1d(17, 9, params(5.0, 0.01));
    let st = IterateState::zeros(&spec.dofs);
    let cfg = NewtonConfig::default();
    let (sol, rep) = solve_subproblem(&spec, 0.1, &st, 16.0, &cfg).unwrap();
    assert!(rep.final_residual <= cfg.tol_f);
    assert!(sol.infeasibility(&spec.dofs) <= cfg.feas_tol);
    assert!(sol.mu1.iter().chain(&sol.mu2).all(|&m| m <= cfg.feas_tol));
}

#[test]
fn weak_penalty_recovers_the_unconstrained_solution() {
    let spec = spec_1d(9, 3, params(1.0, 0.5));
    let mut rng = StdRng::seed_from_u64(8);
    let st = random_state(&mut rng, &spec);
    let cfg = NewtonConfig {
        max_iter: 500,
        ..tight()
    };
    let pen = solve_penalized_subproblem(&spec, 0.1, &st, 16.0, 1e9, &cfg).unwrap();
    // Without the bound the w-part is minimized by w = 0.
    assert!(max_abs_diff(&pen.u, &unconstrained_u(&spec, &st.u, 16.0)) < 1e-6);
    assert!(pen.w.iter().all(|w| w.abs() < 1e-6));
    assert!(solve_penalized_subproblem(&spec, 0.1, &st, 16.0, 0.0, &cfg).is_err());
}

#[test]
fn penalty_path_approaches_the_constrained_solution() {
    let spec = spec_1d(9, 5, params(1.0, 0.5));
    let mut rng = StdRng::seed_from_u64(9);
    let st = random_state(&mut rng, &spec);
    let cfg = NewtonConfig {
        max_iter: 500,
        tol_f: 1e-11,
        ..NewtonConfig::default()
    };
    let (exact, _) = solve_subproblem(&spec, 0.1, &st, 16.0, &cfg).unwrap();
    let gaps: Vec<f64> = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
        .iter()
        .map(|&d| {
            let p = solve_penalized_subproblem(&spec, 0.1, &st, 16.0, d, &cfg).unwrap();
            (spec.u_inner.norm_sq(&sub(&p.u, &exact.u)) + spec.w_norm_sq(&sub(&p.w, &exact.w))).sqrt()
        })
        .collect();
    assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    assert!(gaps[4] < 1e-4);
}

/// A state built to satisfy the stationarity system: γ = 0, `w ≡ 1/2`,
/// one active upper bound per node carrying the multiplier that balances
/// `β A_s w`, and `u_d` chosen so the u-equation holds.
#[test]
fn hand_built_stationary_state() {
    let base = spec_1d(9, 3, params(0.0, 0.5));
    let (n, m) = (9, 3);
    let w = vec![0.5; n];
    let mut aw = vec![0.0; n];
    for i in 0..n {
        for k in 0..n {
            aw[i] += base.gram.stiffness[(i, k)] * w[k];
        }
    }
    let mut st = IterateState::zeros(&base.dofs);
    st.w = w.clone();
    let tau = &base.gram.lumped_time;
    let mass = &base.gram.lumped_space;
    for i in 0..n {
        let c = -base.params.beta * aw[i] / mass[i];
        assert!(c < 0.0);
        let idx = 2 * n + i;
        st.u[idx] = w[i];
        st.mu1[idx] = c / tau[2];
        for j in 0..2 {
            st.u[j * n + i] = 0.2 * (j as f64 - 0.5);
        }
    }
    let (a, alpha) = (base.params.a, base.params.alpha);
    let u_d: Vec<f64> = (0..n * m)
        .map(|k| st.u[k] + (alpha * st.u[k] - st.mu1[k] + st.mu2[k]) / a)
        .collect();
    let spec = ProblemSpec::tracking(base.params, base.mesh.clone(), base.grid.clone(), u_d, &Default::default()).unwrap();
    let rep = stationarity_residual(&spec, &st, 0.0);
    assert!(rep.residual() < 1e-10, "{rep:?}");
    assert!(rep.complementarity() < 1e-12 && rep.sign_violation == 0.0 && rep.infeasibility == 0.0);
}

#[test]
fn perturbed_solution_is_not_stationary() {
    let spec = spec_1d(17, 9, params(1.0, 0.5));
    let (st, _) = mm_solve(&spec, &MmConfig::default()).unwrap();
    let before = stationarity_residual(&spec, &st, 0.0).residual();
    let mut moved = st.clone();
    moved.u.iter_mut().for_each(|u| *u += 1e-2);
    let after = stationarity_residual(&spec, &moved, 0.0).residual();
    assert!(after >= before + 1e-3, "{before} -> {after}");
}
