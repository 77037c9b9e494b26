#![allow(dead_code)]

pub mod quad;

use fracsparse::fracnorm::QuadConfig;
use fracsparse::mesh::{build_interval_mesh, build_square_mesh, build_time_grid};
use fracsparse::problem::{sample_spacetime, IterateState, Params, ProblemSpec};
use rand::rngs::StdRng;
use rand::Rng;

pub fn params(gamma: f64, p: f64) -> Params {
    Params {
        alpha: 2.0,
        beta: 0.2,
        gamma,
        p,
        s: 0.1,
        a: 25.0,
    }
}

/// 1D instance of the sine-wave example on a coarse grid.
pub fn spec_1d(n: usize, m: usize, params: Params) -> ProblemSpec {
    let mesh = build_interval_mesh(-1.0, 1.0, n).unwrap();
    let grid = build_time_grid(0.5, m).unwrap();
    let u_d = sample_spacetime(&mesh, &grid, |t, x| t * (1.5 * (x[0] - 1.0)).sin());
    ProblemSpec::tracking(params, mesh, grid, u_d, &QuadConfig::default()).unwrap()
}

pub fn spec_2d(n: usize, m: usize, params: Params) -> ProblemSpec {
    let mesh = build_square_mesh((-1.0, 1.0), n).unwrap();
    let grid = build_time_grid(0.3, m).unwrap();
    let u_d = sample_spacetime(&mesh, &grid, |t, x| 5.0 * t * (x[0] * x[0]).max(x[1] * x[1]));
    ProblemSpec::tracking(params, mesh, grid, u_d, &QuadConfig::default()).unwrap()
}

pub fn random_vec(rng: &mut StdRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Feasible random state: `w ∈ [0, 1)`, `|u| ≤ w`.
pub fn random_state(rng: &mut StdRng, spec: &ProblemSpec) -> IterateState {
    let mut st = IterateState::zeros(&spec.dofs);
    let n = spec.n();
    for w in st.w.iter_mut() {
        *w = rng.gen_range(0.0..1.0);
    }
    for (idx, u) in st.u.iter_mut().enumerate() {
        let w = st.w[idx % n];
        *u = rng.gen_range(-w..=w);
    }
    st
}

/// Random tiny subproblem (at most 4 spatial and 16 space-time dofs) with
/// `s < 1/2`.
pub fn tiny_instance(rng: &mut StdRng) -> (ProblemSpec, IterateState, f64, f64) {
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
    let state = random_state(rng, &spec);
    let eps = 10f64.powf(rng.gen_range(-3.0..0.0));
    let l_k = params.a * rng.gen_range(0.5..2.0);
    (spec, state, eps, l_k)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
