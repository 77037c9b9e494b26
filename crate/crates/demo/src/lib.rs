//! WebAssembly bindings for the static page in `www/`.
//!
//! Three operations: sample the smoothed `|w|^p` term, solve a small 1D
//! instance of the sine-wave example, and solve a small 2D instance of the
//! max-square example. Everything runs single-threaded in the browser.

use fracsparse::analysis::Experiment;
use fracsparse::mm::{mm_solve, MmConfig};
use fracsparse::smoothing::SmoothingParams;
use wasm_bindgen::prelude::*;

/// Largest grid the page may request; keeps a solve under a few seconds.
pub const MAX_N_1D: usize = 65;
pub const MAX_N_2D: usize = 13;

/// `[t, ψ_ε(t), t^{p/2}, ψ'_ε(t)]` interleaved for `samples` points in
/// `[0, t_max]`.
#[wasm_bindgen]
pub fn psi_curve(p: f64, eps: f64, t_max: f64, samples: usize) -> Result<Vec<f64>, JsError> {
    let sp = SmoothingParams::new(p, eps).map_err(|e| JsError::new(&e.to_string()))?;
    if !(t_max > 0.0) || samples < 2 {
        return Err(JsError::new("need t_max > 0 and at least 2 samples"));
    }
    let mut out = Vec::with_capacity(4 * samples);
    for k in 0..samples {
        let t = t_max * k as f64 / (samples - 1) as f64;
        out.extend([t, sp.value(t), t.powf(0.5 * p), sp.derivative(t)]);
    }
    Ok(out)
}

/// Result of a solve. Vectors are exposed as typed arrays.
#[wasm_bindgen]
pub struct Solution {
    w: Vec<f64>,
    u: Vec<f64>,
    u_d: Vec<f64>,
    n: usize,
    m: usize,
    iterations: usize,
    converged: bool,
    phi0: f64,
    spacetime_pct: f64,
    spatial_pct: f64,
}

#[wasm_bindgen]
impl Solution {
    /// Spatial bound, one value per vertex.
    pub fn w(&self) -> Vec<f64> {
        self.w.clone()
    }
    /// Control, time-major: entry `j * n + i` is time node `j`, vertex `i`.
    pub fn u(&self) -> Vec<f64> {
        self.u.clone()
    }
    pub fn u_d(&self) -> Vec<f64> {
        self.u_d.clone()
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn m(&self) -> usize {
        self.m
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }
    pub fn converged(&self) -> bool {
        self.converged
    }
    pub fn phi0(&self) -> f64 {
        self.phi0
    }
    pub fn spacetime_pct(&self) -> f64 {
        self.spacetime_pct
    }
    pub fn spatial_pct(&self) -> f64 {
        self.spatial_pct
    }
}

fn solve(mut exp: Experiment, gamma: f64, p: f64) -> Result<Solution, String> {
    exp.params.gamma = gamma;
    exp.params.p = p;
    let spec = exp.build().map_err(|e| e.to_string())?;
    let (state, rep) = mm_solve(&spec, &MmConfig::default()).map_err(|e| e.to_string())?;
    let u_d = fracsparse::problem::sample_spacetime(&spec.mesh, &spec.grid, |t, x| exp.target.eval(t, x));
    Ok(Solution {
        n: spec.n(),
        m: spec.m(),
        w: state.w,
        u: state.u,
        u_d,
        iterations: rep.records.len(),
        converged: rep.converged(),
        phi0: rep.phi0_limit,
        spacetime_pct: 100.0 * rep.support.spacetime,
        spatial_pct: 100.0 * rep.support.spatial,
    })
}

/// 1D example on `n` vertices and `n` time nodes.
pub fn solve_1d_native(n: usize, gamma: f64, p: f64) -> Result<Solution, String> {
    if !(3..=MAX_N_1D).contains(&n) {
        return Err(format!("n must lie in 3..={MAX_N_1D}"));
    }
    solve(Experiment::example_1d().refined(n), gamma, p)
}

/// 2D example on an `n × n` vertex grid with 9 time nodes.
pub fn solve_2d_native(n: usize, gamma: f64, p: f64) -> Result<Solution, String> {
    if !(3..=MAX_N_2D).contains(&n) {
        return Err(format!("n must lie in 3..={MAX_N_2D}"));
    }
    let mut exp = Experiment::example_2d().refined(n);
    exp.m = 9;
    solve(exp, gamma, p)
}

#[wasm_bindgen]
pub fn solve_1d(n: usize, gamma: f64, p: f64) -> Result<Solution, JsError> {
    solve_1d_native(n, gamma, p).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn solve_2d(n: usize, gamma: f64, p: f64) -> Result<Solution, JsError> {
    solve_2d_native(n, gamma, p).map_err(|e| JsError::new(&e))
}
