//! Experiment presets and the table generators: support versus γ or p,
//! error versus iteration, error versus mesh size, and field dumps.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fracnorm::{assemble_mass, sparse_mul_vec, FractionalKernel, GramSet, QuadConfig};
use crate::mesh::{build_interval_mesh, build_square_mesh, build_time_grid, Mesh, TimeGrid};
use crate::mm::{mm_solve_with, MmConfig, SolveReport, Status};
use crate::problem::{sample_spacetime, IterateState, Params, ProblemSpec, Tracking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    #[serde(rename = "example_1d")]
    Example1d,
    #[serde(rename = "example_2d")]
    Example2d,
    Custom,
}

/// Desired state `u_d(t, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `t sin(1.5 (x - 1))`
    SineWave,
    /// `5 t max(x², y²)`
    MaxSquare,
}

impl Target {
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Target::SineWave => t * (1.5 * (x[0] - 1.0)).sin(),
            Target::MaxSquare => {
                let y = x.get(1).copied().unwrap_or(0.0);
                5.0 * t * (x[0] * x[0]).max(y * y)
            }
        }
    }
}

/// A fully specified problem instance.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    pub preset: PresetName,
    pub params: Params,
    /// 1 (interval) or 2 (square); ignored when `mesh_file` is set.
    pub dim: usize,
    /// Interval, or side of the square.
    pub domain: (f64, f64),
    /// Vertices (1D) or vertices per side (2D).
    pub n: usize,
    /// Time nodes.
    pub m: usize,
    pub t_final: f64,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh_file: Option<PathBuf>,
    #[serde(default)]
    pub quad: QuadConfig,
}

impl Experiment {
    pub fn example_1d() -> Self {
        Self {
            preset: PresetName::Example1d,
            params: Params {
                alpha: 2.0,
                beta: 0.2,
                gamma: 1.0,
                p: 0.01,
                s: 0.1,
                a: 25.0,
            },
            dim: 1,
            domain: (-1.0, 1.0),
            n: 129,
            m: 129,
            t_final: 0.5,
            target: Target::SineWave,
            mesh_file: None,
            quad: QuadConfig::default(),
        }
    }

    pub fn example_2d() -> Self {
        Self {
            preset: PresetName::Example2d,
            params: Params {
                alpha: 2.0,
                beta: 0.2,
                gamma: 1.0,
                p: 0.3,
                s: 0.1,
                a: 50.0,
            },
            dim: 2,
            domain: (-1.0, 1.0),
            n: 34,
            m: 25,
            t_final: 0.3,
            target: Target::MaxSquare,
            mesh_file: None,
            quad: QuadConfig::default(),
        }
    }

    pub fn preset(name: PresetName) -> Result<Self> {
        match name {
            PresetName::Example1d => Ok(Self::example_1d()),
            PresetName::Example2d => Ok(Self::example_2d()),
            PresetName::Custom => Err(Error::InvalidArgument(
                "the custom preset has no defaults; give every field explicitly".into(),
            )),
        }
    }

    /// Same instance on a mesh with `n` vertices (per side) and, in 1D,
    /// `n` time nodes.
    pub fn refined(&self, n: usize) -> Self {
        let mut e = self.clone();
        e.n = n;
        if e.dim == 1 {
            e.m = n;
        }
        e
    }

    pub fn mesh(&self) -> Result<Mesh> {
        if let Some(path) = &self.mesh_file {
            return Mesh::read(path);
        }
        match self.dim {
            1 => build_interval_mesh(self.domain.0, self.domain.1, self.n),
            2 => build_square_mesh(self.domain, self.n),
            d => Err(Error::InvalidArgument(format!("dimension {d} not supported"))),
        }
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        build_time_grid(self.t_final, self.m)
    }

    pub fn build(&self) -> Result<ProblemSpec> {
        let mesh = self.mesh()?;
        let grid = self.grid()?;
        let u_d = sample_spacetime(&mesh, &grid, |t, x| self.target.eval(t, x));
        ProblemSpec::tracking(self.params, mesh, grid, u_d, &self.quad)
    }

    /// Variant sharing pre-assembled matrices (valid while `s` and the mesh
    /// are unchanged).
    fn build_with(&self, params: Params, mesh: &Mesh, grid: &TimeGrid, gram: &GramSet) -> Result<ProblemSpec> {
        let u_d = sample_spacetime(mesh, grid, |t, x| self.target.eval(t, x));
        ProblemSpec::with_gram(
            params,
            mesh.clone(),
            grid.clone(),
            gram.clone(),
            Arc::new(Tracking { a: params.a, u_d }),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Gamma,
    P,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SupportRow {
    pub value: f64,
    pub spacetime: f64,
    pub spatial: f64,
    pub threshold: f64,
    pub phi0: f64,
    pub phi0_limit: f64,
    pub iterations: usize,
    /// See [`SolveReport::worst_descent_slack`].
    pub descent_slack: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SupportTable {
    pub param: SweepParam,
    pub rows: Vec<SupportRow>,
    pub support_tol: f64,
}

impl SupportTable {
    pub fn to_csv(&self) -> String {
        let name = match self.param {
            SweepParam::Gamma => "gamma",
            SweepParam::P => "p",
        };
        let mut s = String::from("#schema=support_table.v1\n");
        let _ = writeln!(s, "{name},spacetime_pct,spatial_pct,threshold,phi0,phi0_limit,iterations,descent_slack,status");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.4},{:.4},{:e},{:.10},{:.10},{},{:.3e},{}",
                r.value,
                100.0 * r.spacetime,
                100.0 * r.spatial,
                r.threshold,
                r.phi0,
                r.phi0_limit,
                r.iterations,
                r.descent_slack,
                r.status
            );
        }
        let _ = writeln!(
            s,
            "# u counts as zero on a cell where |u| <= {:e} * max|u| at every node",
            self.support_tol
        );
        s
    }
}

fn status_label(report: &SolveReport) -> String {
    match &report.status {
        Status::Converged => "converged".into(),
        Status::MaxIterations => "max_iterations".into(),
        Status::Failed(m) => format!("failed: {}", m.replace(',', ";")),
    }
}

fn for_each_row<T: Send>(values: &[f64], f: impl Fn(f64) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        values.par_iter().map(|&v| f(v)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        values.iter().map(|&v| f(v)).collect()
    }
}

/// One solve per value of `γ` or `p`; the Gram matrices are shared. Rows
/// are independent and run concurrently; a failing row is marked in its
/// status column.
pub fn run_support_sweep(exp: &Experiment, mm: &MmConfig, param: SweepParam, values: &[f64]) -> Result<SupportTable> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("sweep list is empty".into()));
    }
    mm.validate()?;
    let mesh = exp.mesh()?;
    let grid = exp.grid()?;
    let kernel = FractionalKernel::new(exp.params.s, mesh.dim)?;
    let gram = GramSet::assemble(&mesh, &grid, &kernel, &exp.quad)?;
    let rows = for_each_row(values, |v| {
        let mut params = exp.params;
        match param {
            SweepParam::Gamma => params.gamma = v,
            SweepParam::P => params.p = v,
        }
        let solved = exp
            .build_with(params, &mesh, &grid, &gram)
            .and_then(|spec| mm_solve_with(&spec, mm, IterateState::zeros(&spec.dofs), |_, _| {}));
        match solved {
            Ok((_, rep)) => SupportRow {
                value: v,
                spacetime: rep.support.spacetime,
                spatial: rep.support.spatial,
                threshold: rep.support.threshold,
                phi0: rep.final_phi0().unwrap_or(f64::NAN),
                phi0_limit: rep.phi0_limit,
                iterations: rep.records.len(),
                descent_slack: rep.worst_descent_slack(),
                status: status_label(&rep),
            },
            Err(e) => SupportRow {
                value: v,
                spacetime: f64::NAN,
                spatial: f64::NAN,
                threshold: f64::NAN,
                phi0: f64::NAN,
                phi0_limit: f64::NAN,
                iterations: 0,
                descent_slack: f64::NAN,
                status: format!("failed: {}", e.to_string().replace(',', ";")),
            },
        }
    });
    Ok(SupportTable {
        param,
        rows,
        support_tol: mm.support_tol,
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConvergenceRow {
    pub k: usize,
    pub err_u: f64,
    pub err_w: f64,
    pub err_phi0: f64,
    /// `Φ_{ε_k}(u_k, w_k)` at the iterate's own smoothing level.
    pub phi: f64,
    pub phi0: f64,
    /// Checkpoint lies beyond termination; errors refer to the final iterate.
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// Number of outer iterations of the run (index of the reference iterate).
    pub final_k: usize,
    pub phi0_ref: f64,
    pub descent_slack: f64,
    pub status: String,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("#schema=convergence_table.v1\n");
        s.push_str("k,err_u,err_w,err_phi0,phi,phi0,truncated\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.4e},{:.4e},{:.5e},{:.6},{:.6},{}",
                r.k, r.err_u, r.err_w, r.err_phi0, r.phi, r.phi0, r.truncated
            );
        }
        let _ = writeln!(
            s,
            "# reference: final iterate k = {} ({}), Phi_0(ref) = {:.6}, worst descent slack {:.3e}",
            self.final_k, self.status, self.phi0_ref, self.descent_slack
        );
        s
    }
}

/// Errors of the iterates at `checkpoints` against the run's own final
/// iterate; a row for the final iterate is appended.
pub fn run_convergence_table(exp: &Experiment, mm: &MmConfig, checkpoints: &[usize]) -> Result<ConvergenceTable> {
    if checkpoints.is_empty() {
        return Err(Error::InvalidArgument("checkpoint list is empty".into()));
    }
    if checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
        return Err(Error::InvalidArgument("checkpoints must be positive and increasing".into()));
    }
    let spec = exp.build()?;
    let mut saved: Vec<(usize, IterateState)> = Vec::new();
    let (last, report) = mm_solve_with(&spec, mm, IterateState::zeros(&spec.dofs), |k, st| {
        if checkpoints.contains(&(k + 1)) {
            saved.push((k + 1, st.clone()));
        }
    })?;
    let final_k = report.records.len();
    let phi0_ref = spec.phi_eps(0.0, &last.u, &last.w)?;
    let row = |k: usize, st: &IterateState, truncated: bool| -> Result<ConvergenceRow> {
        let phi0 = spec.phi_eps(0.0, &st.u, &st.w)?;
        let dw: Vec<f64> = st.w.iter().zip(&last.w).map(|(a, b)| a - b).collect();
        Ok(ConvergenceRow {
            k,
            err_u: spec.u_inner.dist(&st.u, &last.u),
            err_w: spec.w_norm_sq(&dw).max(0.0).sqrt(),
            err_phi0: (phi0 - phi0_ref).abs(),
            phi: report.records.get(k.max(1) - 1).map_or(f64::NAN, |r| r.phi),
            phi0,
            truncated,
        })
    };
    let mut rows = Vec::new();
    for &k in checkpoints {
        match saved.iter().find(|(j, _)| *j == k) {
            Some((_, st)) => rows.push(row(k, st, false)?),
            None => rows.push(row(k.min(final_k), &last, true)?),
        }
    }
    if checkpoints.last() != Some(&final_k) {
        rows.push(row(final_k, &last, false)?);
    }
    Ok(ConvergenceTable {
        rows,
        final_k,
        phi0_ref,
        descent_slack: report.worst_descent_slack(),
        status: status_label(&report),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeshRow {
    pub n: usize,
    pub err_u: f64,
    pub err_w: f64,
    pub descent_slack: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MeshTable {
    pub rows: Vec<MeshRow>,
    pub n_ref: usize,
    pub ref_descent_slack: f64,
}

impl MeshTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("#schema=mesh_table.v1\n");
        s.push_str("N,err_u,err_w_l2,descent_slack,status\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{:.4e},{:.4e},{:.3e},{}", r.n, r.err_u, r.err_w, r.descent_slack, r.status);
        }
        let _ = writeln!(
            s,
            "# reference N = {}; coarse solutions interpolated nodally onto the reference grid, norms with the reference quadrature",
            self.n_ref
        );
        s
    }
}

/// P1 interpolation of a space-time field onto another mesh and time grid.
pub fn interpolate_spacetime(
    from: (&Mesh, &TimeGrid),
    values: &[f64],
    to: (&Mesh, &TimeGrid),
) -> Result<Vec<f64>> {
    let (fm, fg) = from;
    let (tm, tg) = to;
    let nf = fm.n_vertices();
    crate::error::check_len("field", nf * fg.m(), values.len())?;
    // Spatial interpolation slice by slice, then linear in time.
    let mut slices = Vec::with_capacity(fg.m());
    for j in 0..fg.m() {
        slices.push(interpolate_spatial(fm, &values[j * nf..(j + 1) * nf], tm)?);
    }
    let nt = tm.n_vertices();
    let mut out = Vec::with_capacity(nt * tg.m());
    for &t in &tg.nodes {
        let pos = ((t / fg.dt()).floor() as usize).min(fg.m() - 2);
        let theta = ((t - fg.nodes[pos]) / (fg.nodes[pos + 1] - fg.nodes[pos])).clamp(0.0, 1.0);
        for i in 0..nt {
            out.push((1.0 - theta) * slices[pos][i] + theta * slices[pos + 1][i]);
        }
    }
    Ok(out)
}

pub fn interpolate_spatial(from: &Mesh, values: &[f64], to: &Mesh) -> Result<Vec<f64>> {
    (0..to.n_vertices())
        .map(|i| {
            from.interpolate(values, to.vertex(i)).ok_or_else(|| {
                Error::Assembly(format!("vertex {i} of the target mesh lies outside the source mesh"))
            })
        })
        .collect()
}

/// Final iterates for each `N` compared with the solution for `n_ref`.
pub fn run_mesh_study(exp: &Experiment, mm: &MmConfig, n_list: &[usize], n_ref: usize) -> Result<MeshTable> {
    if n_list.is_empty() {
        return Err(Error::InvalidArgument("mesh list is empty".into()));
    }
    if let Some(&bad) = n_list.iter().find(|&&n| n > n_ref) {
        return Err(Error::InvalidArgument(format!("N = {bad} exceeds the reference N = {n_ref}")));
    }
    let solve = |n: usize| -> Result<(ProblemSpec, IterateState, SolveReport)> {
        let spec = exp.refined(n).build()?;
        let (st, rep) = mm_solve_with(&spec, mm, IterateState::zeros(&spec.dofs), |_, _| {})?;
        Ok((spec, st, rep))
    };
    let (rspec, rstate, rrep) = solve(n_ref)?;
    let mass = assemble_mass(&rspec.mesh)?;
    let runs = for_each_row(&n_list.iter().map(|&n| n as f64).collect::<Vec<_>>(), |n| solve(n as usize));
    let mut rows = Vec::new();
    for (&n, run) in n_list.iter().zip(runs) {
        let (spec, st, rep) = run?;
        let u = interpolate_spacetime((&spec.mesh, &spec.grid), &st.u, (&rspec.mesh, &rspec.grid))?;
        let w = interpolate_spatial(&spec.mesh, &st.w, &rspec.mesh)?;
        let dw: Vec<f64> = w.iter().zip(&rstate.w).map(|(a, b)| a - b).collect();
        let mut mdw = vec![0.0; dw.len()];
        sparse_mul_vec(&mass, &dw, &mut mdw);
        let err_w = dw.iter().zip(&mdw).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt();
        rows.push(MeshRow {
            n,
            err_u: rspec.u_inner.dist(&u, &rstate.u),
            err_w,
            descent_slack: rep.worst_descent_slack(),
            status: status_label(&rep),
        });
    }
    Ok(MeshTable {
        rows,
        n_ref,
        ref_descent_slack: rrep.worst_descent_slack(),
    })
}

/// Fields read back by [`read_fields`].
#[derive(Debug, Clone, PartialEq)]
pub struct Fields {
    pub w: Vec<f64>,
    pub u: Vec<f64>,
    pub u_d: Option<Vec<f64>>,
}

fn coords_str(mesh: &Mesh, i: usize) -> String {
    mesh.vertex(i).iter().map(|c| format!("{c:.17e}")).collect::<Vec<_>>().join(" ")
}

/// Write `w.txt` (`x w`), `u.txt` (`t x u`) and, if given, `u_d.txt` into
/// the directory `dir` (created if needed).
pub fn dump_fields(state: &IterateState, mesh: &Mesh, grid: &TimeGrid, u_d: Option<&[f64]>, dir: &Path) -> Result<()> {
    let n = mesh.n_vertices();
    crate::error::check_len("w", n, state.w.len())?;
    crate::error::check_len("u", n * grid.m(), state.u.len())?;
    std::fs::create_dir_all(dir)?;
    let axes = if mesh.dim == 1 { "x" } else { "x y" };
    let mut w = format!("# {axes} w\n");
    for i in 0..n {
        let _ = writeln!(w, "{} {:.17e}", coords_str(mesh, i), state.w[i]);
    }
    std::fs::write(dir.join("w.txt"), w)?;
    let spacetime = |name: &str, v: &[f64]| -> Result<()> {
        crate::error::check_len("space-time field", n * grid.m(), v.len())?;
        let mut s = format!("# t {axes} {name}\n");
        for (j, t) in grid.nodes.iter().enumerate() {
            for i in 0..n {
                let _ = writeln!(s, "{t:.17e} {} {:.17e}", coords_str(mesh, i), v[j * n + i]);
            }
        }
        std::fs::write(dir.join(format!("{name}.txt")), s)?;
        Ok(())
    };
    spacetime("u", &state.u)?;
    if let Some(ud) = u_d {
        spacetime("u_d", ud)?;
    }
    Ok(())
}

fn read_last_column(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty())
        .map(|(no, l)| {
            l.split_whitespace()
                .last()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Parse(format!("{}:{}: malformed value", path.display(), no + 1)))
        })
        .collect()
}

pub fn read_fields(dir: &Path) -> Result<Fields> {
    let ud = dir.join("u_d.txt");
    Ok(Fields {
        w: read_last_column(&dir.join("w.txt"))?,
        u: read_last_column(&dir.join("u.txt"))?,
        u_d: if ud.exists() { Some(read_last_column(&ud)?) } else { None },
    })
}
