//! Assembly checks, including an independent adaptive-quadrature
//! evaluation of the singular double integral for single hat functions.

mod common;

use common::quad::oracle_entry;

use fracsparse::fracnorm::{
    assemble_fractional_stiffness, assemble_mass, assemble_spacetime_mass, normalization_constant, sparse_get,
    time_average_pairing, FractionalKernel, QuadConfig,
};
use fracsparse::mesh::{build_interval_mesh, build_square_mesh, build_time_grid, Mesh};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn stiffness_diagonal_matches_adaptive_quadrature() {
    let mesh = build_interval_mesh(-1.0, 1.0, 3).unwrap();
    let a = assemble_fractional_stiffness(&mesh, &FractionalKernel::new(0.1, 1).unwrap(), &QuadConfig::default()).unwrap();
    let knots = [-1.0, 0.0, 1.0];
    let centre = |x: f64| (1.0 - x.abs()).max(0.0);
    let left = |x: f64| (-x).max(0.0);
    let want_c = oracle_entry(&centre, &knots, 0.1);
    let want_l = oracle_entry(&left, &knots, 0.1);
    assert!((a[(1, 1)] - want_c).abs() < 1e-8, "{} vs {want_c}", a[(1, 1)]);
    assert!((a[(0, 0)] - want_l).abs() < 1e-8, "{} vs {want_l}", a[(0, 0)]);
}

#[test]
fn stiffness_diagonal_other_orders() {
    for s in [0.05, 0.25, 0.4] {
        let mesh = build_interval_mesh(-1.0, 1.0, 3).unwrap();
        let a = assemble_fractional_stiffness(&mesh, &FractionalKernel::new(s, 1).unwrap(), &QuadConfig::default()).unwrap();
        let want = oracle_entry(&|x: f64| (1.0 - x.abs()).max(0.0), &[-1.0, 0.0, 1.0], s);
        assert!((a[(1, 1)] - want).abs() < 1e-7 * want, "s = {s}: {} vs {want}", a[(1, 1)]);
    }
}

#[test]
fn normalization_constant_matches_closed_form() {
    // d = 1, s = 1/4: Γ(s + 1/2) = Γ(1 - s), leaving s 2^{2s} / √π.
    let s = 0.25;
    let want = 0.25 * std::f64::consts::SQRT_2 / std::f64::consts::PI.sqrt();
    assert!((normalization_constant(1, s) - want).abs() < 1e-12 * want);
    assert!(FractionalKernel::new(1.0, 1).is_err());
    assert!(FractionalKernel::new(0.0, 2).is_err());
}

fn check_spd(mesh: &Mesh, s: f64) {
    let a = assemble_fractional_stiffness(mesh, &FractionalKernel::new(s, mesh.dim).unwrap(), &QuadConfig::default()).unwrap();
    let n = a.nrows();
    for i in 0..n {
        for j in 0..n {
            assert_eq!(a[(i, j)], a[(j, i)]);
        }
    }
    let eig = a.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    assert!(eig.iter().all(|&e| e > 0.0), "{eig:?}");
}

#[test]
fn stiffness_symmetric_positive_definite() {
    check_spd(&build_interval_mesh(-1.0, 1.0, 17).unwrap(), 0.1);
    check_spd(&build_interval_mesh(0.0, 3.0, 9).unwrap(), 0.4);
    check_spd(&build_square_mesh((-1.0, 1.0), 4).unwrap(), 0.1);
    check_spd(&build_square_mesh((0.0, 1.0), 3).unwrap(), 0.3);
}

#[test]
fn mass_matrix_entries() {
    let m = assemble_mass(&build_interval_mesh(-1.0, 1.0, 5).unwrap()).unwrap();
    let h = 0.5;
    assert!((sparse_get(&m, 2, 2) - 2.0 * h / 3.0).abs() < 1e-15);
    assert!((sparse_get(&m, 2, 3) - h / 6.0).abs() < 1e-15);
    let sq = assemble_mass(&build_square_mesh((-1.0, 1.0), 3).unwrap()).unwrap();
    let total: f64 = sq.iter().map(|(v, _)| *v).sum();
    assert!((total - 4.0).abs() < 1e-13);
}

#[test]
fn spacetime_mass_kronecker() {
    let mesh = build_interval_mesh(-1.0, 1.0, 2).unwrap();
    let grid = build_time_grid(1.0, 2).unwrap();
    let st = assemble_spacetime_mass(&mesh, &grid).unwrap();
    let mt = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
    let ms = [[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]];
    for (r, c) in (0..4).flat_map(|r| (0..4).map(move |c| (r, c))) {
        let want = mt[r / 2][c / 2] * ms[r % 2][c % 2];
        assert!((st.entry(r, c) - want).abs() < 1e-15);
    }
    let ones = vec![1.0; 4];
    assert!((st.inner(&ones, &ones).unwrap() - 2.0).abs() < 1e-12);
}

#[test]
fn time_average_pairing_examples() {
    let mesh = build_square_mesh((-1.0, 1.0), 4).unwrap();
    let grid = build_time_grid(0.3, 5).unwrap();
    let st = assemble_spacetime_mass(&mesh, &grid).unwrap();
    let (n, nm) = (16, 80);
    assert!((time_average_pairing(&st, &vec![1.0; nm], &vec![1.0; n]).unwrap() - 1.2).abs() < 1e-12);
    assert_eq!(time_average_pairing(&st, &vec![0.0; nm], &vec![1.0; n]).unwrap(), 0.0);
    let mut rng = StdRng::seed_from_u64(3);
    let v: Vec<f64> = (0..nm).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    // Direct evaluation: Σ over all entries of the Kronecker product.
    let ext: Vec<f64> = (0..nm).map(|idx| z[idx % n]).collect();
    let mut want = 0.0;
    for r in 0..nm {
        for c in 0..nm {
            want += v[r] * st.entry(r, c) * ext[c];
        }
    }
    assert!((time_average_pairing(&st, &v, &z).unwrap() - want).abs() < 1e-12);
    assert!(time_average_pairing(&st, &v[..10], &z).is_err());
}

#[test]
fn norm_of_smooth_function_converges_under_refinement() {
    let k = FractionalKernel::new(0.1, 1).unwrap();
    let values: Vec<f64> = [9, 17, 33, 65]
        .iter()
        .map(|&n| {
            let mesh = build_interval_mesh(-1.0, 1.0, n).unwrap();
            let a = assemble_fractional_stiffness(&mesh, &k, &QuadConfig::default()).unwrap();
            let w: Vec<f64> = (0..n).map(|i| (1.3 * mesh.vertex(i)[0]).cos()).collect();
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += w[i] * a[(i, j)] * w[j];
                }
            }
            acc
        })
        .collect();
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{values:?}");
}

proptest! {
    #[test]
    fn lumped_and_consistent_mass_total(n in 2usize..30, m in 2usize..30, t in 0.1f64..3.0) {
        let mesh = build_interval_mesh(-1.0, 1.0, n).unwrap();
        let grid = build_time_grid(t, m).unwrap();
        let st = assemble_spacetime_mass(&mesh, &grid).unwrap();
        let ones = vec![1.0; n * m];
        prop_assert!((st.inner(&ones, &ones).unwrap() - 2.0 * t).abs() < 1e-12 * t);
        prop_assert!((mesh.lumped_mass().iter().sum::<f64>() - 2.0).abs() < 1e-12);
        prop_assert!((grid.lumped_weights().iter().sum::<f64>() - t).abs() < 1e-12 * t);
    }
}
