//! Discrete spectra checked against analytic values and independent
//! reference computations.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::Array2;
use ndarray_linalg::c64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qg2p_core::bc_maps::{lift_one_particle, BoundaryMap};
use qg2p_core::eigensolve::{solve, solve_form, Method, SolveOptions};
use qg2p_core::form_assembly::{assemble_one_particle, assemble_two_particle, DiscreteForm, Mesh, Pencil};
use qg2p_core::graph::{build_graph, GraphSpec, MetricGraph};
use qg2p_core::linalg::CsrMatrix;
use qg2p_core::spectral_analysis::lift_spectrum;
use qg2p_core::symmetry::{sector_pencil, Sector};
use qg2p_core::vertex_conditions::{standard_family, vertex_rules, Family, VertexConditions, VertexRule};
use qg2p_core::Error;

fn interval() -> MetricGraph {
    build_graph(&GraphSpec::interval(1.0)).unwrap()
}

fn all_eigs<S: qg2p_core::Field>(p: &Pencil<S>) -> Vec<f64> {
    let opts = SolveOptions {
        method: Method::Dense,
        ..SolveOptions::default()
    };
    solve(p, p.dim(), &opts).unwrap().eigenvalues
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// Number of eigenvalues below `x` of the symmetric tridiagonal matrix
/// with diagonal `d` and off-diagonal `e` (Sturm count of the LDLᵀ pivots).
fn sturm_count(d: &[f64], e: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = d[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..d.len() {
        let prev = if q.abs() < 1e-300 { 1e-300 } else { q };
        q = d[i] - x - e[i - 1] * e[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (from 0) by bisection.
fn tridiagonal_eigenvalue(d: &[f64], e: &[f64], k: usize) -> f64 {
    let r = d.iter().map(|v| v.abs()).fold(0.0, f64::max) + 2.0 * e.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let (mut lo, mut hi) = (-r, r);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(d, e, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Second-order finite differences for `−u''` on `[0, 1]` with
/// `u'(0) = −α u(0)`, `u'(1) = α u(1)` (ghost points), symmetrized by the
/// half weights of the end rows.
fn robin_fd(alpha: f64, cells: usize, count: usize) -> Vec<f64> {
    let h = 1.0 / cells as f64;
    let n = cells + 1;
    let mut d = vec![2.0 / (h * h); n];
    let mut e = vec![-1.0 / (h * h); n - 1];
    d[0] = 2.0 * (1.0 - h * alpha) / (h * h);
    d[n - 1] = d[0];
    // rows 0 and n−1 carry −2/h² couplings; with weights w = (½, 1, …, 1, ½)
    // the matrix W^{½} T W^{−½} is symmetric with off-diagonal −√2/h² there
    e[0] = -(2.0f64).sqrt() / (h * h);
    e[n - 2] = e[0];
    (0..count).map(|k| tridiagonal_eigenvalue(&d, &e, k)).collect()
}

/// Root of `κ tanh(κ/2) = α`, the decay rate of the symmetric bound state.
fn robin_kappa(alpha: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12, 10.0 * alpha.max(1.0));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (mid / 2.0).tanh() > alpha {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn fd_oracle_agrees_with_the_transcendental_root() {
    let k = robin_kappa(1.0);
    let fd = robin_fd(1.0, 2000, 1);
    assert!(close(fd[0], -k * k, 1e-5), "{} vs {}", fd[0], -k * k);
}

#[test]
fn robin_interval_matches_finite_differences() {
    let g = interval();
    let vc = standard_family(&Family::Robin(1.0), &g).unwrap();
    let form = assemble_one_particle::<f64>(&g, &vc, &Mesh::new(&g, 401).unwrap()).unwrap();
    let fem = solve_form(&form, 4).unwrap().eigenvalues;
    let fd = robin_fd(1.0, 2000, 4);
    assert!(fem[0] < 0.0);
    for (a, b) in fem.iter().zip(&fd) {
        assert!(close(*a, *b, 2e-4), "{a} vs {b}");
    }
}

#[test]
fn robin_square_matches_kronecker_sum_of_finite_differences() {
    let g = interval();
    let vc = standard_family(&Family::Robin(1.0), &g).unwrap();
    let map = lift_one_particle(&vc, &g);
    let form = assemble_two_particle::<f64>(&g, &map, &Mesh::new(&g, 41).unwrap()).unwrap();
    let fem = solve_form(&form, 6).unwrap().eigenvalues;
    let fd = robin_fd(1.0, 2000, 4);
    let mut sums: Vec<f64> = fd.iter().flat_map(|a| fd.iter().map(move |b| a + b)).collect();
    sums.sort_by(f64::total_cmp);
    for (a, b) in fem.iter().zip(&sums) {
        assert!(close(*a, *b, 5e-3), "{a} vs {b}");
    }
}

#[test]
fn dirichlet_square_first_ten() {
    let g = interval();
    let map = lift_one_particle(&standard_family(&Family::Dirichlet, &g).unwrap(), &g);
    let form = assemble_two_particle::<f64>(&g, &map, &Mesh::new(&g, 65).unwrap()).unwrap();
    let got = solve_form(&form, 10).unwrap().eigenvalues;
    let mut exact: Vec<f64> = (1..8).flat_map(|n| (1..8).map(move |m| PI * PI * (n * n + m * m) as f64)).collect();
    exact.sort_by(f64::total_cmp);
    for (a, b) in got.iter().zip(&exact) {
        assert!((a - b).abs() / b < 0.01, "{a} vs {b}");
    }
}

#[test]
fn refinement_reduces_the_error_fourfold() {
    let g = interval();
    let map = lift_one_particle(&standard_family(&Family::Dirichlet, &g).unwrap(), &g);
    let err = |n| {
        let form = assemble_two_particle::<f64>(&g, &map, &Mesh::new(&g, n).unwrap()).unwrap();
        solve_form(&form, 1).unwrap().eigenvalues[0] - 2.0 * PI * PI
    };
    let ratio = err(33) / err(65);
    assert!((3.7..4.3).contains(&ratio), "ratio {ratio}");
}

fn two_edge_graph() -> MetricGraph {
    build_graph(&GraphSpec::star(&[1.0, 0.7])).unwrap()
}

#[test]
fn lifted_spectrum_is_a_tensor_sum() {
    let g = two_edge_graph();
    let vc = vertex_rules(
        &g,
        &[VertexRule::Delta { strength: 1.5 }, VertexRule::Kirchhoff, VertexRule::Robin { alpha: 0.7 }],
    )
    .unwrap();
    let mesh = Mesh::new(&g, 8).unwrap();
    let one = all_eigs(&assemble_one_particle::<f64>(&g, &vc, &mesh).unwrap().pencil());
    let form = assemble_two_particle::<f64>(&g, &lift_one_particle(&vc, &g), &mesh).unwrap();
    for sector in [Sector::Full, Sector::Boson, Sector::Fermion] {
        let two = all_eigs(&sector_pencil(&form, sector).unwrap());
        let lifted = lift_spectrum(&one, usize::MAX, sector);
        assert_eq!(two.len(), lifted.len());
        for (a, b) in two.iter().zip(&lifted) {
            assert!(close(*a, *b, 1e-9), "{sector:?}: {a} vs {b}");
        }
    }
}

#[test]
fn complex_conditions_need_complex_scalars() {
    let g = interval();
    let a = 0.8;
    let p = Array2::<c64>::zeros((2, 2));
    let l = ndarray::array![[c64::new(0.3, 0.0), c64::new(0.0, a)], [c64::new(0.0, -a), c64::new(-0.2, 0.0)]];
    let vc = VertexConditions::from_pl(p, l, &g, 1e-10).unwrap();
    let mesh = Mesh::new(&g, 9).unwrap();
    assert!(matches!(assemble_one_particle::<f64>(&g, &vc, &mesh), Err(Error::Argument(_))));
    let one = all_eigs(&assemble_one_particle::<c64>(&g, &vc, &mesh).unwrap().pencil());
    let form: DiscreteForm<c64> = assemble_two_particle(&g, &lift_one_particle(&vc, &g), &mesh).unwrap();
    let two = all_eigs(&form.pencil());
    let lifted = lift_spectrum(&one, usize::MAX, Sector::Full);
    for (x, y) in two.iter().zip(&lifted) {
        assert!(close(*x, *y, 1e-9), "{x} vs {y}");
    }
}

fn random_pencil(n: usize, seed: u64) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = (&a + a.transpose()) * 0.5;
    let m = b.transpose() * &b + DMatrix::identity(n, n) * n as f64;
    (a, m)
}

fn to_csr(a: &DMatrix<f64>) -> CsrMatrix<f64> {
    let mut t = Vec::new();
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            t.push((i, j, a[(i, j)]));
        }
    }
    CsrMatrix::from_triplets(a.nrows(), a.ncols(), t)
}

#[test]
fn random_pencil_matches_cholesky_reduction() {
    let (a, m) = random_pencil(50, 11);
    let l = m.clone().cholesky().unwrap().l();
    let linv = l.clone().try_inverse().unwrap();
    let c = &linv * &a * linv.transpose();
    let mut oracle: Vec<f64> = SymmetricEigen::new((&c + c.transpose()) * 0.5).eigenvalues.iter().copied().collect();
    oracle.sort_by(f64::total_cmp);

    let p = Pencil {
        a: to_csr(&a),
        m: to_csr(&m),
        basis: CsrMatrix::identity(50),
    };
    for method in [Method::Dense, Method::Iterative] {
        let opts = SolveOptions {
            method,
            lower_bound: -10.0,
            ..SolveOptions::default()
        };
        let got = solve(&p, 12, &opts).unwrap();
        for (x, y) in got.eigenvalues.iter().zip(&oracle) {
            assert!((x - y).abs() <= 1e-10 * y.abs().max(1e-2), "{method:?}: {x} vs {y}");
        }
    }
}

fn bump_map(g: &MetricGraph) -> BoundaryMap {
    let mut p1 = Array2::<c64>::zeros((2 * g.num_edges(), 2 * g.num_edges()));
    p1[[1, 1]] = c64::new(1.0, 0.0);
    BoundaryMap::bump(p1, 4.0, 0.5, 0.3, g.num_edges()).unwrap()
}

#[test]
fn dense_and_iterative_agree() {
    let g = interval();
    let form = assemble_two_particle::<f64>(&g, &bump_map(&g), &Mesh::new(&g, 31).unwrap()).unwrap();
    let p = form.pencil();
    let mut runs = Vec::new();
    for method in [Method::Dense, Method::Iterative] {
        let opts = SolveOptions {
            method,
            lower_bound: -1.05 * form.c_infty - 1.0,
            ..SolveOptions::default()
        };
        runs.push(solve(&p, 40, &opts).unwrap().eigenvalues);
    }
    for (a, b) in runs[0].iter().zip(&runs[1]) {
        assert!(close(*a, *b, 1e-9), "{a} vs {b}");
    }
}

#[test]
fn nested_constraints_raise_eigenvalues() {
    let g = interval();
    let mesh = Mesh::new(&g, 13).unwrap();
    let form = assemble_two_particle::<f64>(&g, &bump_map(&g), &mesh).unwrap();
    let dirichlet = lift_one_particle(&standard_family(&Family::Dirichlet, &g).unwrap(), &g);
    let inner = assemble_two_particle::<f64>(&g, &dirichlet, &mesh).unwrap();
    // the Dirichlet space sits inside the bump map's space; same form on it
    let small = all_eigs(&form.pencil_on(inner.n.clone()));
    let large = all_eigs(&form.pencil());
    for (s, l) in small.iter().zip(&large) {
        assert!(*s >= *l - 1e-9 * l.abs().max(1.0));
    }
}

#[test]
fn strongly_attractive_maps_respect_the_lower_bound() {
    let g = two_edge_graph();
    let mesh = Mesh::new(&g, 9).unwrap();
    for alpha in [1.0, 5.0, 20.0] {
        let vc = standard_family(&Family::Robin(alpha), &g).unwrap();
        let form = assemble_two_particle::<f64>(&g, &lift_one_particle(&vc, &g), &mesh).unwrap();
        let lowest = solve_form(&form, 1).unwrap().eigenvalues[0];
        assert!(lowest < 0.0 && lowest >= -1.05 * form.c_infty, "α={alpha}: {lowest} vs C={}", form.c_infty);
    }
}

#[test]
fn assembled_matrices_are_hermitian_and_mass_is_positive() {
    let g = two_edge_graph();
    let form = assemble_two_particle::<f64>(&g, &bump_map(&g), &Mesh::new(&g, 7).unwrap()).unwrap();
    assert!(form.operator().hermitian_defect() <= 1e-12 * form.k.max_abs());
    assert!(form.m.hermitian_defect() <= 1e-15);
    let (_, m) = form.reduced();
    let mass = all_eigs(&Pencil {
        a: m.clone(),
        m: CsrMatrix::identity(m.nrows()),
        basis: CsrMatrix::identity(m.nrows()),
    });
    assert!(mass[0] > 0.0);
}
