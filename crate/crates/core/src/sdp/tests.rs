use num_complex::Complex64;
use proptest::prelude::*;

use super::*;
use crate::matrix::{self, identity, pauli_x, pauli_y, pauli_z};
use crate::random::{random_hermitian, random_psd, seeded_rng};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

/// min t  s.t.  t I − H ⪰ 0, i.e. the largest eigenvalue of `h`.
fn lambda_max_problem(h: &ComplexMatrix, kind: BlockKind) -> SdpProblem {
    let d = h.nrows();
    let mut p = SdpProblem::new();
    let t = p.add_scalar(1.0);
    let s = p.add_block(d, kind);
    p.add_equality(&[Term::scalar(t, identity(d)), Term::identity(s, d).scaled(-1.0)], h).unwrap();
    p
}

#[test]
fn trace_above_projector() {
    // min Tr X  s.t.  X − S = |0⟩⟨0|
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(2);
    let s = p.add_hermitian(2);
    p.add_objective(x, &identity(2)).unwrap();
    let rhs = matrix::projector(&matrix::ket(2, 0));
    p.add_equality(&[Term::identity(x, 2), Term::identity(s, 2).scaled(-1.0)], &rhs).unwrap();
    let sol = solve(&p, &opts());
    assert_eq!(sol.status, SolverStatus::Optimal);
    assert!((sol.primal_value - 1.0).abs() < 1e-7, "{}", sol.primal_value);
    assert!((sol.dual_value - 1.0).abs() < 1e-7);
    assert!((&sol.block_values[x.0] - &rhs).norm() < 1e-6);
}

#[test]
fn largest_eigenvalue_of_pauli_x() {
    let sol = solve(&lambda_max_problem(&pauli_x(), BlockKind::Complex), &opts());
    assert_eq!(sol.status, SolverStatus::Optimal);
    assert!((sol.primal_value - 1.0).abs() < 1e-7);
}

#[test]
fn complex_and_real_blocks_agree_on_parametric_family() {
    // H(φ) = [[a, b e^{iφ}], [b e^{-iφ}, c]] has λ_max independent of φ.
    let (a, b, cc) = (0.3f64, 0.7f64, -0.4f64);
    let oracle = 0.5 * (a + cc) + ((0.5 * (a - cc)).powi(2) + b * b).sqrt();
    for k in 0..8 {
        let phi = k as f64 * std::f64::consts::PI / 4.0;
        let e = Complex64::from_polar(b, phi);
        let h = ComplexMatrix::from_row_slice(2, 2, &[c(a, 0.0), e, e.conj(), c(cc, 0.0)]);
        let sol = solve(&lambda_max_problem(&h, BlockKind::Complex), &opts());
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - oracle).abs() < 1e-7, "phi {phi}: {} vs {oracle}", sol.primal_value);
    }
    let h = ComplexMatrix::from_row_slice(2, 2, &[c(a, 0.0), c(b, 0.0), c(b, 0.0), c(cc, 0.0)]);
    let sol = solve(&lambda_max_problem(&h, BlockKind::Real), &opts());
    assert!((sol.primal_value - oracle).abs() < 1e-7);
}

#[test]
fn negative_scalar_is_infeasible() {
    let mut p = SdpProblem::new();
    let u = p.add_scalar(1.0);
    p.add_constraint(vec![BlockCoeff { block: u, entries: vec![(0, 0, c(1.0, 0.0))] }], -1.0);
    assert_eq!(solve(&p, &opts()).status, SolverStatus::Infeasible);
}

#[test]
fn conflicting_rows_are_infeasible() {
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(2);
    p.add_equality(&[Term::identity(x, 2)], &identity(2)).unwrap();
    p.add_constraint(
        vec![BlockCoeff { block: x, entries: vec![(0, 0, c(1.0, 0.0)), (1, 1, c(1.0, 0.0))] }],
        3.0,
    );
    assert_eq!(solve(&p, &opts()).status, SolverStatus::Infeasible);
}

#[test]
fn psd_trace_with_indefinite_cost_is_infeasible_in_disguise() {
    // Tr X = 1, X ⪰ 0 and Tr[σ_z X] = 2 cannot hold together.
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(2);
    let row = |m: &ComplexMatrix| BlockCoeff {
        block: x,
        entries: (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).map(|(i, j)| (i, j, m[(i, j)])).collect(),
    };
    p.add_constraint(vec![row(&identity(2))], 1.0);
    p.add_constraint(vec![row(&pauli_z())], 2.0);
    assert_eq!(solve(&p, &opts()).status, SolverStatus::Infeasible);
}

#[test]
fn unbounded_ray() {
    // min −t  s.t.  t − s = 0
    let mut p = SdpProblem::new();
    let t = p.add_scalar(-1.0);
    let s = p.add_scalar(0.0);
    p.add_constraint(
        vec![
            BlockCoeff { block: t, entries: vec![(0, 0, c(1.0, 0.0))] },
            BlockCoeff { block: s, entries: vec![(0, 0, c(-1.0, 0.0))] },
        ],
        0.0,
    );
    assert_eq!(solve(&p, &opts()).status, SolverStatus::Unbounded);
}

#[test]
fn equality_multiplier_matches_cost() {
    // min Tr[C X] s.t. X = R ≻ 0 forces Z = 0, so the multiplier equals C.
    let mut rng = seeded_rng(5);
    let cost = random_hermitian(&mut rng, 3);
    let r = random_psd(&mut rng, 3) + identity(3);
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(3);
    p.add_objective(x, &cost).unwrap();
    let g = p.add_equality(&[Term::identity(x, 3)], &r).unwrap();
    let sol = solve(&p, &opts());
    assert_eq!(sol.status, SolverStatus::Optimal);
    let a = p.multiplier(&sol, g);
    assert!((&a - &cost).norm() < 1e-6, "{a}");
    assert!((sol.primal_value - matrix::trace_product_re(&cost, &r)).abs() < 1e-7);
}

#[test]
fn transposed_and_lifted_terms() {
    // X^T on one factor and I ⊗ Y: min Tr Y s.t. I ⊗ Y − X^T = 0 with X fixed by X = R.
    let mut rng = seeded_rng(9);
    let r = crate::random::random_density_matrix(&mut rng, 2);
    let big = matrix::kron(&identity(2), &r.transpose());
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(4);
    let y = p.add_hermitian(2);
    p.add_objective(y, &identity(2)).unwrap();
    p.add_equality(&[Term::identity(x, 4)], &big).unwrap();
    let shape = TensorShape::new(vec![2, 2]);
    p.add_equality(&[Term::lift(y, shape, vec![1]), Term::identity(x, 4).transposed().scaled(-1.0)], &matrix::zeros(4, 4))
        .unwrap();
    let sol = solve(&p, &opts());
    assert_eq!(sol.status, SolverStatus::Optimal);
    assert!((&sol.block_values[y.0] - &r).norm() < 1e-6);
}

#[test]
fn solve_is_deterministic() {
    let mut rng = seeded_rng(1);
    let h = random_hermitian(&mut rng, 3);
    let p = lambda_max_problem(&h, BlockKind::Complex);
    let a = solve(&p, &opts());
    let b = solve(&p, &opts());
    assert_eq!(a.primal_value.to_bits(), b.primal_value.to_bits());
    assert_eq!(a.multipliers, b.multipliers);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn min_eigenvalue_matches_oracle() {
    let mut rng = seeded_rng(3);
    for d in 2..5 {
        let h = random_hermitian(&mut rng, d);
        let mut p = SdpProblem::new();
        let x = p.add_hermitian(d);
        p.add_objective(x, &h).unwrap();
        p.add_constraint(
            vec![BlockCoeff { block: x, entries: (0..d).map(|i| (i, i, c(1.0, 0.0))).collect() }],
            1.0,
        );
        let sol = solve(&p, &opts());
        assert_eq!(sol.status, SolverStatus::Optimal);
        assert!((sol.primal_value - matrix::min_eigenvalue(&h)).abs() < 1e-7);
    }
}

#[test]
fn json_dump_lists_blocks_and_rows() {
    let p = lambda_max_problem(&pauli_y(), BlockKind::Complex);
    let v: serde_json::Value = serde_json::from_str(&p.to_json()).unwrap();
    assert_eq!(v["blocks"].as_array().unwrap().len(), 2);
    assert_eq!(v["constraints"].as_array().unwrap().len(), 4);
}

/// Random instance with a strictly feasible primal point and dual point.
fn random_instance(seed: u64, d: usize, rows: usize) -> SdpProblem {
    let mut rng = seeded_rng(seed);
    let x0 = random_psd(&mut rng, d) + identity(d);
    let mut p = SdpProblem::new();
    let x = p.add_hermitian(d);
    let mut cost = random_psd(&mut rng, d) + identity(d) * c(0.1, 0.0);
    for _ in 0..rows {
        let a = random_hermitian(&mut rng, d);
        let y0: f64 = rand::Rng::random_range(&mut rng, -1.0..1.0);
        cost += &a * c(y0, 0.0);
        let entries = (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| (i, j, a[(i, j)])).collect();
        p.add_constraint(vec![BlockCoeff { block: x, entries }], matrix::trace_product_re(&a, &x0));
    }
    p.add_objective(x, &cost).unwrap();
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_instances_are_solved_with_weak_duality(seed in 0u64..10_000, d in 2usize..5, rows in 1usize..6) {
        let p = random_instance(seed, d, rows);
        let sol = solve(&p, &opts());
        prop_assert_eq!(sol.status, SolverStatus::Optimal);
        prop_assert!(sol.primal_value >= sol.dual_value - 1e-7 * (1.0 + sol.primal_value.abs()));
        prop_assert!(p.constraint_residual(&sol.block_values) < 1e-7);
        for (x, z) in sol.block_values.iter().zip(&sol.dual_slacks) {
            prop_assert!(matrix::min_eigenvalue(x) > -1e-7);
            prop_assert!(matrix::min_eigenvalue(z) > -1e-7);
        }
        prop_assert!((p.objective_value(&sol.block_values) - sol.primal_value).abs() < 1e-8);
    }
}
