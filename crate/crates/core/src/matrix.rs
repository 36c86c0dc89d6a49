//! Dense complex matrices on tensor-product spaces.
//!
//! Composite indices are row-major: for `A ⊗ B` the pair `(i, k)` maps to
//! `i * rows(B) + k`, and a [`TensorShape`] `[d_0, …, d_{m-1}]` lists factors
//! from the most significant to the least significant digit.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for Hermiticity, relative to `max(1, max |a_jk|)`.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default tolerance on the smallest eigenvalue for PSD tests.
pub const PSD_TOL: f64 = 1e-9;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Ordered subsystem dimensions of a composite space.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TensorShape {
    pub factor_dims: Vec<usize>,
}

impl TensorShape {
    pub fn new(factor_dims: Vec<usize>) -> Self {
        Self { factor_dims }
    }

    /// Total dimension (product of the factors).
    pub fn dim(&self) -> usize {
        self.factor_dims.iter().product()
    }

    pub fn len(&self) -> usize {
        self.factor_dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factor_dims.is_empty()
    }

    /// Splits a composite index into its per-factor digits.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.len()];
        for (slot, &d) in out.iter_mut().zip(&self.factor_dims).rev() {
            *slot = index % d;
            index /= d;
        }
        out
    }

    /// Inverse of [`TensorShape::digits`] restricted to the listed factors.
    fn compose(&self, digits: &[usize], factors: &[usize]) -> usize {
        factors
            .iter()
            .fold(0, |acc, &f| acc * self.factor_dims[f] + digits[f])
    }

    fn check_square(&self, a: &ComplexMatrix) -> Result<()> {
        if a.nrows() != a.ncols() || a.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{} but shape {:?} has dimension {}",
                a.nrows(),
                a.ncols(),
                self.factor_dims,
                self.dim()
            )));
        }
        Ok(())
    }

    fn check_factors(&self, factors: &[usize]) -> Result<()> {
        let mut seen = vec![false; self.len()];
        for &f in factors {
            if f >= self.len() || seen[f] {
                return Err(Error::Dimension(format!(
                    "invalid factor list {factors:?} for shape {:?}",
                    self.factor_dims
                )));
            }
            seen[f] = true;
        }
        Ok(())
    }

    /// For every composite index: (index within `factors`, index within the rest).
    fn split_table(&self, factors: &[usize]) -> Vec<(usize, usize)> {
        let rest: Vec<usize> = (0..self.len()).filter(|f| !factors.contains(f)).collect();
        let mut kept_sorted = factors.to_vec();
        kept_sorted.sort_unstable();
        (0..self.dim())
            .map(|idx| {
                let digits = self.digits(idx);
                (self.compose(&digits, &kept_sorted), self.compose(&digits, &rest))
            })
            .collect()
    }
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::zeros(rows, cols)
}

/// Computational basis vector `|i⟩` in dimension `d`.
pub fn ket(d: usize, i: usize) -> DVector<Complex64> {
    let mut v = DVector::zeros(d);
    v[i] = ONE;
    v
}

/// `|v⟩⟨v|`.
pub fn projector(v: &DVector<Complex64>) -> ComplexMatrix {
    v * v.adjoint()
}

/// `|i⟩⟨j|` in dimension `d`.
pub fn matrix_unit(d: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = zeros(d, d);
    m[(i, j)] = ONE;
    m
}

pub fn pauli_x() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
}

pub fn pauli_y() -> ComplexMatrix {
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix::from_row_slice(2, 2, &[ZERO, -i, i, ZERO])
}

pub fn pauli_z() -> ComplexMatrix {
    ComplexMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
}

/// Builds a complex matrix from real row-major entries.
pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> ComplexMatrix {
    ComplexMatrix::from_row_iterator(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)))
}

pub fn trace(a: &ComplexMatrix) -> Complex64 {
    a.trace()
}

/// Real part of the trace of `a * b`, without forming the product.
pub fn trace_product_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += (a[(i, k)] * b[(k, i)]).re;
        }
    }
    acc
}

/// Kronecker product with row-major composite indexing.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    factors
        .iter()
        .fold(identity(1), |acc, f| kron(&acc, f))
}

pub fn max_abs(a: &ComplexMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

pub fn is_hermitian(a: &ComplexMatrix, tol: f64) -> bool {
    if a.nrows() != a.ncols() {
        return false;
    }
    let scale = max_abs(a).max(1.0);
    let n = a.nrows();
    (0..n).all(|j| (j..n).all(|k| (a[(j, k)] - a[(k, j)].conj()).norm() <= tol * scale))
}

/// `(A + A†) / 2`.
pub fn hermitian_part(a: &ComplexMatrix) -> ComplexMatrix {
    (a + a.adjoint()) * Complex64::new(0.5, 0.0)
}

fn require_hermitian(a: &ComplexMatrix, what: &str) -> Result<()> {
    if !is_hermitian(a, HERMITIAN_TOL) {
        return Err(Error::Contract(format!("{what}: matrix is not Hermitian")));
    }
    Ok(())
}

/// Partial trace over every factor not listed in `keep`.
///
/// Kept factors appear in the result in their original order.
pub fn partial_trace(a: &ComplexMatrix, shape: &TensorShape, keep: &[usize]) -> Result<ComplexMatrix> {
    shape.check_square(a)?;
    shape.check_factors(keep)?;
    let out_dim: usize = keep.iter().map(|&f| shape.factor_dims[f]).product();
    let table = shape.split_table(keep);
    let mut out = zeros(out_dim, out_dim);
    for (r, &(kr, tr)) in table.iter().enumerate() {
        for (c, &(kc, tc)) in table.iter().enumerate() {
            if tr == tc {
                out[(kr, kc)] += a[(r, c)];
            }
        }
    }
    Ok(out)
}

/// Places `a` on the factors `positions` of `shape` and the identity on
/// every other factor; the adjoint of [`partial_trace`].
pub fn lift(a: &ComplexMatrix, shape: &TensorShape, positions: &[usize]) -> Result<ComplexMatrix> {
    shape.check_factors(positions)?;
    let mut sorted = positions.to_vec();
    sorted.sort_unstable();
    if sorted != positions {
        return Err(Error::Dimension(format!(
            "lift positions must be increasing, got {positions:?}"
        )));
    }
    let local: usize = positions.iter().map(|&f| shape.factor_dims[f]).product();
    if a.nrows() != local || a.ncols() != local {
        return Err(Error::Dimension(format!(
            "operator is {}x{} but positions {positions:?} span dimension {local}",
            a.nrows(),
            a.ncols()
        )));
    }
    let table = shape.split_table(positions);
    let n = shape.dim();
    let mut out = zeros(n, n);
    for (r, &(kr, tr)) in table.iter().enumerate() {
        for (c, &(kc, tc)) in table.iter().enumerate() {
            if tr == tc {
                out[(r, c)] = a[(kr, kc)];
            }
        }
    }
    Ok(out)
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues in descending order.
///
/// The input is symmetrised before the solve.
pub fn eig_hermitian(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    require_hermitian(a, "eig_hermitian")?;
    Ok(eig_symmetrized(a))
}

fn eig_symmetrized(a: &ComplexMatrix) -> (Vec<f64>, ComplexMatrix) {
    let eig = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = ComplexMatrix::from_fn(a.nrows(), a.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigenvalues of the Hermitian part, descending.
pub fn eigenvalues(a: &ComplexMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitian_part(a).symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|x, y| y.total_cmp(x));
    v
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(a: &ComplexMatrix) -> f64 {
    hermitian_part(a)
        .symmetric_eigenvalues()
        .iter()
        .fold(f64::INFINITY, |m, &x| m.min(x))
}

/// True iff `a` is Hermitian and its smallest eigenvalue is at least `-tol`.
pub fn is_psd(a: &ComplexMatrix, tol: f64) -> bool {
    is_hermitian(a, HERMITIAN_TOL) && min_eigenvalue(a) >= -tol
}

/// Operator norm of a PSD matrix (its largest eigenvalue).
pub fn op_norm(a: &ComplexMatrix) -> Result<f64> {
    require_hermitian(a, "op_norm")?;
    let ev = eigenvalues(a);
    let lowest = ev.last().copied().unwrap_or(0.0);
    if lowest < -PSD_TOL {
        return Err(Error::Contract(format!(
            "op_norm expects a PSD matrix, smallest eigenvalue is {lowest:e}"
        )));
    }
    Ok(ev.first().copied().unwrap_or(0.0))
}

/// Closest PSD matrix in Frobenius norm (negative eigenvalues clipped).
pub fn psd_projection(a: &ComplexMatrix) -> ComplexMatrix {
    let (values, vectors) = eig_symmetrized(a);
    let clipped = DVector::from_iterator(
        values.len(),
        values.iter().map(|&x| Complex64::new(x.max(0.0), 0.0)),
    );
    &vectors * ComplexMatrix::from_diagonal(&clipped) * vectors.adjoint()
}

/// JSON encoding `{"rows": n, "cols": m, "data": [[re, im], …]}`, row-major.
pub mod json {
    use super::ComplexMatrix;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    pub struct MatrixJson {
        pub rows: usize,
        pub cols: usize,
        pub data: Vec<[f64; 2]>,
    }

    impl From<&ComplexMatrix> for MatrixJson {
        fn from(m: &ComplexMatrix) -> Self {
            let mut data = Vec::with_capacity(m.len());
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    let z = m[(r, c)];
                    data.push([z.re, z.im]);
                }
            }
            Self { rows: m.nrows(), cols: m.ncols(), data }
        }
    }

    impl TryFrom<MatrixJson> for ComplexMatrix {
        type Error = String;

        fn try_from(j: MatrixJson) -> Result<Self, String> {
            if j.data.len() != j.rows * j.cols {
                return Err(format!(
                    "matrix data has {} entries, expected {}x{}",
                    j.data.len(),
                    j.rows,
                    j.cols
                ));
            }
            Ok(ComplexMatrix::from_row_iterator(
                j.rows,
                j.cols,
                j.data.into_iter().map(|[re, im]| Complex64::new(re, im)),
            ))
        }
    }

    pub fn serialize<S: Serializer>(m: &ComplexMatrix, s: S) -> Result<S::Ok, S::Error> {
        MatrixJson::from(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<ComplexMatrix, D::Error> {
        let j = MatrixJson::deserialize(d)?;
        ComplexMatrix::try_from(j).map_err(serde::de::Error::custom)
    }

    /// The same encoding for `Vec<ComplexMatrix>`.
    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(ms: &[ComplexMatrix], s: S) -> Result<S::Ok, S::Error> {
            let js: Vec<MatrixJson> = ms.iter().map(MatrixJson::from).collect();
            js.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<ComplexMatrix>, D::Error> {
            let js = Vec::<MatrixJson>::deserialize(d)?;
            js.into_iter()
                .map(|j| ComplexMatrix::try_from(j).map_err(serde::de::Error::custom))
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_density_matrix, random_hermitian, random_psd, seeded_rng};
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn kron_identities() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let zz = kron(&pauli_z(), &pauli_z());
        assert_eq!(zz, from_real(4, 4, &[1., 0., 0., 0., 0., -1., 0., 0., 0., 0., -1., 0., 0., 0., 0., 1.]));
    }

    #[test]
    fn kron_xx_is_antidiagonal() {
        // (X⊗X)_{(i,k),(j,l)} = X_ij X_kl is nonzero only when j = 1-i and l = 1-k.
        let xx = kron(&pauli_x(), &pauli_x());
        for r in 0..4 {
            for col in 0..4 {
                let expected = if r + col == 3 { 1.0 } else { 0.0 };
                assert_eq!(xx[(r, col)], c(expected));
            }
        }
    }

    #[test]
    fn kron_is_associative() {
        let mut rng = seeded_rng(3);
        let a = random_hermitian(&mut rng, 2);
        let b = random_hermitian(&mut rng, 3);
        let d = random_hermitian(&mut rng, 2);
        let left = kron(&kron(&a, &b), &d);
        let right = kron(&a, &kron(&b, &d));
        assert_eq!(left.shape(), right.shape());
        assert!((left - right).norm() < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_state() {
        let mut psi = DVector::zeros(4);
        psi[0] = c(1.0 / 2f64.sqrt());
        psi[3] = c(1.0 / 2f64.sqrt());
        let rho = projector(&psi);
        let shape = TensorShape::new(vec![2, 2]);
        let first = partial_trace(&rho, &shape, &[0]).unwrap();
        assert!((first - identity(2) * c(0.5)).norm() < 1e-15);
    }

    #[test]
    fn partial_trace_of_product() {
        let mut rng = seeded_rng(5);
        let rho = random_density_matrix(&mut rng, 2);
        let sigma = random_psd(&mut rng, 3);
        let shape = TensorShape::new(vec![2, 3]);
        let reduced = partial_trace(&kron(&rho, &sigma), &shape, &[0]).unwrap();
        assert!((reduced - &rho * sigma.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_middle_factor_matches_index_sum() {
        let mut rng = seeded_rng(11);
        let dims = [2usize, 3, 2];
        let a = random_psd(&mut rng, 12);
        let shape = TensorShape::new(dims.to_vec());
        let got = partial_trace(&a, &shape, &[0, 2]).unwrap();
        // Brute force: out[(i,k),(j,l)] = Σ_m a[(i,m,k),(j,m,l)].
        let idx = |i: usize, m: usize, k: usize| (i * 3 + m) * 2 + k;
        for i in 0..2 {
            for k in 0..2 {
                for j in 0..2 {
                    for l in 0..2 {
                        let mut s = Complex64::new(0.0, 0.0);
                        for m in 0..3 {
                            s += a[(idx(i, m, k), idx(j, m, l))];
                        }
                        assert!((got[(i * 2 + k, j * 2 + l)] - s).norm() < 1e-13);
                    }
                }
            }
        }
        assert!((got.trace() - a.trace()).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_rejects_bad_shape() {
        let shape = TensorShape::new(vec![2, 2]);
        assert!(matches!(partial_trace(&identity(3), &shape, &[0]), Err(Error::Dimension(_))));
        assert!(matches!(partial_trace(&identity(4), &shape, &[2]), Err(Error::Dimension(_))));
    }

    #[test]
    fn lift_is_adjoint_of_partial_trace() {
        let mut rng = seeded_rng(17);
        let shape = TensorShape::new(vec![2, 3, 2]);
        let big = random_hermitian(&mut rng, 12);
        let small = random_hermitian(&mut rng, 4);
        let lhs = trace_product_re(&small, &partial_trace(&big, &shape, &[0, 2]).unwrap());
        let rhs = trace_product_re(&lift(&small, &shape, &[0, 2]).unwrap(), &big);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn eig_of_paulis() {
        let (vals, vecs) = eig_hermitian(&pauli_z()).unwrap();
        assert_eq!(vals, vec![1.0, -1.0]);
        assert!((vecs[(0, 0)].norm() - 1.0).abs() < 1e-15);
        assert!((vecs[(1, 1)].norm() - 1.0).abs() < 1e-15);

        let (vals, vecs) = eig_hermitian(&pauli_x()).unwrap();
        assert!((vals[0] - 1.0).abs() < 1e-15 && (vals[1] + 1.0).abs() < 1e-15);
        let s = 1.0 / 2f64.sqrt();
        // Up to a phase, the +1 eigenvector is (1,1)/√2.
        let overlap = (vecs[(0, 0)].conj() * s + vecs[(1, 0)].conj() * s).norm();
        assert!((overlap - 1.0).abs() < 1e-14);
    }

    #[test]
    fn eig_rejects_non_hermitian() {
        let a = from_real(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(matches!(eig_hermitian(&a), Err(Error::Contract(_))));
    }

    #[test]
    fn eig_reconstructs_random_hermitian() {
        let mut rng = seeded_rng(23);
        for d in [2, 3, 5, 8] {
            let a = random_hermitian(&mut rng, d);
            let (vals, v) = eig_hermitian(&a).unwrap();
            assert!(vals.windows(2).all(|w| w[0] >= w[1]));
            let lam = ComplexMatrix::from_diagonal(&DVector::from_iterator(d, vals.iter().map(|&x| c(x))));
            assert!((&v * lam * v.adjoint() - &a).norm() <= 1e-10);
            assert!((v.adjoint() * &v - identity(d)).norm() <= 1e-10);
        }
    }

    #[test]
    fn op_norm_cases() {
        assert!((op_norm(&identity(3)).unwrap() - 1.0).abs() < 1e-15);
        let p = projector(&ket(2, 0)) * c(2.0);
        assert!((op_norm(&p).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(op_norm(&pauli_z()), Err(Error::Contract(_))));
        let mut rng = seeded_rng(29);
        for _ in 0..10 {
            let a = random_psd(&mut rng, 4);
            assert!(op_norm(&a).unwrap() <= a.trace().re + 1e-12);
        }
    }

    #[test]
    fn psd_checks() {
        assert!(is_psd(&identity(3), 1e-9));
        assert!(!is_psd(&pauli_z(), 1e-9));
    }

    #[test]
    fn json_round_trip_preserves_layout() {
        let m = ComplexMatrix::from_row_slice(2, 2, &[c(1.0), Complex64::new(0.0, 2.0), c(3.0), c(4.0)]);
        #[derive(serde::Serialize, serde::Deserialize)]
        struct W {
            #[serde(with = "json")]
            m: ComplexMatrix,
        }
        let text = serde_json::to_string(&W { m: m.clone() }).unwrap();
        assert_eq!(text, r#"{"m":{"rows":2,"cols":2,"data":[[1.0,0.0],[0.0,2.0],[3.0,0.0],[4.0,0.0]]}}"#);
        let back: W = serde_json::from_str(&text).unwrap();
        assert_eq!(back.m, m);
    }

    proptest! {
        #[test]
        fn partial_trace_is_linear_and_trace_preserving(seed in 0u64..10_000, alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
            let mut rng = seeded_rng(seed);
            let shape = TensorShape::new(vec![2, 2, 3]);
            let a = random_hermitian(&mut rng, 12);
            let b = random_hermitian(&mut rng, 12);
            let combo = &a * c(alpha) + &b * c(beta);
            for keep in [vec![0], vec![1, 2], vec![0, 2]] {
                let lhs = partial_trace(&combo, &shape, &keep).unwrap();
                let rhs = partial_trace(&a, &shape, &keep).unwrap() * c(alpha)
                    + partial_trace(&b, &shape, &keep).unwrap() * c(beta);
                prop_assert!((&lhs - rhs).norm() <= 1e-12);
                prop_assert!((lhs.trace() - combo.trace()).norm() <= 1e-12);
            }
        }

        #[test]
        fn eigenvalues_sum_to_trace(seed in 0u64..10_000, d in 1usize..7) {
            let mut rng = seeded_rng(seed);
            let a = random_hermitian(&mut rng, d);
            let (vals, _) = eig_hermitian(&a).unwrap();
            prop_assert!((vals.iter().sum::<f64>() - a.trace().re).abs() <= 1e-10);
        }
    }
}
