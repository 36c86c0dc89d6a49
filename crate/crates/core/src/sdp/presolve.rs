//! Removal of linearly dependent constraint rows.
//!
//! Matrix equalities over Hermitian blocks often repeat information (the
//! trace of a partial trace constraint, say). The Schur complement of the
//! interior-point method is singular for such rows, so they are dropped
//! before solving after checking that their right-hand sides agree.

use super::ipm::RealSdp;

/// Relative residual below which a row counts as dependent.
const DEPENDENCE_TOL: f64 = 1e-10;
/// Allowed mismatch of a dependent row's right-hand side.
const CONSISTENCY_TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Presolved {
    /// Indices of the rows kept, in their original order.
    Independent(Vec<usize>),
    /// A dependent row whose right-hand side contradicts the others.
    Inconsistent(usize),
}

fn sparse_dot(a: &[(usize, usize, f64)], b: &[(usize, usize, f64)]) -> f64 {
    let (mut i, mut j, mut acc) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        let ka = (a[i].0, a[i].1);
        let kb = (b[j].0, b[j].1);
        match ka.cmp(&kb) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                acc += a[i].2 * b[j].2;
                i += 1;
                j += 1;
            }
        }
    }
    acc
}

/// Gram matrix `⟨A_k, A_l⟩` of the constraint rows.
fn gram(data: &RealSdp) -> Vec<Vec<f64>> {
    let m = data.rows.len();
    let mut g = vec![vec![0.0; m]; m];
    for touching in data.block_rows() {
        for (a, &(k, ek)) in touching.iter().enumerate() {
            for &(l, el) in &touching[a..] {
                let v = sparse_dot(ek, el);
                g[k][l] += v;
                if k != l {
                    g[l][k] += v;
                }
            }
        }
    }
    g
}

/// Greedy Cholesky over the rows in order, skipping dependent ones.
pub(crate) fn independent_rows(data: &RealSdp) -> Presolved {
    let g = gram(data);
    let m = g.len();
    let mut kept: Vec<usize> = Vec::new();
    // rows of the Cholesky factor of the kept Gram block
    let mut l_rows: Vec<Vec<f64>> = Vec::new();
    // L^{-1} b restricted to kept rows
    let mut w: Vec<f64> = Vec::new();
    for k in 0..m {
        let mut v = Vec::with_capacity(kept.len());
        for (j, &kj) in kept.iter().enumerate() {
            let s: f64 = (0..j).map(|t| v[t] * l_rows[j][t]).sum();
            v.push((g[k][kj] - s) / l_rows[j][j]);
        }
        let norm2 = g[k][k];
        let res = norm2 - v.iter().map(|x| x * x).sum::<f64>();
        if norm2 <= f64::MIN_POSITIVE || res <= DEPENDENCE_TOL * norm2 {
            let predicted: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            if (data.b[k] - predicted).abs() > CONSISTENCY_TOL * (1.0 + data.b[k].abs()) {
                return Presolved::Inconsistent(k);
            }
            continue;
        }
        let diag = res.sqrt();
        let wk = (data.b[k] - v.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>()) / diag;
        v.push(diag);
        l_rows.push(v);
        w.push(wk);
        kept.push(k);
    }
    Presolved::Independent(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{BlockCoeff, BlockId, SdpProblem};
    use num_complex::Complex64;

    fn row(entries: &[(usize, usize, f64)]) -> Vec<BlockCoeff> {
        vec![BlockCoeff {
            block: BlockId(0),
            entries: entries.iter().map(|&(i, j, v)| (i, j, Complex64::new(v, 0.0))).collect(),
        }]
    }

    fn problem(rhs: [f64; 3]) -> SdpProblem {
        let mut p = SdpProblem::new();
        p.add_block(2, crate::sdp::BlockKind::Real);
        p.add_constraint(row(&[(0, 0, 1.0)]), rhs[0]);
        p.add_constraint(row(&[(1, 1, 1.0)]), rhs[1]);
        p.add_constraint(row(&[(0, 0, 2.0), (1, 1, 2.0)]), rhs[2]);
        p
    }

    #[test]
    fn drops_consistent_combination() {
        let data = RealSdp::from_problem(&problem([1.0, 2.0, 6.0]));
        assert_eq!(independent_rows(&data), Presolved::Independent(vec![0, 1]));
    }

    #[test]
    fn flags_inconsistent_combination() {
        let data = RealSdp::from_problem(&problem([1.0, 2.0, 5.0]));
        assert_eq!(independent_rows(&data), Presolved::Inconsistent(2));
    }

    #[test]
    fn zero_row_with_nonzero_rhs_is_inconsistent() {
        let mut p = SdpProblem::new();
        p.add_block(1, crate::sdp::BlockKind::Real);
        p.add_constraint(Vec::new(), 1.0);
        assert_eq!(independent_rows(&RealSdp::from_problem(&p)), Presolved::Inconsistent(0));
    }
}
