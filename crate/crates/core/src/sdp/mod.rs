//! Standard-form semidefinite programs over Hermitian PSD blocks.
//!
//! ```text
//! minimize    Σ_b Tr[C_b X_b]
//! subject to  Σ_b Tr[A_{k,b} X_b] = r_k     for every constraint k
//!             X_b ⪰ 0
//! ```
//!
//! Blocks are complex Hermitian or real symmetric; a 1×1 real block is a
//! nonnegative scalar. The dual is
//!
//! ```text
//! maximize    Σ_k r_k y_k
//! subject to  Z_b = C_b - Σ_k y_k A_{k,b} ⪰ 0
//! ```
//!
//! Complex blocks are solved through the real embedding
//! `X + iY ↦ [[X, -Y], [Y, X]]` (see [`real_embed`]). Matrix-valued
//! equalities are added with [`SdpProblem::add_equality`], which expands
//! them into scalar rows and remembers how to reassemble the Hermitian
//! multiplier afterwards.

mod ipm;
mod presolve;

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix, TensorShape};

pub use ipm::SolverOptions;

/// Sparse matrix entries `(row, col, value)` of a coefficient matrix `A`;
/// the constraint or cost it defines is `Tr[A X]`. Duplicates are summed.
pub type Entries = Vec<(usize, usize, Complex64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub dim: usize,
    pub kind: BlockKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupId(pub usize);

/// Coefficient matrix of one constraint restricted to one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockCoeff {
    pub block: BlockId,
    pub entries: Entries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<BlockCoeff>,
    pub rhs: f64,
}

/// Linear maps from a block into the space of a matrix equality.
#[derive(Debug, Clone, PartialEq)]
pub enum LinearMap {
    /// `X ↦ Tr_{rest}[X]`, keeping the listed factors of `shape`.
    PartialTrace { shape: TensorShape, keep: Vec<usize> },
    /// `X ↦ X ⊗ I`, with `X` placed on `positions` of the output `shape`.
    Lift { shape: TensorShape, positions: Vec<usize> },
    /// `u ↦ u F` for a scalar (1×1 real) block `u`.
    Scalar(ComplexMatrix),
}

/// `coeff · map(X_block)`, optionally transposed.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub block: BlockId,
    pub map: LinearMap,
    pub coeff: f64,
    pub transpose: bool,
}

impl Term {
    pub fn new(block: BlockId, map: LinearMap) -> Self {
        Self { block, map, coeff: 1.0, transpose: false }
    }

    /// The block itself.
    pub fn identity(block: BlockId, dim: usize) -> Self {
        Self::new(block, LinearMap::PartialTrace { shape: TensorShape::new(vec![dim]), keep: vec![0] })
    }

    pub fn partial_trace(block: BlockId, shape: TensorShape, keep: Vec<usize>) -> Self {
        Self::new(block, LinearMap::PartialTrace { shape, keep })
    }

    pub fn lift(block: BlockId, shape: TensorShape, positions: Vec<usize>) -> Self {
        Self::new(block, LinearMap::Lift { shape, positions })
    }

    pub fn scalar(block: BlockId, matrix: ComplexMatrix) -> Self {
        Self::new(block, LinearMap::Scalar(matrix))
    }

    pub fn scaled(mut self, coeff: f64) -> Self {
        self.coeff *= coeff;
        self
    }

    pub fn transposed(mut self) -> Self {
        self.transpose = !self.transpose;
        self
    }

    fn output_dim(&self) -> usize {
        match &self.map {
            LinearMap::PartialTrace { shape, keep } => keep.iter().map(|&f| shape.factor_dims[f]).product(),
            LinearMap::Lift { shape, .. } => shape.dim(),
            LinearMap::Scalar(m) => m.nrows(),
        }
    }

    fn input_dim(&self) -> usize {
        match &self.map {
            LinearMap::PartialTrace { shape, .. } => shape.dim(),
            LinearMap::Lift { shape, positions } => positions.iter().map(|&f| shape.factor_dims[f]).product(),
            LinearMap::Scalar(_) => 1,
        }
    }
}

/// Precomputed adjoint of a term: for every output unit `|q⟩⟨p|`, the
/// block entries of `L^#(|q⟩⟨p|)` where `Tr[E L(X)] = Tr[L^#(E) X]`.
struct TermAdjoint {
    block: BlockId,
    coeff: f64,
    transpose: bool,
    kind: AdjointKind,
}

enum AdjointKind {
    /// full index of (kept digit, rest digit) and the rest count
    Trace { full: Vec<Vec<usize>> },
    /// (local index, rest index) per output index
    Lift { split: Vec<(usize, usize)> },
    Scalar(ComplexMatrix),
}

impl TermAdjoint {
    fn new(term: &Term) -> Result<Self> {
        let kind = match &term.map {
            LinearMap::PartialTrace { shape, keep } => {
                let table = split_indices(shape, keep)?;
                let kept_dim: usize = keep.iter().map(|&f| shape.factor_dims[f]).product();
                let rest_dim = shape.dim() / kept_dim.max(1);
                let mut full = vec![vec![0; rest_dim]; kept_dim];
                for (idx, &(k, r)) in table.iter().enumerate() {
                    full[k][r] = idx;
                }
                AdjointKind::Trace { full }
            }
            LinearMap::Lift { shape, positions } => AdjointKind::Lift { split: split_indices(shape, positions)? },
            LinearMap::Scalar(m) => AdjointKind::Scalar(m.clone()),
        };
        Ok(Self { block: term.block, coeff: term.coeff, transpose: term.transpose, kind })
    }

    /// Entries of `L^#(|q⟩⟨p|)`.
    fn unit(&self, p: usize, q: usize, out: &mut Vec<(usize, usize, Complex64)>) {
        let (p, q) = if self.transpose { (q, p) } else { (p, q) };
        let w = Complex64::new(self.coeff, 0.0);
        match &self.kind {
            AdjointKind::Trace { full } => {
                for (&r, &s) in full[q].iter().zip(&full[p]) {
                    out.push((r, s, w));
                }
            }
            AdjointKind::Lift { split } => {
                let (lq, rq) = split[q];
                let (lp, rp) = split[p];
                if rq == rp {
                    out.push((lq, lp, w));
                }
            }
            AdjointKind::Scalar(m) => out.push((0, 0, w * m[(p, q)])),
        }
    }
}

fn split_indices(shape: &TensorShape, factors: &[usize]) -> Result<Vec<(usize, usize)>> {
    let n = shape.len();
    if factors.iter().any(|&f| f >= n) {
        return Err(Error::Dimension(format!("factor list {factors:?} exceeds shape {:?}", shape.factor_dims)));
    }
    let mut kept = factors.to_vec();
    kept.sort_unstable();
    kept.dedup();
    if kept.len() != factors.len() || kept != factors {
        return Err(Error::Dimension(format!("factor list {factors:?} must be strictly increasing")));
    }
    let rest: Vec<usize> = (0..n).filter(|f| !factors.contains(f)).collect();
    Ok((0..shape.dim())
        .map(|idx| {
            let digits = shape.digits(idx);
            let compose = |fs: &[usize]| fs.iter().fold(0, |acc, &f| acc * shape.factor_dims[f] + digits[f]);
            (compose(&kept), compose(&rest))
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Re,
    Im,
}

#[derive(Debug, Clone)]
struct Group {
    first_row: usize,
    dim: usize,
    units: Vec<(usize, usize, Part)>,
}

/// A semidefinite program in standard primal form.
#[derive(Debug, Clone, Default, Serialize)]
pub struct SdpProblem {
    pub blocks: Vec<BlockSpec>,
    /// Sparse Hermitian cost matrix per block.
    pub objective: Vec<Entries>,
    pub constraints: Vec<Constraint>,
    #[serde(skip)]
    groups: Vec<Group>,
}

impl SdpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, dim: usize, kind: BlockKind) -> BlockId {
        self.blocks.push(BlockSpec { dim, kind });
        self.objective.push(Vec::new());
        BlockId(self.blocks.len() - 1)
    }

    /// Complex Hermitian PSD block.
    pub fn add_hermitian(&mut self, dim: usize) -> BlockId {
        self.add_block(dim, BlockKind::Complex)
    }

    /// Nonnegative scalar variable with the given cost.
    pub fn add_scalar(&mut self, cost: f64) -> BlockId {
        let id = self.add_block(1, BlockKind::Real);
        self.objective[id.0].push((0, 0, Complex64::new(cost, 0.0)));
        id
    }

    /// Adds `Tr[cost · X_block]` to the objective.
    pub fn add_objective(&mut self, block: BlockId, cost: &ComplexMatrix) -> Result<()> {
        let dim = self.blocks[block.0].dim;
        if cost.nrows() != dim || cost.ncols() != dim {
            return Err(Error::Dimension(format!("cost matrix is {}x{}, block has dimension {dim}", cost.nrows(), cost.ncols())));
        }
        let entries = &mut self.objective[block.0];
        for i in 0..dim {
            for j in 0..dim {
                let v = cost[(i, j)];
                if v != Complex64::new(0.0, 0.0) {
                    entries.push((i, j, v));
                }
            }
        }
        Ok(())
    }

    /// Adds the scalar constraint `Σ_b Tr[A_b X_b] = rhs`; `A_b` given as
    /// coefficient entries of `X_b`.
    pub fn add_constraint(&mut self, coeffs: Vec<BlockCoeff>, rhs: f64) {
        self.constraints.push(Constraint { coeffs, rhs });
    }

    /// Adds the Hermitian matrix equality `Σ_terms coeff · map(X_block) = rhs`
    /// as `dim²` real rows.
    pub fn add_equality(&mut self, terms: &[Term], rhs: &ComplexMatrix) -> Result<GroupId> {
        let dim = rhs.nrows();
        if rhs.ncols() != dim {
            return Err(Error::Dimension("equality right-hand side must be square".into()));
        }
        if !matrix::is_hermitian(rhs, 1e-12) {
            return Err(Error::Contract("equality right-hand side must be Hermitian".into()));
        }
        let adjoints = terms
            .iter()
            .map(|t| {
                if t.output_dim() != dim {
                    return Err(Error::Dimension(format!(
                        "term maps into dimension {}, equality has dimension {dim}",
                        t.output_dim()
                    )));
                }
                let spec = self.blocks.get(t.block.0).ok_or_else(|| Error::Dimension("unknown block".into()))?;
                if t.input_dim() != spec.dim {
                    return Err(Error::Dimension(format!(
                        "term expects a block of dimension {}, block {} has {}",
                        t.input_dim(),
                        t.block.0,
                        spec.dim
                    )));
                }
                TermAdjoint::new(t)
            })
            .collect::<Result<Vec<_>>>()?;

        let first_row = self.constraints.len();
        let mut units = Vec::with_capacity(dim * dim);
        let mut scratch = Vec::new();
        for p in 0..dim {
            for q in p..dim {
                // K = L^#(|q⟩⟨p|) so that Tr[K X] = L(X)_pq.
                let mut per_block: BTreeMap<BlockId, Vec<(usize, usize, Complex64)>> = BTreeMap::new();
                for adj in &adjoints {
                    scratch.clear();
                    adj.unit(p, q, &mut scratch);
                    per_block.entry(adj.block).or_default().extend(scratch.iter().copied());
                }
                let parts: &[Part] = if p == q { &[Part::Re] } else { &[Part::Re, Part::Im] };
                for &part in parts {
                    let coeffs = per_block
                        .iter()
                        .filter_map(|(&block, k)| {
                            let entries = hermitian_coefficients(k, part);
                            (!entries.is_empty()).then_some(BlockCoeff { block, entries })
                        })
                        .collect();
                    let rhs_val = match part {
                        Part::Re => rhs[(p, q)].re,
                        Part::Im => rhs[(p, q)].im,
                    };
                    self.constraints.push(Constraint { coeffs, rhs: rhs_val });
                    units.push((p, q, part));
                }
            }
        }
        self.groups.push(Group { first_row, dim, units });
        Ok(GroupId(self.groups.len() - 1))
    }

    /// Hermitian multiplier `A = Σ_k y_k E_k` of an equality group, where
    /// the Lagrangian term is `Tr[A (Σ terms − rhs)]`.
    pub fn multiplier(&self, solution: &SdpSolution, group: GroupId) -> ComplexMatrix {
        let g = &self.groups[group.0];
        let mut a = matrix::zeros(g.dim, g.dim);
        let half = Complex64::new(0.5, 0.0);
        let half_i = Complex64::new(0.0, 0.5);
        for (offset, &(p, q, part)) in g.units.iter().enumerate() {
            let y = Complex64::new(solution.multipliers[g.first_row + offset], 0.0);
            match (part, p == q) {
                (Part::Re, true) => a[(p, p)] += y,
                (Part::Re, false) => {
                    a[(q, p)] += y * half;
                    a[(p, q)] += y * half;
                }
                // E = (|q⟩⟨p| − |p⟩⟨q|)/(2i)
                (Part::Im, _) => {
                    a[(q, p)] -= y * half_i;
                    a[(p, q)] += y * half_i;
                }
            }
        }
        a
    }

    /// Primal objective `Σ_b Tr[C_b X_b]` at the given blocks.
    pub fn objective_value(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.objective
            .iter()
            .zip(blocks)
            .map(|(entries, x)| entries.iter().map(|&(i, j, v)| (v * x[(j, i)]).re).sum::<f64>())
            .sum()
    }

    /// Infinity norm of `b − A(X)`.
    pub fn constraint_residual(&self, blocks: &[ComplexMatrix]) -> f64 {
        self.constraints
            .iter()
            .map(|c| {
                let lhs: f64 = c
                    .coeffs
                    .iter()
                    .map(|bc| bc.entries.iter().map(|&(i, j, v)| (v * blocks[bc.block.0][(j, i)]).re).sum::<f64>())
                    .sum();
                (lhs - c.rhs).abs()
            })
            .fold(0.0, f64::max)
    }

    /// JSON dump for cross-validation with external solvers.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem serialises")
    }
}

/// `(K + K†)/2` or `(K − K†)/(2i)` as merged sparse entries.
fn hermitian_coefficients(k: &[(usize, usize, Complex64)], part: Part) -> Entries {
    let mut acc: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
    let (f, g) = match part {
        Part::Re => (Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)),
        // 1/(2i) = -i/2
        Part::Im => (Complex64::new(0.0, -0.5), Complex64::new(0.0, 0.5)),
    };
    for &(r, s, v) in k {
        *acc.entry((r, s)).or_default() += v * f;
        *acc.entry((s, r)).or_default() += v.conj() * g;
    }
    acc.into_iter()
        .filter(|(_, v)| v.norm() > 1e-300)
        .map(|((r, s), v)| (r, s, v))
        .collect()
}

/// Solver outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
    /// Step lengths collapsed before the tolerances were met.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolverStatus,
    pub primal_value: f64,
    pub dual_value: f64,
    /// `|primal − dual|`.
    pub gap: f64,
    pub iterations: usize,
    /// Primal blocks `X_b`.
    pub block_values: Vec<ComplexMatrix>,
    /// Dual slack blocks `Z_b = C_b − Σ y_k A_{k,b}`.
    pub dual_slacks: Vec<ComplexMatrix>,
    /// One multiplier per scalar constraint (zero for rows removed as redundant).
    pub multipliers: Vec<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl SdpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// Turns a non-optimal status into an error.
    pub fn require_optimal(self, what: &str) -> Result<Self> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::Solver {
                status: self.status,
                detail: format!(
                    "{what}: primal {:.3e}, dual {:.3e}, residuals {:.1e}/{:.1e} after {} iterations",
                    self.primal_value, self.dual_value, self.primal_residual, self.dual_residual, self.iterations
                ),
            })
        }
    }
}

/// Rewrites every complex block as a real symmetric block of twice the size.
///
/// `H = X + iY` becomes `[[X, −Y], [Y, X]]` and coefficient matrices are
/// embedded with a factor ½, which compensates `Tr[Ĉ Ĥ] = 2 Tr[C H]`, so
/// objective values and right-hand sides are unchanged. Real blocks are kept.
pub fn real_embed(problem: &SdpProblem) -> SdpProblem {
    let embed = |kind: BlockKind, dim: usize, entries: &Entries| -> Entries {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, v) in entries {
            match kind {
                BlockKind::Real => *acc.entry((i, j)).or_default() += v.re,
                BlockKind::Complex => {
                    *acc.entry((i, j)).or_default() += 0.5 * v.re;
                    *acc.entry((i + dim, j + dim)).or_default() += 0.5 * v.re;
                    *acc.entry((i, j + dim)).or_default() -= 0.5 * v.im;
                    *acc.entry((i + dim, j)).or_default() += 0.5 * v.im;
                }
            }
        }
        acc.into_iter()
            .filter(|&(_, v)| v != 0.0)
            .map(|((i, j), v)| (i, j, Complex64::new(v, 0.0)))
            .collect()
    };
    let blocks = problem
        .blocks
        .iter()
        .map(|b| BlockSpec {
            dim: if b.kind == BlockKind::Complex { 2 * b.dim } else { b.dim },
            kind: BlockKind::Real,
        })
        .collect();
    let objective = problem
        .blocks
        .iter()
        .zip(&problem.objective)
        .map(|(b, e)| embed(b.kind, b.dim, e))
        .collect();
    let constraints = problem
        .constraints
        .iter()
        .map(|c| Constraint {
            coeffs: c
                .coeffs
                .iter()
                .map(|bc| {
                    let spec = problem.blocks[bc.block.0];
                    BlockCoeff { block: bc.block, entries: embed(spec.kind, spec.dim, &bc.entries) }
                })
                .collect(),
            rhs: c.rhs,
        })
        .collect();
    SdpProblem { blocks, objective, constraints, groups: problem.groups.clone() }
}

/// Recovers `X + iY` from a structured real block (averaging the copies).
fn unembed(real: &nalgebra::DMatrix<f64>, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, dim, |i, j| {
        let re = 0.5 * (real[(i, j)] + real[(i + dim, j + dim)]);
        let im = 0.5 * (real[(i + dim, j)] - real[(i, j + dim)]);
        Complex64::new(re, im)
    })
}

/// Solves the problem with the primal–dual interior-point method.
pub fn solve(problem: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    let embedded = real_embed(problem);
    let data = ipm::RealSdp::from_problem(&embedded);
    let raw = ipm::solve(&data, opts);
    let mut block_values = Vec::with_capacity(problem.blocks.len());
    let mut dual_slacks = Vec::with_capacity(problem.blocks.len());
    for (spec, (x, z)) in problem.blocks.iter().zip(raw.x.iter().zip(&raw.z)) {
        match spec.kind {
            BlockKind::Real => {
                block_values.push(x.map(|v| Complex64::new(v, 0.0)));
                dual_slacks.push(z.map(|v| Complex64::new(v, 0.0)));
            }
            BlockKind::Complex => {
                block_values.push(unembed(x, spec.dim));
                // Ẑ = ½ emb(Z) because the coefficients carry the factor ½.
                dual_slacks.push(unembed(z, spec.dim) * Complex64::new(2.0, 0.0));
            }
        }
    }
    SdpSolution {
        status: raw.status,
        primal_value: raw.primal_value,
        dual_value: raw.dual_value,
        gap: (raw.primal_value - raw.dual_value).abs(),
        iterations: raw.iterations,
        block_values,
        dual_slacks,
        multipliers: raw.y,
        primal_residual: raw.primal_residual,
        dual_residual: raw.dual_residual,
    }
}

#[cfg(test)]
mod tests;
