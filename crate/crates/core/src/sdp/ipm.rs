//! Infeasible-start primal–dual interior-point method (HKM direction with
//! Mehrotra predictor–corrector) for real symmetric block SDPs.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::presolve::{self, Presolved};
use super::{SdpProblem, SolverStatus};

/// Threshold for the normalised infeasibility and unboundedness certificates.
const CERTIFICATE_TOL: f64 = 1e-8;
/// Consecutive collapsed steps before giving up.
const STALL_LIMIT: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Bound on the primal residual `‖b − A(X)‖_∞` and the relative dual residual.
    pub feas_tol: f64,
    /// Bound on the relative duality gap and complementarity.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { feas_tol: 1e-8, gap_tol: 1e-8, max_iter: 200 }
    }
}

type Sparse = Vec<(usize, usize, f64)>;

/// Real symmetric problem data with sparse symmetric coefficient matrices.
#[derive(Debug, Clone)]
pub(crate) struct RealSdp {
    pub dims: Vec<usize>,
    pub c: Vec<DMatrix<f64>>,
    /// Per row, the (block, sorted entries) pairs it touches.
    pub rows: Vec<Vec<(usize, Sparse)>>,
    pub b: DVector<f64>,
}

fn symmetrize_entries(entries: impl Iterator<Item = (usize, usize, f64)>) -> Sparse {
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for (i, j, v) in entries {
        *acc.entry((i, j)).or_default() += 0.5 * v;
        *acc.entry((j, i)).or_default() += 0.5 * v;
    }
    acc.into_iter().filter(|&(_, v)| v != 0.0).map(|((i, j), v)| (i, j, v)).collect()
}

impl RealSdp {
    /// Takes the real parts of an already embedded problem.
    pub fn from_problem(problem: &SdpProblem) -> Self {
        let dims: Vec<usize> = problem.blocks.iter().map(|b| b.dim).collect();
        let c = dims
            .iter()
            .zip(&problem.objective)
            .map(|(&n, entries)| {
                let mut m = DMatrix::zeros(n, n);
                for &(i, j, v) in entries {
                    m[(i, j)] += 0.5 * v.re;
                    m[(j, i)] += 0.5 * v.re;
                }
                m
            })
            .collect();
        let rows = problem
            .constraints
            .iter()
            .map(|con| {
                let mut per_block: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
                for bc in &con.coeffs {
                    per_block
                        .entry(bc.block.0)
                        .or_default()
                        .extend(bc.entries.iter().map(|&(i, j, v)| (i, j, v.re)));
                }
                per_block
                    .into_iter()
                    .map(|(blk, e)| (blk, symmetrize_entries(e.into_iter())))
                    .filter(|(_, e)| !e.is_empty())
                    .collect()
            })
            .collect();
        let b = DVector::from_iterator(problem.constraints.len(), problem.constraints.iter().map(|c| c.rhs));
        Self { dims, c, rows, b }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// For every block, the rows touching it with their entries.
    pub fn block_rows(&self) -> Vec<Vec<(usize, &[(usize, usize, f64)])>> {
        let mut out = vec![Vec::new(); self.dims.len()];
        for (k, row) in self.rows.iter().enumerate() {
            for (blk, e) in row {
                out[*blk].push((k, e.as_slice()));
            }
        }
        out
    }

    fn select(&self, kept: &[usize]) -> Self {
        Self {
            dims: self.dims.clone(),
            c: self.c.clone(),
            rows: kept.iter().map(|&k| self.rows[k].clone()).collect(),
            b: DVector::from_iterator(kept.len(), kept.iter().map(|&k| self.b[k])),
        }
    }

    /// `A(X)`.
    fn apply(&self, x: &[DMatrix<f64>]) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                row.iter()
                    .map(|(blk, e)| e.iter().map(|&(i, j, v)| v * x[*blk][(i, j)]).sum::<f64>())
                    .sum::<f64>()
            }),
        )
    }

    /// `Aᵀ(y) = Σ_k y_k A_k`.
    fn adjoint(&self, y: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let mut out: Vec<DMatrix<f64>> = self.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (row, &yk) in self.rows.iter().zip(y.iter()) {
            if yk == 0.0 {
                continue;
            }
            for (blk, e) in row {
                for &(i, j, v) in e {
                    out[*blk][(i, j)] += yk * v;
                }
            }
        }
        out
    }

    /// `M_kl = Σ_b Tr[A_kb X_b A_lb Z_b⁻¹]`.
    fn schur(&self, x: &[DMatrix<f64>], zinv: &[DMatrix<f64>]) -> DMatrix<f64> {
        let m = self.rows.len();
        let mut out = DMatrix::zeros(m, m);
        for (blk, touching) in self.block_rows().into_iter().enumerate() {
            let (xb, zb) = (&x[blk], &zinv[blk]);
            for (a, &(k, ek)) in touching.iter().enumerate() {
                for &(l, el) in &touching[a..] {
                    let mut s = 0.0;
                    for &(i, j, va) in ek {
                        for &(p, q, vc) in el {
                            s += va * vc * xb[(j, p)] * zb[(q, i)];
                        }
                    }
                    out[(k, l)] += s;
                    if k != l {
                        out[(l, k)] += s;
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub(crate) struct RawSolution {
    pub status: SolverStatus,
    pub x: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub y: Vec<f64>,
    pub primal_value: f64,
    pub dual_value: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

fn inner(a: &[DMatrix<f64>], b: &[DMatrix<f64>]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.dot(q)).sum()
}

fn frob(a: &[DMatrix<f64>]) -> f64 {
    a.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Largest `α` with `X + α ΔX ⪰ 0` (infinite if none), given `chol(X) = L Lᵀ`.
fn max_step(l: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let Some(left) = l.solve_lower_triangular(dx) else { return 0.0 };
    let Some(both) = l.solve_lower_triangular(&left.transpose()) else { return 0.0 };
    let lam = sym(both).symmetric_eigenvalues().min();
    if lam < 0.0 { -1.0 / lam } else { f64::INFINITY }
}

fn block_max_step(ls: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> f64 {
    ls.iter().zip(d).map(|(l, dx)| max_step(l, dx)).fold(f64::INFINITY, f64::min)
}

fn cholesky_factors(x: &[DMatrix<f64>]) -> Option<Vec<DMatrix<f64>>> {
    x.iter().map(|m| m.clone().cholesky().map(|c| c.l())).collect()
}

/// Solves `M v = r`, regularising or falling back to LU if `M` is not
/// numerically positive definite.
fn solve_schur(m: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = m.clone().cholesky() {
        return Some(ch.solve(r));
    }
    let scale = m.diagonal().amax().max(1.0);
    let reg = m + DMatrix::identity(m.nrows(), m.ncols()) * (1e-12 * scale);
    if let Some(ch) = reg.cholesky() {
        return Some(ch.solve(r));
    }
    m.clone().lu().solve(r)
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
}

struct Iterate<'a> {
    data: &'a RealSdp,
    x: &'a [DMatrix<f64>],
    zinv: &'a [DMatrix<f64>],
    rp: &'a DVector<f64>,
    rd: &'a [DMatrix<f64>],
    schur: &'a DMatrix<f64>,
}

impl Iterate<'_> {
    /// HKM direction for the centring target `σμ`, with an optional
    /// second-order correction `ΔX_a ΔZ_a`.
    fn direction(&self, sigma_mu: f64, correction: Option<&Direction>) -> Option<Direction> {
        let h: Vec<DMatrix<f64>> = (0..self.x.len())
            .map(|b| {
                let (x, zinv) = (&self.x[b], &self.zinv[b]);
                let mut h = x - zinv * sigma_mu + x * &self.rd[b] * zinv;
                if let Some(c) = correction {
                    h += &c.dx[b] * &c.dz[b] * zinv;
                }
                h
            })
            .collect();
        let rhs = self.rp + self.data.apply(&h.iter().map(|m| sym(m.clone())).collect::<Vec<_>>());
        let mut dy = solve_schur(self.schur, &rhs)?;
        // The assembled Schur matrix loses accuracy near the boundary; refine
        // dy until A(ΔX) = r_p holds for the operator itself.
        let target = REFINE_TOL * (1.0 + self.rp.amax());
        let mut refinements = 0;
        loop {
            if dy.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let aty = self.data.adjoint(&dy);
            let dx: Vec<DMatrix<f64>> = (0..self.x.len())
                .map(|b| sym(-&h[b] + &self.x[b] * &aty[b] * &self.zinv[b]))
                .collect();
            let res = self.rp - self.data.apply(&dx);
            if res.amax() <= target || refinements == MAX_REFINEMENTS {
                let dz = self.rd.iter().zip(&aty).map(|(r, a)| r - a).collect();
                return Some(Direction { dx, dy, dz });
            }
            dy += solve_schur(self.schur, &res)?;
            refinements += 1;
        }
    }
}

/// Scaled-identity starting point.
fn starting_point(data: &RealSdp) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let per_block = data.block_rows();
    let mut x = Vec::with_capacity(data.dims.len());
    let mut z = Vec::with_capacity(data.dims.len());
    for (blk, &n) in data.dims.iter().enumerate() {
        let nf = n as f64;
        let norms: Vec<(usize, f64)> = per_block[blk]
            .iter()
            .map(|&(k, e)| (k, e.iter().map(|t| t.2 * t.2).sum::<f64>().sqrt()))
            .collect();
        let xi = norms
            .iter()
            .map(|&(k, a)| nf * (1.0 + data.b[k].abs()) / (1.0 + a))
            .fold(10f64.max(nf.sqrt()), f64::max);
        let eta = norms
            .iter()
            .map(|&(_, a)| a)
            .fold(10f64.max(nf.sqrt()).max(data.c[blk].norm()), f64::max);
        x.push(DMatrix::identity(n, n) * xi);
        z.push(DMatrix::identity(n, n) * eta);
    }
    (x, z)
}

const REFINE_TOL: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 3;

fn run(data: &RealSdp, opts: &SolverOptions) -> RawSolution {
    let m = data.num_rows();
    let total_dim: f64 = data.dims.iter().sum::<usize>() as f64;
    let (mut x, mut z) = starting_point(data);
    let mut y = DVector::zeros(m);
    let c_scale = 1.0 + frob(&data.c);
    let mut last_steps = (1.0f64, 1.0f64);
    let mut stalls = 0;

    let finish = |status, x: Vec<DMatrix<f64>>, z: Vec<DMatrix<f64>>, y: &DVector<f64>, iterations| {
        let rp = &data.b - data.apply(&x);
        let aty = data.adjoint(y);
        let rd: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &data.c[b] - &z[b] - &aty[b]).collect();
        RawSolution {
            status,
            primal_value: inner(&data.c, &x),
            dual_value: data.b.dot(y),
            primal_residual: rp.amax(),
            dual_residual: frob(&rd) / c_scale,
            x,
            z,
            y: y.iter().copied().collect(),
            iterations,
        }
    };

    for iter in 0..opts.max_iter {
        let rp = &data.b - data.apply(&x);
        let aty = data.adjoint(&y);
        let rd: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &data.c[b] - &z[b] - &aty[b]).collect();
        let pobj = inner(&data.c, &x);
        let dobj = data.b.dot(&y);
        let xz = inner(&x, &z);
        let mu = xz / total_dim;
        let scale = 1.0 + pobj.abs();
        let rp_norm = rp.amax();
        let rd_norm = frob(&rd) / c_scale;

        if (pobj - dobj).abs() <= opts.gap_tol * scale
            && xz <= opts.gap_tol * scale
            && rp_norm <= opts.feas_tol
            && rd_norm <= opts.feas_tol
        {
            return finish(SolverStatus::Optimal, x, z, &y, iter);
        }
        if dobj > 0.0 {
            // y / (b·y) is a Farkas ray once C − R_d is negligible against b·y.
            let ray: Vec<DMatrix<f64>> = (0..x.len()).map(|b| &data.c[b] - &rd[b]).collect();
            if frob(&ray) / dobj <= CERTIFICATE_TOL {
                return finish(SolverStatus::Infeasible, x, z, &y, iter);
            }
        }
        if pobj < 0.0 {
            let ax = &data.b - &rp;
            if ax.norm() / (-pobj) <= CERTIFICATE_TOL {
                return finish(SolverStatus::Unbounded, x, z, &y, iter);
            }
        }

        let Some(lx) = cholesky_factors(&x) else { return finish(SolverStatus::Stalled, x, z, &y, iter) };
        let Some(lz) = cholesky_factors(&z) else { return finish(SolverStatus::Stalled, x, z, &y, iter) };
        let zinv: Vec<DMatrix<f64>> = lz
            .iter()
            .map(|l| {
                let n = l.nrows();
                let linv = l.solve_lower_triangular(&DMatrix::identity(n, n)).expect("Cholesky factor is invertible");
                linv.transpose() * linv
            })
            .collect();
        let schur = data.schur(&x, &zinv);
        let it = Iterate { data, x: &x, zinv: &zinv, rp: &rp, rd: &rd, schur: &schur };

        let Some(pred) = it.direction(0.0, None) else { return finish(SolverStatus::Stalled, x, z, &y, iter) };
        let ap = block_max_step(&lx, &pred.dx).min(1.0);
        let ad = block_max_step(&lz, &pred.dz).min(1.0);
        let x_aff: Vec<DMatrix<f64>> = x.iter().zip(&pred.dx).map(|(a, d)| a + d * ap).collect();
        let z_aff: Vec<DMatrix<f64>> = z.iter().zip(&pred.dz).map(|(a, d)| a + d * ad).collect();
        let mu_aff = inner(&x_aff, &z_aff) / total_dim;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        let Some(dir) = it.direction(sigma * mu, Some(&pred)) else {
            return finish(SolverStatus::Stalled, x, z, &y, iter);
        };
        let gamma = 0.9 + 0.09 * last_steps.0.min(last_steps.1);
        let ap = (gamma * block_max_step(&lx, &dir.dx)).min(1.0);
        let ad = (gamma * block_max_step(&lz, &dir.dz)).min(1.0);
        for b in 0..x.len() {
            x[b] = sym(&x[b] + &dir.dx[b] * ap);
            z[b] = sym(&z[b] + &dir.dz[b] * ad);
        }
        y += &dir.dy * ad;
        last_steps = (ap, ad);

        if ap < 1e-10 && ad < 1e-10 {
            stalls += 1;
            if stalls >= STALL_LIMIT {
                return finish(SolverStatus::Stalled, x, z, &y, iter + 1);
            }
        } else {
            stalls = 0;
        }
    }
    finish(SolverStatus::MaxIter, x, z, &y, opts.max_iter)
}

/// Presolves, runs the interior-point method and maps the multipliers back
/// to the original rows.
pub(crate) fn solve(data: &RealSdp, opts: &SolverOptions) -> RawSolution {
    let m = data.num_rows();
    match presolve::independent_rows(data) {
        Presolved::Inconsistent(_) => {
            let x: Vec<DMatrix<f64>> = data.dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
            let rp = data.b.amax();
            RawSolution {
                status: SolverStatus::Infeasible,
                z: x.clone(),
                x,
                y: vec![0.0; m],
                primal_value: f64::NAN,
                dual_value: f64::NAN,
                iterations: 0,
                primal_residual: rp,
                dual_residual: f64::NAN,
            }
        }
        Presolved::Independent(kept) => {
            let reduced = data.select(&kept);
            let mut raw = run(&reduced, opts);
            let mut y = vec![0.0; m];
            for (v, &k) in raw.y.iter().zip(&kept) {
                y[k] = *v;
            }
            raw.y = y;
            raw.primal_residual = (&data.b - data.apply(&raw.x)).amax();
            raw
        }
    }
}
