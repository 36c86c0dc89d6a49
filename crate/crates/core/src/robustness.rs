//! Robustness of incompatibility and its dual witnesses.
//!
//! Three primal programs compute the least noise weight `s` making a
//! collection compatible after mixing `(object + s·noise)/(1+s)`. Written
//! over the cone of compatible objects with a free normalisation `t = 1+s`,
//! they become standard SDPs whose dual slacks on the "object ⪯ cone point"
//! constraints are the witness operators. Two further programs solve the
//! witness problems directly, with the universal constraint over compatible
//! objects replaced by an equivalent finite certificate `I ⊗ Y ⪰ …`,
//! `Tr Y ≤ d`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::compat::{
    self, assignments, check_channel_collection, check_measurement_collection, check_pair_dims, choi_input_term,
    input_term, marginal_term, JointObject, ParentPovm,
};
use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix, TensorShape};
use crate::qobjects::{joint_shape, qc_channel, ChoiMatrix, Instrument, JointChannel, Povm, PovmCollection};
use crate::sdp::{self, BlockId, SdpProblem, SolverOptions, Term};

/// Below this noise weight the noise object is reported as absent.
pub const ZERO_NOISE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustnessKind {
    Measurements,
    Channels,
    Pair,
}

/// Witness operators, matched to the kind of collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WitnessOperators {
    /// `A_x` on `K ⊗ H`.
    Channels {
        #[serde(with = "matrix::json::vec")]
        a: Vec<ComplexMatrix>,
    },
    /// `A_{i|x}` on `H`, indexed `[x][i]`.
    Measurements { a: Vec<MatrixList> },
    /// `A_i` on `H` and `B` on `K ⊗ H`.
    Pair {
        #[serde(with = "matrix::json::vec")]
        a: Vec<ComplexMatrix>,
        #[serde(with = "matrix::json")]
        b: ComplexMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixList(#[serde(with = "matrix::json::vec")] pub Vec<ComplexMatrix>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessSet {
    pub dim_in: usize,
    pub dim_out: usize,
    /// Witness objective on the target minus one.
    pub value: f64,
    pub operators: WitnessOperators,
}

impl WitnessSet {
    pub fn kind(&self) -> RobustnessKind {
        match self.operators {
            WitnessOperators::Channels { .. } => RobustnessKind::Channels,
            WitnessOperators::Measurements { .. } => RobustnessKind::Measurements,
            WitnessOperators::Pair { .. } => RobustnessKind::Pair,
        }
    }

    /// `Σ_x Tr[A_x J_x]`.
    pub fn channel_functional(&self, chs: &[ChoiMatrix]) -> Result<f64> {
        let WitnessOperators::Channels { a } = &self.operators else {
            return Err(Error::Contract("not a channel witness".into()));
        };
        if a.len() != chs.len() {
            return Err(Error::Dimension(format!("witness has {} components, collection {}", a.len(), chs.len())));
        }
        Ok(a.iter().zip(chs).map(|(a, ch)| matrix::trace_product_re(a, &ch.matrix)).sum())
    }

    /// `Σ_{x,i} Tr[A_{i|x} M_{i|x}]`.
    pub fn measurement_functional(&self, ms: &PovmCollection) -> Result<f64> {
        let WitnessOperators::Measurements { a } = &self.operators else {
            return Err(Error::Contract("not a measurement witness".into()));
        };
        if a.len() != ms.len() {
            return Err(Error::Dimension("witness and collection differ in size".into()));
        }
        Ok(a.iter()
            .zip(&ms.povms)
            .flat_map(|(ax, m)| ax.0.iter().zip(&m.elements))
            .map(|(a, m)| matrix::trace_product_re(a, m))
            .sum())
    }

    /// `Σ_i Tr[A_i M_i] + Tr[B J]`.
    pub fn pair_functional(&self, m: &Povm, ch: &ChoiMatrix) -> Result<f64> {
        let WitnessOperators::Pair { a, b } = &self.operators else {
            return Err(Error::Contract("not a pair witness".into()));
        };
        if a.len() != m.outcomes() {
            return Err(Error::Dimension("witness and measurement differ in outcome count".into()));
        }
        let meas: f64 = a.iter().zip(&m.elements).map(|(a, e)| matrix::trace_product_re(a, e)).sum();
        Ok(meas + matrix::trace_product_re(b, &ch.matrix))
    }
}

/// Optimal noise realising the robustness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseObject {
    Measurements { povms: Vec<MatrixList> },
    Channels { channels: Vec<ChoiMatrix> },
    Pair {
        #[serde(with = "matrix::json::vec")]
        povm: Vec<ComplexMatrix>,
        channel: ChoiMatrix,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub kind: RobustnessKind,
    #[serde(rename = "robustness")]
    pub primal_value: f64,
    #[serde(rename = "dual")]
    pub dual_value: f64,
    pub gap: f64,
    pub witness: WitnessSet,
    /// Absent when the robustness is below [`ZERO_NOISE`].
    pub noise: Option<NoiseObject>,
    /// Joint object of the normalised mixture.
    pub mixture_joint: JointObject,
    pub iterations: usize,
}

impl RobustnessReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Noise weight `s` used to build the mixture (the primal value, floored at zero).
    pub fn noise_weight(&self) -> f64 {
        self.primal_value.max(0.0)
    }
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn eye(d: usize, scale: f64) -> ComplexMatrix {
    matrix::identity(d) * c(scale)
}

fn herm(m: &ComplexMatrix) -> ComplexMatrix {
    matrix::hermitian_part(m)
}

/// `R_C` by the cone program over joint channels.
pub fn robustness_channels_primal(chs: &[ChoiMatrix], opts: &SolverOptions) -> Result<RobustnessReport> {
    let (d, k, n) = check_channel_collection(chs)?;
    let big = k.pow(n as u32);
    let mut p = SdpProblem::new();
    let g = p.add_hermitian(big * d);
    let slacks: Vec<BlockId> = (0..n).map(|_| p.add_hermitian(k * d)).collect();
    let tau = p.add_scalar(1.0);
    for (x, ch) in chs.iter().enumerate() {
        p.add_equality(&[marginal_term(g, d, k, n, x), Term::identity(slacks[x], k * d).scaled(-1.0)], &ch.matrix)?;
    }
    p.add_equality(&[input_term(g, d, k, n), Term::scalar(tau, eye(d, -1.0 / d as f64))], &matrix::zeros(d, d))?;
    let sol = sdp::solve(&p, opts).require_optimal("channel robustness")?;

    let t = sol.block_values[tau.0][(0, 0)].re;
    let s = t - 1.0;
    let a: Vec<ComplexMatrix> = slacks.iter().map(|b| herm(&sol.dual_slacks[b.0])).collect();
    let witness_value = a.iter().zip(chs).map(|(a, ch)| matrix::trace_product_re(a, &ch.matrix)).sum::<f64>() - 1.0;
    let noise = (s >= ZERO_NOISE).then(|| NoiseObject::Channels {
        channels: slacks
            .iter()
            .map(|b| ChoiMatrix { dim_in: d, dim_out: k, matrix: herm(&sol.block_values[b.0]) * c(1.0 / s) })
            .collect(),
    });
    let mixture_joint =
        JointObject::Channel(JointChannel { dim_in: d, dim_out_each: k, n, choi: herm(&sol.block_values[g.0]) * c(1.0 / t) });
    let (primal, dual) = (sol.primal_value - 1.0, sol.dual_value - 1.0);
    Ok(RobustnessReport {
        kind: RobustnessKind::Channels,
        primal_value: primal,
        dual_value: dual,
        gap: (primal - dual).abs(),
        witness: WitnessSet { dim_in: d, dim_out: k, value: witness_value, operators: WitnessOperators::Channels { a } },
        noise,
        mixture_joint,
        iterations: sol.iterations,
    })
}

/// Witness program for `R_C`: maximise `Σ_x Tr[A_x J_x] − 1` over
/// `A_x ⪰ 0` with `I ⊗ Y ⪰ Σ_x A_x` (lifted) and `Tr Y ≤ d`.
pub fn robustness_channels_dual(chs: &[ChoiMatrix], opts: &SolverOptions) -> Result<WitnessSet> {
    let (d, k, n) = check_channel_collection(chs)?;
    let big = k.pow(n as u32);
    let shape = joint_shape(d, k, n);
    let mut p = SdpProblem::new();
    let a: Vec<BlockId> = (0..n).map(|_| p.add_hermitian(k * d)).collect();
    let y = p.add_hermitian(d);
    let slack = p.add_hermitian(big * d);
    let u = p.add_scalar(0.0);
    for (x, ch) in chs.iter().enumerate() {
        p.add_objective(a[x], &(&ch.matrix * c(-1.0)))?;
    }
    let mut terms = vec![Term::lift(y, shape.clone(), vec![n]), Term::identity(slack, big * d).scaled(-1.0)];
    terms.extend((0..n).map(|x| Term::lift(a[x], shape.clone(), vec![x, n]).scaled(-1.0)));
    p.add_equality(&terms, &matrix::zeros(big * d, big * d))?;
    p.add_equality(&[Term::partial_trace(y, TensorShape::new(vec![d]), vec![]), Term::scalar(u, eye(1, 1.0))], &eye(1, d as f64))?;
    let sol = sdp::solve(&p, opts).require_optimal("channel witness")?;
    let a: Vec<ComplexMatrix> = a.iter().map(|b| herm(&sol.block_values[b.0])).collect();
    let value = a.iter().zip(chs).map(|(a, ch)| matrix::trace_product_re(a, &ch.matrix)).sum::<f64>() - 1.0;
    Ok(WitnessSet { dim_in: d, dim_out: k, value, operators: WitnessOperators::Channels { a } })
}

/// `R_M` by the cone program over parent POVMs.
pub fn robustness_measurements(ms: &PovmCollection, opts: &SolverOptions) -> Result<RobustnessReport> {
    let (d, n, o) = check_measurement_collection(ms)?;
    let lambdas = assignments(n, o);
    let mut p = SdpProblem::new();
    let g: Vec<BlockId> = lambdas.iter().map(|_| p.add_hermitian(d)).collect();
    let slacks: Vec<Vec<BlockId>> = (0..n).map(|_| (0..o).map(|_| p.add_hermitian(d)).collect()).collect();
    let t = p.add_scalar(1.0);
    let mut total: Vec<Term> = g.iter().map(|&b| Term::identity(b, d)).collect();
    total.push(Term::scalar(t, eye(d, -1.0)));
    p.add_equality(&total, &matrix::zeros(d, d))?;
    for x in 0..n {
        for i in 0..o {
            let mut terms: Vec<Term> = lambdas
                .iter()
                .zip(&g)
                .filter(|(l, _)| l[x] == i)
                .map(|(_, &b)| Term::identity(b, d))
                .collect();
            terms.push(Term::identity(slacks[x][i], d).scaled(-1.0));
            p.add_equality(&terms, &ms.povms[x].elements[i])?;
        }
    }
    let sol = sdp::solve(&p, opts).require_optimal("measurement robustness")?;

    let tv = sol.block_values[t.0][(0, 0)].re;
    let s = tv - 1.0;
    let a: Vec<MatrixList> =
        slacks.iter().map(|row| MatrixList(row.iter().map(|b| herm(&sol.dual_slacks[b.0])).collect())).collect();
    let witness_value = a
        .iter()
        .zip(&ms.povms)
        .flat_map(|(ax, m)| ax.0.iter().zip(&m.elements))
        .map(|(a, e)| matrix::trace_product_re(a, e))
        .sum::<f64>()
        - 1.0;
    let noise = (s >= ZERO_NOISE).then(|| NoiseObject::Measurements {
        povms: slacks
            .iter()
            .map(|row| MatrixList(row.iter().map(|b| herm(&sol.block_values[b.0]) * c(1.0 / s)).collect()))
            .collect(),
    });
    let mixture_joint = JointObject::Parent(ParentPovm {
        dim: d,
        n,
        outcomes: o,
        elements: g.iter().map(|b| herm(&sol.block_values[b.0]) * c(1.0 / tv)).collect(),
    });
    let (primal, dual) = (sol.primal_value - 1.0, sol.dual_value - 1.0);
    Ok(RobustnessReport {
        kind: RobustnessKind::Measurements,
        primal_value: primal,
        dual_value: dual,
        gap: (primal - dual).abs(),
        witness: WitnessSet { dim_in: d, dim_out: d, value: witness_value, operators: WitnessOperators::Measurements { a } },
        noise,
        mixture_joint,
        iterations: sol.iterations,
    })
}

/// `R_MC` by the cone program over instruments.
pub fn robustness_pair_primal(m: &Povm, ch: &ChoiMatrix, opts: &SolverOptions) -> Result<RobustnessReport> {
    check_pair_dims(m, ch)?;
    let (d, k, o) = (ch.dim_in, ch.dim_out, m.outcomes());
    let df = d as f64;
    let mut p = SdpProblem::new();
    let j: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(k * d)).collect();
    let s_blocks: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(d)).collect();
    let tb = p.add_hermitian(k * d);
    let t = p.add_scalar(1.0);
    let mut norm: Vec<Term> = j.iter().map(|&b| choi_input_term(b, d, k)).collect();
    norm.push(Term::scalar(t, eye(d, -1.0 / df)));
    p.add_equality(&norm, &matrix::zeros(d, d))?;
    for i in 0..o {
        let terms = [choi_input_term(j[i], d, k).transposed().scaled(df), Term::identity(s_blocks[i], d).scaled(-1.0)];
        p.add_equality(&terms, &m.elements[i])?;
    }
    let mut sum: Vec<Term> = j.iter().map(|&b| Term::identity(b, k * d)).collect();
    sum.push(Term::identity(tb, k * d).scaled(-1.0));
    p.add_equality(&sum, &ch.matrix)?;
    let sol = sdp::solve(&p, opts).require_optimal("pair robustness")?;

    let tv = sol.block_values[t.0][(0, 0)].re;
    let s = tv - 1.0;
    let a: Vec<ComplexMatrix> = s_blocks.iter().map(|b| herm(&sol.dual_slacks[b.0])).collect();
    let b = herm(&sol.dual_slacks[tb.0]);
    let witness_value = a.iter().zip(&m.elements).map(|(a, e)| matrix::trace_product_re(a, e)).sum::<f64>()
        + matrix::trace_product_re(&b, &ch.matrix)
        - 1.0;
    let noise = (s >= ZERO_NOISE).then(|| NoiseObject::Pair {
        povm: s_blocks.iter().map(|b| herm(&sol.block_values[b.0]) * c(1.0 / s)).collect(),
        channel: ChoiMatrix { dim_in: d, dim_out: k, matrix: herm(&sol.block_values[tb.0]) * c(1.0 / s) },
    });
    let mixture_joint = JointObject::Instrument(Instrument {
        dim_in: d,
        dim_out: k,
        elements: j.iter().map(|b| herm(&sol.block_values[b.0]) * c(1.0 / tv)).collect(),
    });
    let (primal, dual) = (sol.primal_value - 1.0, sol.dual_value - 1.0);
    Ok(RobustnessReport {
        kind: RobustnessKind::Pair,
        primal_value: primal,
        dual_value: dual,
        gap: (primal - dual).abs(),
        witness: WitnessSet { dim_in: d, dim_out: k, value: witness_value, operators: WitnessOperators::Pair { a, b } },
        noise,
        mixture_joint,
        iterations: sol.iterations,
    })
}

/// Witness program for `R_MC`: maximise `Σ_i Tr[A_i M_i] + Tr[B J] − 1`
/// over `A_i, B ⪰ 0` with `I ⊗ Y ⪰ B + d·I ⊗ A_iᵀ` for every `i` and
/// `Tr Y ≤ d`.
pub fn robustness_pair_dual(m: &Povm, ch: &ChoiMatrix, opts: &SolverOptions) -> Result<WitnessSet> {
    check_pair_dims(m, ch)?;
    let (d, k, o) = (ch.dim_in, ch.dim_out, m.outcomes());
    let shape = TensorShape::new(vec![k, d]);
    let mut p = SdpProblem::new();
    let a: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(d)).collect();
    let b = p.add_hermitian(k * d);
    let y = p.add_hermitian(d);
    let slacks: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(k * d)).collect();
    let u = p.add_scalar(0.0);
    for i in 0..o {
        p.add_objective(a[i], &(&m.elements[i] * c(-1.0)))?;
    }
    p.add_objective(b, &(&ch.matrix * c(-1.0)))?;
    for i in 0..o {
        let terms = [
            Term::lift(y, shape.clone(), vec![1]),
            Term::identity(b, k * d).scaled(-1.0),
            Term::lift(a[i], shape.clone(), vec![1]).transposed().scaled(-(d as f64)),
            Term::identity(slacks[i], k * d).scaled(-1.0),
        ];
        p.add_equality(&terms, &matrix::zeros(k * d, k * d))?;
    }
    p.add_equality(&[Term::partial_trace(y, TensorShape::new(vec![d]), vec![]), Term::scalar(u, eye(1, 1.0))], &eye(1, d as f64))?;
    let sol = sdp::solve(&p, opts).require_optimal("pair witness")?;
    let a: Vec<ComplexMatrix> = a.iter().map(|blk| herm(&sol.block_values[blk.0])).collect();
    let bv = herm(&sol.block_values[b.0]);
    let value = a.iter().zip(&m.elements).map(|(a, e)| matrix::trace_product_re(a, e)).sum::<f64>()
        + matrix::trace_product_re(&bv, &ch.matrix)
        - 1.0;
    Ok(WitnessSet { dim_in: d, dim_out: k, value, operators: WitnessOperators::Pair { a, b: bv } })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop1Check {
    pub rm: f64,
    pub rc: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prop2Check {
    pub rmc: f64,
    pub rc: f64,
    pub delta: f64,
}

/// `R_M` of a collection against `R_C` of its quantum-to-classical channels.
pub fn verify_prop1(ms: &PovmCollection, opts: &SolverOptions) -> Result<Prop1Check> {
    let rm = robustness_measurements(ms, opts)?.primal_value;
    let chs = ms.povms.iter().map(qc_channel).collect::<Result<Vec<_>>>()?;
    let rc = robustness_channels_primal(&chs, opts)?.primal_value;
    Ok(Prop1Check { rm, rc, delta: (rm - rc).abs() })
}

/// `R_MC` of a pair against `R_C` of `{Γ_M, Λ}` on a common output space.
pub fn verify_prop2(m: &Povm, ch: &ChoiMatrix, opts: &SolverOptions) -> Result<Prop2Check> {
    let rmc = robustness_pair_primal(m, ch, opts)?.primal_value;
    let common = m.outcomes().max(ch.dim_out);
    let chs = [qc_channel(m)?.pad_output(common)?, ch.pad_output(common)?];
    let rc = robustness_channels_primal(&chs, opts)?.primal_value;
    Ok(Prop2Check { rmc, rc, delta: (rmc - rc).abs() })
}

/// Robustness of two copies of the identity channel, `(d − 1)/(d + 1)`.
pub fn identity_pair_closed_form(d: usize) -> Result<f64> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    let d = d as f64;
    Ok((d - 1.0) / (d + 1.0))
}

/// Compatibility verdict for the normalised mixture of a report.
pub fn mixture_is_compatible(report: &RobustnessReport, opts: &SolverOptions) -> Result<bool> {
    let verdict = match &report.mixture_joint {
        JointObject::Channel(joint) => {
            let chs = (0..joint.n)
                .map(|x| {
                    let m = matrix::partial_trace(&joint.choi, &joint.shape(), &[x, joint.n])?;
                    Ok(ChoiMatrix { dim_in: joint.dim_in, dim_out: joint.dim_out_each, matrix: m })
                })
                .collect::<Result<Vec<_>>>()?;
            compat::check_channels(&chs, opts)?
        }
        JointObject::Parent(parent) => {
            let povms = (0..parent.n)
                .map(|x| Povm { dim: parent.dim, elements: parent.marginal(x) })
                .collect();
            compat::check_measurements(&PovmCollection { povms }, opts)?
        }
        JointObject::Instrument(instr) => {
            let shape = instr.shape();
            let df = instr.dim_in as f64;
            let elements = instr
                .elements
                .iter()
                .map(|e| Ok(matrix::partial_trace(e, &shape, &[1])?.transpose() * c(df)))
                .collect::<Result<Vec<_>>>()?;
            let total = instr.elements.iter().fold(matrix::zeros(shape.dim(), shape.dim()), |acc, e| acc + e);
            let m = Povm { dim: instr.dim_in, elements };
            let ch = ChoiMatrix { dim_in: instr.dim_in, dim_out: instr.dim_out, matrix: total };
            compat::check_pair(&m, &ch, opts)?
        }
    };
    Ok(verdict.compatible)
}
