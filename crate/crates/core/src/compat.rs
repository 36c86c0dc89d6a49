//! Compatibility of measurements, channels, and measurement–channel pairs.
//!
//! Each check is a max-margin feasibility program: the joint object is
//! written as `G = G' + t I` with `G' ⪰ 0` and `t` maximised. The collection
//! is compatible iff the optimal margin `t` is at least `-MARGIN_TOL`.
//! Since `t` is bounded below by `-1` on every instance, the program
//! substitutes `t = u - 1` with a nonnegative scalar `u`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix, TensorShape};
use crate::qobjects::{joint_shape, ChoiMatrix, Instrument, JointChannel, Povm, PovmCollection};
use crate::sdp::{self, BlockId, SdpProblem, SolverOptions, Term};

/// Margin above which a collection counts as compatible.
pub const MARGIN_TOL: f64 = 1e-7;
/// Largest number of members in a collection.
pub const MAX_MEMBERS: usize = 4;
/// Largest outcome count for measurement collections.
pub const MAX_OUTCOMES: usize = 4;

/// Parent POVM `{G_λ}` indexed by deterministic assignments `λ ∈ Ω^n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParentPovm {
    pub dim: usize,
    pub n: usize,
    pub outcomes: usize,
    /// `elements[k]` belongs to `assignments(n, outcomes)[k]`.
    #[serde(with = "matrix::json::vec")]
    pub elements: Vec<ComplexMatrix>,
}

impl ParentPovm {
    /// `Σ_{λ(x)=i} G_λ`.
    pub fn marginal(&self, x: usize) -> Vec<ComplexMatrix> {
        let mut out = vec![matrix::zeros(self.dim, self.dim); self.outcomes];
        for (lambda, g) in assignments(self.n, self.outcomes).iter().zip(&self.elements) {
            out[lambda[x]] += g;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JointObject {
    Parent(ParentPovm),
    Channel(JointChannel),
    Instrument(Instrument),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityVerdict {
    pub compatible: bool,
    /// Largest `t` with a joint object `⪰ t I`.
    pub margin: f64,
    pub joint: Option<JointObject>,
}

impl CompatibilityVerdict {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serialises")
    }
}

/// All maps `λ: {0..n} → {0..o}`, lexicographic with `λ(0)` most significant.
pub fn assignments(n: usize, o: usize) -> Vec<Vec<usize>> {
    let total = o.pow(n as u32);
    (0..total)
        .map(|mut k| {
            let mut lambda = vec![0; n];
            for slot in lambda.iter_mut().rev() {
                *slot = k % o;
                k /= o;
            }
            lambda
        })
        .collect()
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn eye(d: usize, scale: f64) -> ComplexMatrix {
    matrix::identity(d) * c(scale)
}

/// `J_x` as a function of the joint Choi block.
pub(crate) fn marginal_term(block: BlockId, d_in: usize, d_out: usize, n: usize, x: usize) -> Term {
    Term::partial_trace(block, joint_shape(d_in, d_out, n), vec![x, n])
}

/// `Tr_{K^n}` of the joint Choi block.
pub(crate) fn input_term(block: BlockId, d_in: usize, d_out: usize, n: usize) -> Term {
    Term::partial_trace(block, joint_shape(d_in, d_out, n), vec![n])
}

/// `Tr_K` of a single Choi block on `K ⊗ H`.
pub(crate) fn choi_input_term(block: BlockId, d_in: usize, d_out: usize) -> Term {
    Term::partial_trace(block, TensorShape::new(vec![d_out, d_in]), vec![1])
}

pub(crate) fn check_channel_collection(chs: &[ChoiMatrix]) -> Result<(usize, usize, usize)> {
    let first = chs.first().ok_or_else(|| Error::Contract("empty channel collection".into()))?;
    let (d, k) = (first.dim_in, first.dim_out);
    if chs.iter().any(|ch| ch.dim_in != d || ch.dim_out != k) {
        return Err(Error::Dimension("channels must share input and output dimensions".into()));
    }
    if chs.len() > MAX_MEMBERS {
        return Err(Error::Domain(format!("at most {MAX_MEMBERS} channels are supported, got {}", chs.len())));
    }
    Ok((d, k, chs.len()))
}

pub(crate) fn check_measurement_collection(ms: &PovmCollection) -> Result<(usize, usize, usize)> {
    let (n, o) = (ms.len(), ms.outcomes());
    if n > MAX_MEMBERS || o > MAX_OUTCOMES {
        return Err(Error::Domain(format!(
            "measurement collections are limited to {MAX_MEMBERS} members with {MAX_OUTCOMES} outcomes, got {n} with {o}"
        )));
    }
    Ok((ms.dim(), n, o))
}

pub(crate) fn check_pair_dims(m: &Povm, ch: &ChoiMatrix) -> Result<()> {
    if m.dim != ch.dim_in {
        return Err(Error::Dimension(format!(
            "measurement acts on dimension {}, channel input is {}",
            m.dim, ch.dim_in
        )));
    }
    Ok(())
}

/// Solves the margin program and returns `(margin, G' blocks)`.
fn solve_margin(p: &SdpProblem, u: BlockId, opts: &SolverOptions, what: &str) -> Result<(f64, Vec<ComplexMatrix>)> {
    let sol = sdp::solve(p, opts).require_optimal(what)?;
    let margin = sol.block_values[u.0][(0, 0)].re - 1.0;
    Ok((margin, sol.block_values))
}

fn shifted(g: &ComplexMatrix, t: f64) -> ComplexMatrix {
    matrix::hermitian_part(&(g + eye(g.nrows(), t)))
}

/// Joint measurability via a parent POVM over deterministic assignments.
pub fn check_measurements(ms: &PovmCollection, opts: &SolverOptions) -> Result<CompatibilityVerdict> {
    let (d, n, o) = check_measurement_collection(ms)?;
    let lambdas = assignments(n, o);
    let mut p = SdpProblem::new();
    let blocks: Vec<BlockId> = lambdas.iter().map(|_| p.add_hermitian(d)).collect();
    let u = p.add_scalar(-1.0);
    let per_outcome = o.pow(n as u32 - 1) as f64;
    for x in 0..n {
        for i in 0..o {
            let mut terms: Vec<Term> = lambdas
                .iter()
                .zip(&blocks)
                .filter(|(l, _)| l[x] == i)
                .map(|(_, &b)| Term::identity(b, d))
                .collect();
            terms.push(Term::scalar(u, eye(d, per_outcome)));
            p.add_equality(&terms, &(&ms.povms[x].elements[i] + eye(d, per_outcome)))?;
        }
    }
    let (margin, values) = solve_margin(&p, u, opts, "parent POVM search")?;
    let compatible = margin >= -MARGIN_TOL;
    let joint = compatible.then(|| {
        JointObject::Parent(ParentPovm {
            dim: d,
            n,
            outcomes: o,
            elements: blocks.iter().map(|b| shifted(&values[b.0], margin)).collect(),
        })
    });
    Ok(CompatibilityVerdict { compatible, margin, joint })
}

/// Channel compatibility via a joint channel on `K^⊗n ⊗ H`.
pub fn check_channels(chs: &[ChoiMatrix], opts: &SolverOptions) -> Result<CompatibilityVerdict> {
    let (d, k, n) = check_channel_collection(chs)?;
    let big = k.pow(n as u32);
    let mut p = SdpProblem::new();
    let g = p.add_hermitian(big * d);
    let u = p.add_scalar(-1.0);
    let rest = (big / k) as f64;
    for (x, ch) in chs.iter().enumerate() {
        let terms = [marginal_term(g, d, k, n, x), Term::scalar(u, eye(k * d, rest))];
        p.add_equality(&terms, &(&ch.matrix + eye(k * d, rest)))?;
    }
    let terms = [input_term(g, d, k, n), Term::scalar(u, eye(d, big as f64))];
    p.add_equality(&terms, &eye(d, 1.0 / d as f64 + big as f64))?;
    let (margin, values) = solve_margin(&p, u, opts, "joint channel search")?;
    let compatible = margin >= -MARGIN_TOL;
    let joint = compatible.then(|| {
        JointObject::Channel(JointChannel { dim_in: d, dim_out_each: k, n, choi: shifted(&values[g.0], margin) })
    });
    Ok(CompatibilityVerdict { compatible, margin, joint })
}

/// Compatibility of a measurement and a channel via an instrument.
pub fn check_pair(m: &Povm, ch: &ChoiMatrix, opts: &SolverOptions) -> Result<CompatibilityVerdict> {
    check_pair_dims(m, ch)?;
    let (d, k, o) = (ch.dim_in, ch.dim_out, m.outcomes());
    let mut p = SdpProblem::new();
    let blocks: Vec<BlockId> = (0..o).map(|_| p.add_hermitian(k * d)).collect();
    let u = p.add_scalar(-1.0);
    let df = d as f64;
    for (i, &b) in blocks.iter().enumerate() {
        let terms = [
            choi_input_term(b, d, k).transposed().scaled(df),
            Term::scalar(u, eye(d, df * k as f64)),
        ];
        p.add_equality(&terms, &(&m.elements[i] + eye(d, df * k as f64)))?;
    }
    let mut terms: Vec<Term> = blocks.iter().map(|&b| Term::identity(b, k * d)).collect();
    terms.push(Term::scalar(u, eye(k * d, o as f64)));
    p.add_equality(&terms, &(&ch.matrix + eye(k * d, o as f64)))?;
    let (margin, values) = solve_margin(&p, u, opts, "instrument search")?;
    let compatible = margin >= -MARGIN_TOL;
    let joint = compatible.then(|| {
        JointObject::Instrument(Instrument {
            dim_in: d,
            dim_out: k,
            elements: blocks.iter().map(|b| shifted(&values[b.0], margin)).collect(),
        })
    });
    Ok(CompatibilityVerdict { compatible, margin, joint })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{max_abs, pauli_x};
    use crate::qobjects::{self, cloning_channel, instrument_povm, qc_channel};
    use crate::random::{random_channel, random_povm, seeded_rng, trial_seed};
    use proptest::prelude::*;

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn z_povm() -> Povm {
        Povm::computational(2)
    }

    fn x_povm() -> Povm {
        let (_, v) = matrix::eig_hermitian(&pauli_x()).unwrap();
        Povm::from_basis(&v).unwrap()
    }

    fn assert_parent_reproduces(ms: &PovmCollection, verdict: &CompatibilityVerdict) {
        let Some(JointObject::Parent(parent)) = &verdict.joint else { panic!("no parent") };
        for (x, m) in ms.povms.iter().enumerate() {
            for (a, b) in parent.marginal(x).iter().zip(&m.elements) {
                assert!(max_abs(&(a - b)) <= 1e-7);
            }
        }
        for g in &parent.elements {
            assert!(matrix::is_psd(g, 1e-7));
        }
    }

    fn assert_joint_channel_reproduces(chs: &[ChoiMatrix], verdict: &CompatibilityVerdict) {
        let Some(JointObject::Channel(joint)) = &verdict.joint else { panic!("no joint channel") };
        for (x, ch) in chs.iter().enumerate() {
            let m = matrix::partial_trace(&joint.choi, &joint.shape(), &[x, joint.n]).unwrap();
            assert!(max_abs(&(m - &ch.matrix)) <= 1e-7);
        }
        assert!(matrix::is_psd(&joint.choi, 1e-7));
    }

    #[test]
    fn assignments_enumerate_all_maps() {
        let a = assignments(2, 3);
        assert_eq!(a.len(), 9);
        assert_eq!(a[0], vec![0, 0]);
        assert_eq!(a[5], vec![1, 2]);
    }

    #[test]
    fn identical_measurements_are_compatible() {
        let ms = PovmCollection::new(vec![z_povm(), z_povm()]).unwrap();
        let v = check_measurements(&ms, &opts()).unwrap();
        assert!(v.compatible);
        assert_parent_reproduces(&ms, &v);
    }

    #[test]
    fn sharp_z_and_x_are_incompatible() {
        let ms = PovmCollection::new(vec![z_povm(), x_povm()]).unwrap();
        let v = check_measurements(&ms, &opts()).unwrap();
        assert!(!v.compatible, "margin {}", v.margin);
        assert!(v.joint.is_none());
    }

    #[test]
    fn half_depolarized_mub_pair_is_compatible() {
        let ms = PovmCollection::new(vec![z_povm().depolarized(0.5).unwrap(), x_povm().depolarized(0.5).unwrap()]).unwrap();
        let v = check_measurements(&ms, &opts()).unwrap();
        assert!(v.compatible);
        assert_parent_reproduces(&ms, &v);
    }

    #[test]
    fn two_identity_channels_are_incompatible() {
        let id = ChoiMatrix::identity(2).unwrap();
        let v = check_channels(&[id.clone(), id], &opts()).unwrap();
        assert!(!v.compatible);
    }

    #[test]
    fn cloning_marginals_are_compatible() {
        let clone = cloning_channel(2).unwrap();
        let chs = vec![clone.marginal(0).unwrap(), clone.marginal(1).unwrap()];
        let v = check_channels(&chs, &opts()).unwrap();
        assert!(v.compatible, "margin {}", v.margin);
        assert_joint_channel_reproduces(&chs, &v);
    }

    #[test]
    fn channel_with_constant_channel_is_compatible() {
        let mut rng = seeded_rng(11);
        let ch = random_channel(&mut rng, 2, 2);
        let constant = ChoiMatrix::constant(2, &matrix::projector(&matrix::ket(2, 1))).unwrap();
        let chs = vec![ch, constant];
        let v = check_channels(&chs, &opts()).unwrap();
        assert!(v.compatible);
        assert_joint_channel_reproduces(&chs, &v);
    }

    #[test]
    fn trivial_measurement_is_compatible_with_any_channel() {
        let mut rng = seeded_rng(2);
        let ch = random_channel(&mut rng, 2, 3);
        let m = Povm::trivial(2, &[0.3, 0.7]).unwrap();
        let v = check_pair(&m, &ch, &opts()).unwrap();
        assert!(v.compatible);
    }

    #[test]
    fn sharp_measurement_disturbs_identity() {
        let v = check_pair(&z_povm(), &ChoiMatrix::identity(2).unwrap(), &opts()).unwrap();
        assert!(!v.compatible);
    }

    #[test]
    fn sharp_measurement_with_dephasing_returns_instrument() {
        let m = z_povm();
        let ch = ChoiMatrix::dephasing(2).unwrap();
        let v = check_pair(&m, &ch, &opts()).unwrap();
        assert!(v.compatible);
        let Some(JointObject::Instrument(instr)) = &v.joint else { panic!("no instrument") };
        let povm = instrument_povm(instr).unwrap();
        for (a, b) in povm.elements.iter().zip(&m.elements) {
            assert!(max_abs(&(a - b)) <= 1e-7);
        }
        let total = instr.elements.iter().fold(matrix::zeros(4, 4), |acc, e| acc + e);
        assert!(max_abs(&(total - &ch.matrix)) <= 1e-7);
    }

    #[test]
    fn verdict_json_has_fields() {
        let ms = PovmCollection::new(vec![z_povm(), z_povm()]).unwrap();
        let v = check_measurements(&ms, &opts()).unwrap();
        let json: serde_json::Value = serde_json::from_str(&v.to_json()).unwrap();
        assert_eq!(json["compatible"], serde_json::Value::Bool(true));
        assert!(json["margin"].is_number());
        assert_eq!(json["joint"]["type"], "parent");
    }

    #[test]
    fn too_many_members_rejected() {
        let id = ChoiMatrix::identity(2).unwrap();
        let chs = vec![id; 5];
        assert!(matches!(check_channels(&chs, &opts()), Err(Error::Domain(_))));
    }

    #[test]
    fn measurement_and_qc_channel_checks_agree() {
        for t in 0..20 {
            let mut rng = seeded_rng(trial_seed(40, t));
            let ms = PovmCollection::new(vec![random_povm(&mut rng, 2, 2), random_povm(&mut rng, 2, 2)]).unwrap();
            let chs: Vec<ChoiMatrix> = ms.povms.iter().map(|m| qc_channel(m).unwrap()).collect();
            let a = check_measurements(&ms, &opts()).unwrap();
            let b = check_channels(&chs, &opts()).unwrap();
            assert_eq!(a.compatible, b.compatible, "trial {t}: margins {} and {}", a.margin, b.margin);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]

        #[test]
        fn mixing_compatible_collections_stays_compatible(seed in 0u64..1000, w in 0.0f64..1.0) {
            // Both collections have a constant-channel member, hence are compatible.
            let mut rng = seeded_rng(seed);
            let rho = crate::random::random_density_matrix(&mut rng, 2);
            let a = vec![random_channel(&mut rng, 2, 2), ChoiMatrix::constant(2, &rho).unwrap()];
            let b = vec![ChoiMatrix::constant(2, &rho).unwrap(), random_channel(&mut rng, 2, 2)];
            let mixed: Vec<ChoiMatrix> = a
                .iter()
                .zip(&b)
                .map(|(p, q)| ChoiMatrix::new(2, 2, &p.matrix * c(w) + &q.matrix * c(1.0 - w)).unwrap())
                .collect();
            prop_assert!(check_channels(&a, &opts()).unwrap().compatible);
            prop_assert!(check_channels(&b, &opts()).unwrap().compatible);
            prop_assert!(check_channels(&mixed, &opts()).unwrap().compatible);
        }
    }

    #[test]
    fn cloning_joint_is_a_valid_joint_channel() {
        let clone = qobjects::cloning_channel(3).unwrap();
        let chs = vec![clone.marginal(0).unwrap(), clone.marginal(1).unwrap()];
        let v = check_channels(&chs, &opts()).unwrap();
        assert!(v.compatible, "margin {}", v.margin);
        assert_joint_channel_reproduces(&chs, &v);
    }
}
