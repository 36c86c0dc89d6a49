//! States, measurements and channels.
//!
//! Channels are stored as normalised Choi matrices
//! `J = (Λ ⊗ id)(|Ψ+⟩⟨Ψ+|)` on `K ⊗ H`, so `Tr J = 1` and `Tr_K J = I/d`.
//! Transposes are taken in the computational basis throughout.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, ComplexMatrix, TensorShape, PSD_TOL};

/// Tolerance for trace and marginal conditions of quantum objects.
pub const VALIDITY_TOL: f64 = 1e-9;

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn require_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {d}")));
    }
    Ok(())
}

fn require_square(m: &ComplexMatrix, dim: usize, what: &str) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::Dimension(format!(
            "{what} is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

fn require_psd(m: &ComplexMatrix, what: &str) -> Result<()> {
    if !matrix::is_psd(m, PSD_TOL) {
        return Err(Error::Contract(format!(
            "{what} is not positive semidefinite (min eigenvalue {:e})",
            matrix::min_eigenvalue(m)
        )));
    }
    Ok(())
}

fn require_close(a: &ComplexMatrix, b: &ComplexMatrix, what: &str) -> Result<()> {
    let err = matrix::max_abs(&(a - b));
    if err > VALIDITY_TOL {
        return Err(Error::Contract(format!("{what} violated by {err:e}")));
    }
    Ok(())
}

/// `|Ψ+⟩⟨Ψ+|` with `|Ψ+⟩ = d^{-1/2} Σ_i |ii⟩`.
pub fn max_entangled_state(d: usize) -> Result<ComplexMatrix> {
    require_dim(d)?;
    Ok(max_entangled_unchecked(d))
}

fn max_entangled_unchecked(d: usize) -> ComplexMatrix {
    let mut psi = DVector::zeros(d * d);
    for i in 0..d {
        psi[i * d + i] = c(1.0 / (d as f64).sqrt());
    }
    matrix::projector(&psi)
}

/// `Σ_k (K_k ⊗ I)|Ψ+⟩⟨Ψ+|(K_k ⊗ I)†` without any validity check.
///
/// Works for trace-non-increasing Kraus sets (instrument elements).
pub fn choi_sum(kraus: &[ComplexMatrix]) -> ComplexMatrix {
    let (d_out, d_in) = kraus.first().map(|k| k.shape()).unwrap_or((0, 0));
    let scale = 1.0 / (d_in as f64).sqrt();
    let mut j = matrix::zeros(d_out * d_in, d_out * d_in);
    for k in kraus {
        let v = DVector::from_fn(d_out * d_in, |idx, _| k[(idx / d_in, idx % d_in)] * scale);
        j += &v * v.adjoint();
    }
    j
}

/// Checks that `m` is a normalised Choi matrix of a channel `d_in → d_out`.
fn validate_choi(d_in: usize, d_out: usize, m: &ComplexMatrix) -> Result<()> {
    require_square(m, d_in * d_out, "Choi matrix")?;
    require_psd(m, "Choi matrix")?;
    let marginal = matrix::partial_trace(m, &TensorShape::new(vec![d_out, d_in]), &[1])?;
    require_close(&marginal, &(matrix::identity(d_in) * c(1.0 / d_in as f64)), "Tr_K J = I/d")
}

/// Normalised Choi matrix of a channel `H → K` (order `K ⊗ H`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ChannelJson", into = "ChoiJson")]
pub struct ChoiMatrix {
    pub dim_in: usize,
    pub dim_out: usize,
    pub matrix: ComplexMatrix,
}

impl ChoiMatrix {
    pub fn new(dim_in: usize, dim_out: usize, matrix: ComplexMatrix) -> Result<Self> {
        validate_choi(dim_in, dim_out, &matrix)?;
        Ok(Self { dim_in, dim_out, matrix })
    }

    /// Choi matrix of the channel `ρ ↦ Σ_k K_k ρ K_k†`.
    pub fn from_kraus(kraus: &[ComplexMatrix]) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::Contract("empty Kraus list".into()))?;
        let (d_out, d_in) = first.shape();
        let mut completeness = matrix::zeros(d_in, d_in);
        for k in kraus {
            if k.shape() != (d_out, d_in) {
                return Err(Error::Dimension("Kraus operators differ in shape".into()));
            }
            completeness += k.adjoint() * k;
        }
        require_close(&completeness, &matrix::identity(d_in), "Σ K†K = I")?;
        Self::new(d_in, d_out, choi_sum(kraus))
    }

    pub fn identity(d: usize) -> Result<Self> {
        Ok(Self { dim_in: d, dim_out: d, matrix: max_entangled_state(d)? })
    }

    /// `ρ ↦ c ρ + (1 - c) I/d`, valid for `-1/(d²-1) ≤ c ≤ 1`.
    pub fn depolarizing(d: usize, visibility: f64) -> Result<Self> {
        let m = max_entangled_state(d)? * c(visibility)
            + matrix::identity(d * d) * c((1.0 - visibility) / (d * d) as f64);
        Self::new(d, d, m)
    }

    /// `ρ ↦ σ` for a fixed output state `σ`.
    pub fn constant(d_in: usize, state: &ComplexMatrix) -> Result<Self> {
        let m = matrix::kron(state, &(matrix::identity(d_in) * c(1.0 / d_in as f64)));
        Self::new(d_in, state.nrows(), m)
    }

    /// Completely dephasing channel in the computational basis.
    pub fn dephasing(d: usize) -> Result<Self> {
        let kraus: Vec<ComplexMatrix> =
            (0..d).map(|i| matrix::projector(&matrix::ket(d, i))).collect();
        Self::from_kraus(&kraus)
    }

    pub fn shape(&self) -> TensorShape {
        TensorShape::new(vec![self.dim_out, self.dim_in])
    }

    /// `Λ(ρ) = d · Tr_H[J (I ⊗ ρᵀ)]`.
    pub fn apply(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        apply_channel(self, rho)
    }

    /// Heisenberg picture `Λ*(E)`, characterised by `Tr[Λ(ρ)E] = Tr[ρ Λ*(E)]`.
    pub fn apply_adjoint(&self, effect: &ComplexMatrix) -> Result<ComplexMatrix> {
        require_square(effect, self.dim_out, "effect")?;
        let (d, k) = (self.dim_in, self.dim_out);
        let mut out = matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for a in 0..k {
                    for b in 0..k {
                        acc += self.matrix[(a * d + i, b * d + j)] * effect[(b, a)];
                    }
                }
                out[(j, i)] = acc * c(d as f64);
            }
        }
        Ok(out)
    }

    /// Embeds the output isometrically into the first `dim_out` basis states
    /// of a `new_dim`-dimensional space.
    pub fn pad_output(&self, new_dim: usize) -> Result<Self> {
        if new_dim < self.dim_out {
            return Err(Error::Dimension(format!(
                "cannot pad output dimension {} down to {new_dim}",
                self.dim_out
            )));
        }
        // K is the outer factor, so the old indices are a prefix of the new ones.
        let d = self.dim_in;
        let old = self.dim_out * d;
        let mut m = matrix::zeros(new_dim * d, new_dim * d);
        m.view_mut((0, 0), (old, old)).copy_from(&self.matrix);
        Ok(Self { dim_in: d, dim_out: new_dim, matrix: m })
    }
}

/// Wire format for channels: either a Choi matrix or a Kraus list.
#[derive(Deserialize)]
#[serde(untagged)]
enum ChannelJson {
    Choi {
        dim_in: usize,
        dim_out: usize,
        #[serde(with = "matrix::json")]
        choi: ComplexMatrix,
    },
    Kraus {
        #[serde(with = "matrix::json::vec")]
        kraus: Vec<ComplexMatrix>,
    },
}

#[derive(Serialize)]
struct ChoiJson {
    dim_in: usize,
    dim_out: usize,
    #[serde(with = "matrix::json")]
    choi: ComplexMatrix,
}

impl From<ChoiMatrix> for ChoiJson {
    fn from(ch: ChoiMatrix) -> Self {
        Self { dim_in: ch.dim_in, dim_out: ch.dim_out, choi: ch.matrix }
    }
}

impl TryFrom<ChannelJson> for ChoiMatrix {
    type Error = Error;

    fn try_from(j: ChannelJson) -> Result<Self> {
        match j {
            ChannelJson::Choi { dim_in, dim_out, choi } => ChoiMatrix::new(dim_in, dim_out, choi),
            ChannelJson::Kraus { kraus } => ChoiMatrix::from_kraus(&kraus),
        }
    }
}

/// Choi matrix of `ρ ↦ Σ K ρ K†`.
pub fn choi_from_kraus(kraus: &[ComplexMatrix]) -> Result<ChoiMatrix> {
    ChoiMatrix::from_kraus(kraus)
}

/// `Λ(ρ) = d · Tr_H[J (I_K ⊗ ρᵀ)]`.
pub fn apply_channel(choi: &ChoiMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (d, k) = (choi.dim_in, choi.dim_out);
    require_square(rho, d, "input state")?;
    let mut out = matrix::zeros(k, k);
    for a in 0..k {
        for b in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..d {
                for j in 0..d {
                    acc += choi.matrix[(a * d + i, b * d + j)] * rho[(i, j)];
                }
            }
            out[(a, b)] = acc * c(d as f64);
        }
    }
    Ok(out)
}

/// `(Λ ⊗ id)(ρ)` for `ρ` on `H ⊗ A`; the ancilla dimension is inferred.
pub fn apply_channel_extended(choi: &ChoiMatrix, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (d, k) = (choi.dim_in, choi.dim_out);
    if rho.nrows() != rho.ncols() || !rho.nrows().is_multiple_of(d) {
        return Err(Error::Dimension(format!(
            "state of dimension {} is not on H ⊗ A with dim H = {d}",
            rho.nrows()
        )));
    }
    let anc = rho.nrows() / d;
    let mut out = matrix::zeros(k * anc, k * anc);
    // (Λ⊗id)(ρ) = Σ_{ij} Λ(|i⟩⟨j|) ⊗ ρ_ij with Λ(|i⟩⟨j|)_{ab} = d J[(a,i),(b,j)].
    for i in 0..d {
        for j in 0..d {
            for a in 0..k {
                for b in 0..k {
                    let lam = choi.matrix[(a * d + i, b * d + j)] * c(d as f64);
                    if lam == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for s in 0..anc {
                        for t in 0..anc {
                            out[(a * anc + s, b * anc + t)] += lam * rho[(i * anc + s, j * anc + t)];
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// A POVM `{M_i}` on `C^dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PovmJson", into = "PovmJson")]
pub struct Povm {
    pub dim: usize,
    pub elements: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct PovmJson {
    dim: usize,
    #[serde(with = "matrix::json::vec")]
    elements: Vec<ComplexMatrix>,
}

impl TryFrom<PovmJson> for Povm {
    type Error = Error;
    fn try_from(j: PovmJson) -> Result<Self> {
        Povm::new(j.dim, j.elements)
    }
}

impl From<Povm> for PovmJson {
    fn from(p: Povm) -> Self {
        Self { dim: p.dim, elements: p.elements }
    }
}

impl Povm {
    pub fn new(dim: usize, elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Contract("POVM needs at least one outcome".into()));
        }
        let mut total = matrix::zeros(dim, dim);
        for (i, m) in elements.iter().enumerate() {
            require_square(m, dim, "POVM element")?;
            require_psd(m, &format!("POVM element {i}"))?;
            total += m;
        }
        require_close(&total, &matrix::identity(dim), "Σ M_i = I")?;
        Ok(Self { dim, elements })
    }

    /// Projective measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        let elements = (0..d).map(|i| matrix::projector(&matrix::ket(d, i))).collect();
        Self { dim: d, elements }
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(u: &ComplexMatrix) -> Result<Self> {
        let d = u.nrows();
        let elements = (0..u.ncols())
            .map(|i| matrix::projector(&u.column(i).into_owned()))
            .collect();
        Self::new(d, elements)
    }

    /// `{p(i) I}`: the outcome ignores the state.
    pub fn trivial(d: usize, probabilities: &[f64]) -> Result<Self> {
        Self::new(d, probabilities.iter().map(|&p| matrix::identity(d) * c(p)).collect())
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    /// `{v M_i + (1 - v) Tr[M_i] I/d}`.
    pub fn depolarized(&self, visibility: f64) -> Result<Self> {
        let d = self.dim as f64;
        let elements = self
            .elements
            .iter()
            .map(|m| m * c(visibility) + matrix::identity(self.dim) * c((1.0 - visibility) * m.trace().re / d))
            .collect();
        Self::new(self.dim, elements)
    }

    /// Born probabilities `Tr[ρ M_i]`.
    pub fn probabilities(&self, rho: &ComplexMatrix) -> Vec<f64> {
        self.elements.iter().map(|m| matrix::trace_product_re(rho, m)).collect()
    }
}

/// `n` POVMs sharing dimension and outcome count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Povm>", into = "Vec<Povm>")]
pub struct PovmCollection {
    pub povms: Vec<Povm>,
}

impl TryFrom<Vec<Povm>> for PovmCollection {
    type Error = Error;
    fn try_from(v: Vec<Povm>) -> Result<Self> {
        PovmCollection::new(v)
    }
}

impl From<PovmCollection> for Vec<Povm> {
    fn from(c: PovmCollection) -> Self {
        c.povms
    }
}

impl PovmCollection {
    pub fn new(povms: Vec<Povm>) -> Result<Self> {
        let first = povms
            .first()
            .ok_or_else(|| Error::Contract("empty measurement collection".into()))?;
        let (dim, o) = (first.dim, first.outcomes());
        if povms.iter().any(|p| p.dim != dim || p.outcomes() != o) {
            return Err(Error::Dimension(
                "all measurements must share dimension and outcome count".into(),
            ));
        }
        Ok(Self { povms })
    }

    pub fn len(&self) -> usize {
        self.povms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.povms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.povms[0].dim
    }

    pub fn outcomes(&self) -> usize {
        self.povms[0].outcomes()
    }
}

/// Quantum-to-classical channel `ρ ↦ Σ_i Tr[ρ M_i] |i⟩⟨i|`.
///
/// Its Choi matrix is `(1/d) Σ_i |i⟩⟨i| ⊗ M_iᵀ`.
pub fn qc_channel(povm: &Povm) -> Result<ChoiMatrix> {
    let (d, o) = (povm.dim, povm.outcomes());
    let mut m = matrix::zeros(o * d, o * d);
    for (i, e) in povm.elements.iter().enumerate() {
        let block = e.transpose() * c(1.0 / d as f64);
        m.view_mut((i * d, i * d), (d, d)).copy_from(&block);
    }
    ChoiMatrix::new(d, o, m)
}

/// Projector onto the symmetric subspace of `C^d ⊗ C^d`, `(I + SWAP)/2`.
pub fn symmetric_projector(d: usize) -> Result<ComplexMatrix> {
    require_dim(d)?;
    let mut s = matrix::identity(d * d) * c(0.5);
    for i in 0..d {
        for j in 0..d {
            s[(i * d + j, j * d + i)] += c(0.5);
        }
    }
    Ok(s)
}

/// A channel `H → K^{⊗n}` with identical output factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointChannel {
    pub dim_in: usize,
    pub dim_out_each: usize,
    pub n: usize,
    #[serde(with = "matrix::json")]
    pub choi: ComplexMatrix,
}

impl JointChannel {
    pub fn new(dim_in: usize, dim_out_each: usize, n: usize, choi: ComplexMatrix) -> Result<Self> {
        validate_choi(dim_in, dim_out_each.pow(n as u32), &choi)?;
        Ok(Self { dim_in, dim_out_each, n, choi })
    }

    pub fn shape(&self) -> TensorShape {
        joint_shape(self.dim_in, self.dim_out_each, self.n)
    }

    /// Marginal channel on output factor `x` (0-based).
    pub fn marginal(&self, x: usize) -> Result<ChoiMatrix> {
        marginal(self, x)
    }
}

/// Shape `[d', …, d', d]` of `K^{⊗n} ⊗ H`.
pub fn joint_shape(dim_in: usize, dim_out: usize, n: usize) -> TensorShape {
    let mut dims = vec![dim_out; n];
    dims.push(dim_in);
    TensorShape::new(dims)
}

/// `Λ_x = Tr_{K̄_x}[Λ(·)]`, keeping output factor `x` (0-based) and the input.
pub fn marginal(joint: &JointChannel, x: usize) -> Result<ChoiMatrix> {
    if x >= joint.n {
        return Err(Error::Domain(format!("marginal index {x} out of range for n = {}", joint.n)));
    }
    let m = matrix::partial_trace(&joint.choi, &joint.shape(), &[x, joint.n])?;
    ChoiMatrix::new(joint.dim_in, joint.dim_out_each, m)
}

/// Optimal 1→2 cloner `ρ ↦ (2/(d+1)) S(ρ ⊗ I)S`.
pub fn cloning_channel(d: usize) -> Result<JointChannel> {
    let s = symmetric_projector(d)?;
    let scale = 2.0 / (d as f64 + 1.0);
    let mut choi = matrix::zeros(d * d * d, d * d * d);
    for i in 0..d {
        for j in 0..d {
            let unit = matrix::kron(&matrix::matrix_unit(d, i, j), &matrix::identity(d));
            let out = &s * unit * &s * c(scale / d as f64);
            choi += matrix::kron(&out, &matrix::matrix_unit(d, i, j));
        }
    }
    JointChannel::new(d, d, 2, choi)
}

/// Visibility `c(d) = (d+2)/(2(d+1))` of the cloner's marginals.
pub fn cloning_visibility(d: usize) -> f64 {
    let d = d as f64;
    (d + 2.0) / (2.0 * (d + 1.0))
}

/// Instrument `{ℐ_i}` given by the Choi matrices of its elements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstrumentJson", into = "InstrumentJson")]
pub struct Instrument {
    pub dim_in: usize,
    pub dim_out: usize,
    pub elements: Vec<ComplexMatrix>,
}

#[derive(Serialize, Deserialize)]
struct InstrumentJson {
    dim_in: usize,
    dim_out: usize,
    #[serde(with = "matrix::json::vec")]
    elements: Vec<ComplexMatrix>,
}

impl TryFrom<InstrumentJson> for Instrument {
    type Error = Error;
    fn try_from(j: InstrumentJson) -> Result<Self> {
        Instrument::new(j.dim_in, j.dim_out, j.elements)
    }
}

impl From<Instrument> for InstrumentJson {
    fn from(i: Instrument) -> Self {
        Self { dim_in: i.dim_in, dim_out: i.dim_out, elements: i.elements }
    }
}

impl Instrument {
    pub fn new(dim_in: usize, dim_out: usize, elements: Vec<ComplexMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Contract("instrument needs at least one outcome".into()));
        }
        let n = dim_in * dim_out;
        let mut total = matrix::zeros(n, n);
        for (i, e) in elements.iter().enumerate() {
            require_square(e, n, "instrument element")?;
            require_psd(e, &format!("instrument element {i}"))?;
            total += e;
        }
        validate_choi(dim_in, dim_out, &total)?;
        Ok(Self { dim_in, dim_out, elements })
    }

    /// Lüders instrument `ℐ_i(ρ) = √M_i ρ √M_i`.
    pub fn luders(povm: &Povm) -> Result<Self> {
        let elements = povm
            .elements
            .iter()
            .map(|m| {
                let (vals, vecs) = matrix::eig_hermitian(m)?;
                let sqrt = DVector::from_iterator(vals.len(), vals.iter().map(|&v| c(v.max(0.0).sqrt())));
                let root = &vecs * ComplexMatrix::from_diagonal(&sqrt) * vecs.adjoint();
                Ok(choi_sum(&[root]))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(povm.dim, povm.dim, elements)
    }

    pub fn shape(&self) -> TensorShape {
        TensorShape::new(vec![self.dim_out, self.dim_in])
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    /// `ℐ_i(ρ)` (unnormalised).
    pub fn apply_element(&self, i: usize, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let el = ChoiMatrix { dim_in: self.dim_in, dim_out: self.dim_out, matrix: self.elements[i].clone() };
        apply_channel(&el, rho)
    }
}

/// Induced POVM `M_i = ℐ_i*(1) = d (Tr_K J_i)ᵀ`.
pub fn instrument_povm(instr: &Instrument) -> Result<Povm> {
    let d = instr.dim_in as f64;
    let elements = instr
        .elements
        .iter()
        .map(|e| Ok(matrix::partial_trace(e, &instr.shape(), &[1])?.transpose() * c(d)))
        .collect::<Result<Vec<_>>>()?;
    Povm::new(instr.dim_in, elements)
}

/// Total channel `Σ_i ℐ_i`.
pub fn instrument_total(instr: &Instrument) -> Result<ChoiMatrix> {
    let total = instr.elements.iter().fold(
        matrix::zeros(instr.dim_in * instr.dim_out, instr.dim_in * instr.dim_out),
        |acc, e| acc + e,
    );
    ChoiMatrix::new(instr.dim_in, instr.dim_out, total)
}
