//! Seeded samplers for the randomized suites.
//!
//! Everything is driven by a `ChaCha8Rng`, so a seed fixes every sample on
//! every platform.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::{self, ComplexMatrix, TensorShape};
use crate::qobjects::{ChoiMatrix, Instrument, JointChannel, Povm};

pub type SeededRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed for trial `trial` of a suite started from `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    // splitmix64 step
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(trial + 1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian(rng: &mut impl Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im)
}

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn ginibre(rng: &mut impl Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| gaussian(rng))
}

/// Haar-distributed unitary.
pub fn haar_unitary(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let qr = ginibre(rng, d, d).qr();
    let (q, r) = qr.unpack();
    let phases = DVector::from_iterator(
        d,
        (0..d).map(|i| {
            let z = r[(i, i)];
            if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) }
        }),
    );
    q * ComplexMatrix::from_diagonal(&phases)
}

/// Haar-random isometry `C^d_in → C^d_out` (`d_out ≥ d_in`).
pub fn haar_isometry(rng: &mut impl Rng, d_in: usize, d_out: usize) -> ComplexMatrix {
    assert!(d_out >= d_in, "isometry needs d_out >= d_in");
    haar_unitary(rng, d_out).columns(0, d_in).into_owned()
}

pub fn random_pure_state(rng: &mut impl Rng, d: usize) -> DVector<Complex64> {
    haar_unitary(rng, d).column(0).into_owned()
}

/// Reduced state of a Haar-random pure state on `C^d ⊗ C^d`.
pub fn random_density_matrix(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let psi = random_pure_state(rng, d * d);
    matrix::partial_trace(&matrix::projector(&psi), &TensorShape::new(vec![d, d]), &[0])
        .expect("shape is consistent by construction")
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    matrix::hermitian_part(&ginibre(rng, d, d))
}

pub fn random_psd(rng: &mut impl Rng, d: usize) -> ComplexMatrix {
    let g = ginibre(rng, d, d);
    &g * g.adjoint()
}

/// Probability vector of length `n`, roughly uniform on the simplex.
pub fn random_distribution(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Rank-one projective measurement in the eigenbasis of a random Hermitian matrix.
pub fn random_projective_povm(rng: &mut impl Rng, d: usize) -> Povm {
    let (_, vecs) = matrix::eig_hermitian(&random_hermitian(rng, d)).expect("Hermitian by construction");
    let elements = (0..d)
        .map(|i| matrix::projector(&vecs.column(i).into_owned()))
        .collect();
    Povm::new(d, elements).expect("eigenprojectors form a POVM")
}

/// Generic `o`-outcome POVM from a random isometry `C^d → C^o ⊗ C^d`.
pub fn random_povm(rng: &mut impl Rng, d: usize, o: usize) -> Povm {
    let v = haar_isometry(rng, d, o * d);
    let elements = (0..o)
        .map(|i| {
            let block = v.rows(i * d, d).into_owned();
            block.adjoint() * block
        })
        .collect();
    Povm::new(d, elements).expect("isometry blocks form a POVM")
}

/// Kraus operators of a random channel `d_in → d_out` with `rank` operators.
pub fn random_kraus(rng: &mut impl Rng, d_in: usize, d_out: usize, rank: usize) -> Vec<ComplexMatrix> {
    let v = haar_isometry(rng, d_in, d_out * rank);
    (0..rank).map(|k| v.rows(k * d_out, d_out).into_owned()).collect()
}

pub fn random_channel(rng: &mut impl Rng, d_in: usize, d_out: usize) -> ChoiMatrix {
    let rank = d_in * d_out;
    ChoiMatrix::from_kraus(&random_kraus(rng, d_in, d_out, rank)).expect("isometry gives a channel")
}

/// Random channel `d_in → d_out^{⊗n}`.
pub fn random_joint_channel(rng: &mut impl Rng, d_in: usize, d_out: usize, n: usize) -> JointChannel {
    let big = random_channel(rng, d_in, d_out.pow(n as u32));
    JointChannel::new(d_in, d_out, n, big.matrix).expect("random channel is valid")
}

/// Random `o`-outcome instrument `d_in → d_out`.
pub fn random_instrument(rng: &mut impl Rng, d_in: usize, d_out: usize, o: usize) -> Instrument {
    let rank = d_in * d_out;
    let v = haar_isometry(rng, d_in, o * d_out * rank);
    let elements = (0..o)
        .map(|i| {
            let kraus: Vec<ComplexMatrix> = (0..rank)
                .map(|k| v.rows((i * rank + k) * d_out, d_out).into_owned())
                .collect();
            crate::qobjects::choi_sum(&kraus)
        })
        .collect();
    Instrument::new(d_in, d_out, elements).expect("isometry blocks form an instrument")
}
