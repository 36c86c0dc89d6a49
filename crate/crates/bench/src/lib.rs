//! Fixed inputs shared by the benchmarks.

use qincompat_core::matrix;
use qincompat_core::random::{random_channel, seeded_rng};
use qincompat_core::{ChoiMatrix, Povm, PovmCollection};

pub fn identity_pair(d: usize) -> Vec<ChoiMatrix> {
    let id = ChoiMatrix::identity(d).expect("identity channel");
    vec![id.clone(), id]
}

pub fn random_channel_pair(d: usize, seed: u64) -> Vec<ChoiMatrix> {
    let mut rng = seeded_rng(seed);
    vec![random_channel(&mut rng, d, d), random_channel(&mut rng, d, d)]
}

/// Eigenbases of σ_z and σ_x.
pub fn qubit_mubs() -> PovmCollection {
    let (_, v) = matrix::eig_hermitian(&matrix::pauli_x()).expect("Hermitian");
    let x = Povm::from_basis(&v).expect("unitary basis");
    PovmCollection::new(vec![Povm::computational(2), x]).expect("same dimension")
}
