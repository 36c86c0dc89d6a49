//! Robustness of quantum incompatibility.
//!
//! This crate computes how incompatible a collection of quantum channels, a
//! collection of measurements, or a measurement–channel pair is, measured by
//! the robustness (the least admixture of noise that makes the collection
//! compatible). Every robustness value comes with a dual witness, and the
//! witness can be turned into a state-discrimination game whose advantage
//! ratio over all compatible strategies equals `1 + robustness`.
//!
//! Layout:
//!
//! * [`matrix`] – dense complex linear algebra on tensor-product spaces.
//! * [`qobjects`] – states, POVMs, Choi matrices, instruments, joint channels.
//! * [`sdp`] – a primal–dual interior-point solver for Hermitian SDPs.
//! * [`compat`] – compatibility tests returning joint objects.
//! * [`robustness`] – robustness programs, their duals and witnesses.
//! * [`games`] – discrimination games and advantage ratios.
//! * [`random`] – seeded samplers for states, POVMs, channels and instruments.
//!
//! Tensor factors are always ordered outputs first: `K_1 ⊗ … ⊗ K_n ⊗ H`.
//! Choi matrices are normalised to unit trace, so `Tr_K J = I/d`.

pub mod compat;
pub mod error;
pub mod games;
pub mod matrix;
pub mod qobjects;
pub mod random;
pub mod robustness;
pub mod sdp;

pub use compat::{CompatibilityVerdict, JointObject};
pub use error::{Error, Result};
pub use games::{DiscriminationGame, Ensemble, Strategy};
pub use matrix::{ComplexMatrix, TensorShape};
pub use num_complex::Complex64;
pub use qobjects::{ChoiMatrix, Instrument, JointChannel, Povm, PovmCollection};
pub use robustness::{RobustnessKind, RobustnessReport, WitnessSet};
pub use sdp::{SdpProblem, SdpSolution, SolverOptions, SolverStatus};
