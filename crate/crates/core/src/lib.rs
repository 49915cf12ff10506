//! Open quantum systems described by a non-Hermitian effective Hamiltonian.
//!
//! Eliminating the continuum from a Hermitian problem leaves an
//! energy-dependent, complex symmetric Hamiltonian on the discrete states,
//! `H_eff(E) = H_B + Σ_c V_c g_c(E) V_cᵀ`. Its complex eigenvalues carry the
//! positions and widths of the resonances; the same eigenpairs determine the
//! resonance part of the S-matrix and the time dependence of decay.
//!
//! - [`model`]: discrete system, channel self-energies, `H_eff(E)`.
//! - [`spectra`]: biorthogonal eigendecomposition, phase rigidity, fixed-point
//!   resonance energies, trajectories and exceptional points.
//! - [`scattering`]: resonance amplitudes, unitary S-matrix, line shapes.
//! - [`dynamics`]: populations and decay rates after a sudden excitation.
//! - [`oracle`]: brute-force references (direct propagation, discretized
//!   Hermitian full-space model).

pub mod dynamics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scattering;
pub mod spectra;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use model::{ChannelModel, CouplingMatrix, DiscreteSystem, EffectiveHamiltonian, OpenSystem};
pub use spectra::ResonanceState;
