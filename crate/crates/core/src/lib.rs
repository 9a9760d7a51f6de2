//! Statevector simulation of spin-filtering variational quantum deflation.
//!
//! The crate is organised bottom-up:
//!
//! - [`statevector`]: dense amplitudes, gates, circuits and measurement.
//! - [`pauli`]: real-weighted Pauli sums (Hamiltonians and spin observables).
//! - [`spinops`]: Jordan–Wigner spin operators and Wigner-d pass probabilities.
//! - [`ansatz`]: the particle-number (SP) and `S_z` (SSP) conserving circuits.
//! - [`screen`]: the ancilla phase-estimation spin screen and the extended
//!   Hamiltonian used for statevector filtering.
//! - [`optim`]: L-BFGS, Nelder–Mead and SPSA behind one budgeted interface.
//! - [`vqd`]: the deflation driver.
//! - [`oracle`]: exact dense diagonalization and sector labelling.
//! - [`hamio`]: Hamiltonian fixture files.
//!
//! Qubits are interleaved by spin: qubit `2i` is the α spin-orbital of spatial
//! orbital `i` and qubit `2i + 1` the β one. Qubit 0 is the most significant
//! bit of a basis-state index, and ancilla registers are appended after the
//! system qubits.

pub mod ansatz;
pub mod error;
pub mod hamio;
pub mod optim;
pub mod oracle;
pub mod pauli;
pub mod screen;
pub mod spinops;
pub mod statevector;
pub mod vqd;

pub use error::{Error, Result};
pub use num_complex::Complex64;
