//! Unitary downfolding of second-quantized molecular Hamiltonians.
//!
//! The crate turns a molecular Hamiltonian (read from an FCIDUMP file) into a
//! small effective Hamiltonian over a set of active orbitals. The transformation
//! is a flow-regularized unitary similarity transformation driven by cluster
//! amplitudes, with every nested commutator truncated to one- and two-body
//! normal-ordered components. Reference information enters only through reduced
//! density cumulants, which may be truncated to their diagonal parts or
//! perturbed by synthetic measurement noise. A two-configuration active space
//! can additionally be mapped to a single qubit and solved with a simulated
//! variational eigensolver.
//!
//! The pipeline, end to end:
//!
//! 1. [`fcidump`] — parse integrals, expand to spin orbitals, fold frozen
//!    orbitals, partition the orbital space.
//! 2. [`fockspace`] — exact diagonalization in small determinant spaces:
//!    reference preparation, density matrices, and brute-force oracles.
//! 3. [`cumulants`] — density cumulants, truncation schemes, three-body
//!    reconstruction, and Gaussian measurement noise.
//! 4. [`dsrg`] — the downfolding engine: Fock build, semicanonical orbitals,
//!    regularized amplitudes, truncated commutators, and the flow solver.
//! 5. [`onequbit`] — two-configuration one-qubit mapping, analytic tomography,
//!    shot-noise simulation, and the one-parameter eigensolver.
//! 6. [`driver`] — configuration, pipeline orchestration, noise sweeps,
//!    geometry scans, and JSON reports.
//!
//! See the `book/` directory for a guided tour with runnable examples.

pub mod cumulants;
pub mod driver;
pub mod dsrg;
mod error;
pub mod fcidump;
pub mod fockspace;
pub mod onequbit;
pub(crate) mod tensor;

pub use error::{Error, Result};
pub use fcidump::{IntegralSet, OrbitalSpace, SpatialIntegrals};

#[cfg(doctest)]
mod booktests {
    //! Keeps the book's code fences compiling; `cargo test --doc` runs them.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }
    chapter!(integrals, "../../../book/src/integrals.md");
    chapter!(reference, "../../../book/src/reference.md");
    chapter!(cumulants, "../../../book/src/cumulants.md");
    chapter!(flow, "../../../book/src/flow.md");
    chapter!(noise, "../../../book/src/noise.md");
    chapter!(onequbit, "../../../book/src/onequbit.md");
    chapter!(pipeline, "../../../book/src/pipeline.md");
}
