//! Numerical evaluation of the second-order (in volume fraction) correction to the
//! effective viscosity of a dilute suspension of rigid spheres in a Stokes fluid.
//!
//! The library provides:
//! - the singular pair interaction kernel and the point-stresslet solution it derives from,
//! - the finite-N interaction functional `V_N` with its mean-field background term,
//! - Ewald-summed periodic stresslet Green functions and the exact periodic limit,
//! - Monte-Carlo estimation of the limit for stationary hard-core point processes,
//! - the renormalised-energy identities (surface distributions, stress cut-offs).

pub mod domain;
pub mod error;
pub mod ewald;
pub mod kernels;
pub mod points;
pub mod processes;
pub mod quad;
pub mod randlimit;
pub mod renorm;
pub mod tensor;
pub mod vn;

pub use error::{Error, Result};

/// Caps the global worker pool at `n` threads. Must be called before any
/// parallel work; later calls fail harmlessly. No-op in sequential builds.
#[cfg(feature = "parallel")]
pub fn set_thread_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("thread count must be positive"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::validation(format!("thread pool: {e}")))
}

/// Sequential build: thread count is always 1.
#[cfg(not(feature = "parallel"))]
pub fn set_thread_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::validation("thread count must be positive"));
    }
    Ok(())
}
