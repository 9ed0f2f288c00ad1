//! Verification toolkit for fully nonlinear conformally invariant elliptic
//! operators of the form `f(lambda(A^u)) = 1`, where `A^u` is the conformal
//! Hessian of a positive field `u` on `R^n` (`n >= 3`).
//!
//! The crate evaluates the operator on exact analytic fields and on
//! grid-sampled fields, certifies sub-/super-/solution status pointwise and
//! in the almost-everywhere sense, provides the sup-/inf-convolution and
//! concave-envelope machinery used by comparison-principle arguments, runs
//! the strict-super-solution deformation and Hopf-quotient experiments, and
//! classifies entire solutions through the moving-sphere procedure
//! (constant vs. standard bubble).
//!
//! Modules:
//! - [`symfun`]: small dense symmetric eigensolver, elementary symmetric
//!   functions, Garding cones, operator evaluation `f(lambda)`.
//! - [`mobius`]: Mobius maps, their exact second-order jets, Kelvin
//!   transforms, conformal-invariance checks.
//! - [`fields`]: analytic field families with exact jets, grid fields with
//!   finite-difference jets, serialization.
//! - [`conformal`]: the conformal Hessian in `u`- and `psi`-form and the
//!   sub/super/solution classifier.
//! - [`viscosity`]: sup-/inf-convolution, semiconvexity certificates,
//!   concave envelopes with contact sets, C^{1,1} a.e.-equivalence checks.
//! - [`comparison`]: contact detection, the strict super/sub-solution
//!   deformation harness, and the Hopf boundary quotient.
//! - [`movingsphere`]: critical radii, asymptotic constants, and the
//!   Liouville classification.
//! - [`report`]: CSV/JSON/SVG artifact emission.

pub mod comparison;
pub mod conformal;
pub mod error;
pub mod fields;
pub mod fit;
pub mod mobius;
pub mod movingsphere;
pub mod report;
pub mod symfun;
pub(crate) mod util;
pub mod viscosity;

pub use error::Error;

use std::sync::atomic::{AtomicUsize, Ordering};

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Set the number of worker threads used by the embarrassingly parallel
/// sweeps (pointwise classification, sphere-comparison sampling). Results
/// are deterministic for any thread count: work is split into contiguous
/// chunks and recombined in index order.
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub(crate) fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}
