//! Correctors, effective tensors, and convergence-rate verification for
//! higher-order parabolic operators with space-time periodic coefficients.
//!
//! The library works with operators of the form
//!
//! ```text
//! ∂_t u_ε + (−1)^m Σ_{|α|=|β|=m} D^α( A^{αβ}(x/ε, t/ε^{2m}) D^β u_ε ) = f
//! ```
//!
//! where the n×n coefficient blocks `A^{αβ}` are 1-periodic in space and time
//! and elliptic. It provides, end to end:
//!
//! * spectral solution of the periodic corrector cell problems on the unit
//!   cell (including adjoint and time-reversed variants) — [`cell`],
//! * the homogenized (effective) tensor by both the direct and the dual
//!   formula, with ellipticity certification — [`effective`],
//! * the oscillation tensor, its antisymmetrized potential (flux correctors),
//!   and the temporal primitives used by higher-order expansion layers —
//!   [`flux`],
//! * parabolic-scaled smoothing operators and boundary cutoffs — [`smoothing`],
//! * finite-element solvers for the fine-scale, homogenized, and adjoint
//!   initial-boundary problems on cylinders — [`pde`],
//! * corrected two-scale expansions and their error functionals — [`expansion`],
//! * an experiment harness that sweeps ε, fits log-log convergence rates, and
//!   writes CSV/JSON reports — [`harness`].
//!
//! # Runnable examples
//!
//! Each major capability has a self-contained example:
//!
//! ```bash
//! cargo run --release --example validate_coefficients
//! cargo run --release --example correctors
//! cargo run --release --example effective_tensor
//! cargo run --release --example flux_identities
//! cargo run --release --example smoothing_and_cutoffs
//! cargo run --release --example solve_parabolic
//! cargo run --release --example two_scale_expansion
//! cargo run --release --example rate_sweep
//! cargo run --release --example adjoint_expansion
//! ```
//!
//! The same functionality is scriptable through the thin `parahom` binary
//! (`validate`, `correctors`, `effective`, `flux`, `solve`, `expand`, `rates`
//! subcommands); see the README.

pub mod cell;
pub mod effective;
pub mod error;
pub mod flux;
pub mod fourier;
pub mod linalg;
pub mod tensor;
pub mod tol;

pub use error::{Error, Result};
