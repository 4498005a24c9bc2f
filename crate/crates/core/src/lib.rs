//! Zeroth-order optimization driven by oblivious sketching.
//!
//! The crate is organised bottom-up:
//!
//! * [`numeric`] and [`rng`]: Walsh–Hadamard transform, random orthogonal
//!   factors, power iteration and reproducible random streams.
//! * [`sketch`]: Gaussian, Rademacher, SRHT and sparse-embedding sketches.
//! * [`oracle`]: quadratic and logistic objectives behind a query-counting,
//!   optionally noisy function-value oracle.
//! * [`estimator`]: sketched and full finite-difference gradients, the
//!   preconditioned direction and the second-difference trace estimate.
//! * [`optimizer`]: the sketched descent loop, its Hessian-aware variant and
//!   the coordinate finite-difference baseline.

pub mod error;
pub mod estimator;
pub mod numeric;
pub mod optimizer;
pub mod oracle;
pub mod rng;
pub mod sketch;

pub use error::{Error, Result};
pub use numeric::DenseVector;
pub use rng::RngStream;
