//! Inertial nonconvex ADMM for total-variation image deblurring.
//!
//! The image `ũ` is duplicated into `u = (u₁, u₂)` so that the difference
//! operator `T` becomes injective on the edge space. The solvers then run on
//! `min ½‖Ku − f‖² + σ‖Tu‖_φ` with `φ(t) = |t|^q`.

pub mod error;
pub mod image;
pub mod linsolve;
pub mod metrics;
pub mod operators;
pub mod prox;
pub mod solvers;
pub mod vecops;

pub use error::{Error, Result};
pub use image::{degrade, make_phantom, read_pgm, write_pgm, DegradationSpec, Image, PhantomKind};
pub use metrics::{StopDecision, StopReason};
pub use operators::{BlurOperator, DiffOperator, DiffVariant, StackedOperator};
pub use solvers::{run, IterTrace, Method, RunOutput, SolverConfig, TheoryConstants};
