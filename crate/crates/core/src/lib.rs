//! Stabilized continuous finite elements for 2D linear acoustics on
//! Cartesian grids: standard SUPG / OSS, their global-flux-quadrature
//! variants, Fourier-symbol analysis, deferred-correction time stepping
//! and discretely divergence-free initial data.

pub mod basis1d;
pub mod cases;
pub mod dec_time;
pub mod error;
pub mod grid_ops;
pub mod schemes;
pub mod symbols;
pub mod wellprep;

pub use dec_time::{
    dec_step, dec_tableau, evolve, evolve_with, DecConfig, DecStepper, DecTableau, Flow,
};
pub use error::{Error, ErrorCategory, Result};
pub use grid_ops::{Bc, Direction, Grid2D, Line1D, OpKind, Operator1D, StateField, TensorOp};
pub use schemes::{build_scheme, DivergenceKind, SchemeConfig, SchemeKind, SchemeOps};
