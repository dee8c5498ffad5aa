//! Finite element discretization of nonlocal diffusion problems with
//! piecewise (subdomain-dependent) kernels, and the solvers built on it:
//! nonoverlapping Schwarz iterations (block Gauss-Seidel / block Jacobi) and
//! block-preconditioned GMRES.
//!
//! The crate is `no_std` and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod assembly;
pub mod dense;
pub mod error;
pub mod fe;
pub mod geometry;
pub mod kernel;
pub mod krylov;
pub mod mesh;
pub mod oracle;
pub mod quadrature;
pub mod schwarz;
pub mod sparse;

pub use error::{Error, Result};
