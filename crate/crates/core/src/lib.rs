//! Updating the leading eigenpairs of a symmetric matrix after a rank-one
//! perturbation when only those eigenpairs are known, and the application
//! of that update to out-of-sample extension of a normalized graph Laplacian.
//!
//! The pipeline for a single update is [`update::rank_one_update`]:
//! deflation, choice of the tail parameter `mu`, the truncated secular
//! equation ([`secular`]) and the truncated eigenvector formulas
//! ([`eigvec`]). [`graph`] and [`extend`] build the Laplacian application on
//! top of it, and [`labbench`] holds the reference eigensolver and the
//! experiment drivers.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigvec;
pub mod error;
pub mod extend;
pub mod graph;
pub mod io;
pub mod labbench;
pub mod linalg;
pub mod secular;
pub mod update;

pub use error::{Error, Result};
pub use linalg::{PartialEigen, RankOneUpdate, SymmetricMatrix};
pub use secular::{MuPolicy, Order, TruncationConfig};
