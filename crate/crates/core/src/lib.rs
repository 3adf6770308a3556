//! Conformal dimension of finite metric spaces via the combinatorial
//! p-modulus of annuli, with the supporting metric diagnostics, fractal
//! generators, hyperbolicity tools and convergence experiments.

pub mod annulus;
pub mod convergence;
pub mod dimension;
pub mod error;
pub mod fmt;
pub mod hyperbolic;
pub mod metric;
pub mod modulus;
pub mod net;
pub mod regularity;
pub mod spaces;

pub use error::{Error, Result};
pub use metric::{FiniteMetricSpace, SpaceDocument};
pub use net::{build_net_hierarchy, NetHierarchy};
