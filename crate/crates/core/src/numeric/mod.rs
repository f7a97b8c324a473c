//! Numeric kernels shared by the front, mode and time-domain solvers.

pub mod fit;
pub mod linalg;
pub mod ode;
pub mod quad;
