//! Stability laboratory for the critical Fisher-KPP front.

pub mod evans;
pub mod front;
pub mod green_lambda;
pub mod laplace;
pub mod model;
pub mod modes;
pub mod numeric;
pub mod operator;
pub mod scalar;
pub mod simulate;
pub mod verify;

pub use scalar::Real;

pub type Complex64 = num_complex::Complex<f64>;
pub type Model = model::ModelParams<f64>;
pub type ModelF32 = model::ModelParams<f32>;
pub type Reaction = model::Nonlinearity<f64>;
pub type LogWeight = model::Weight<f64>;
