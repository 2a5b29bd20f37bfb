//! Numerical inverse scattering for the defocusing mKdV equation
//! `u_t + u_xxx - 6u²u_x = εu^ℓ`.

pub mod asymptotics;
pub mod campaign;
pub mod cauchy;
pub mod config;
pub mod error;
pub mod fit;
pub mod io;
pub mod flow;
pub mod krylov;
pub mod mat2;
pub mod numerics;
pub mod pde;
pub mod rhp;
pub mod scattering;
pub mod special;

pub use error::{Error, Result};
