//! Fixed-domain shape and topology optimization for minimal compliance in
//! 2D linear elasticity.
//!
//! The design is the nonnegative region of a level-set function `g` on a
//! fixed rectangle. The elasticity state is solved on the whole rectangle
//! with its coefficients weighted by a regularized Heaviside of `g`, so the
//! mesh never changes while holes open and close.

pub mod commands;
pub mod error;
pub mod fem;
pub mod io;
pub mod levelset;
pub mod mesh;
pub mod optimizer;
pub mod par;
pub mod presets;
pub mod sensitivity;
pub mod state;

pub use error::{Error, Result};
