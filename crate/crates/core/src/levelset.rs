//! Regularized Heaviside kernels, the saturation function used by the
//! saturated descent direction, and P1 scalar fields on the fixed mesh.

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Floor of the clamped kernel used for the state solve at small `epsilon`.
pub const CLAMPED_FLOOR: f64 = 1e-4;
/// Void value of the sharp reference kernel.
pub const REFERENCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeavisideVariant {
    /// `1 - exp(-r/eps)/2` for `r >= 0`, `exp(r/eps)/2` otherwise.
    Smooth,
    /// Smooth kernel with its negative branch bounded below by `floor`.
    Clamped { floor: f64 },
    /// `1` for `r >= 0`, `eps` otherwise.
    Step,
    /// `1` for `r >= 0`, `floor` otherwise.
    Reference { floor: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeavisideKernel {
    pub epsilon: f64,
    pub variant: HeavisideVariant,
}

impl HeavisideKernel {
    pub fn smooth(epsilon: f64) -> Self {
        Self { epsilon, variant: HeavisideVariant::Smooth }
    }

    pub fn clamped(epsilon: f64) -> Self {
        Self { epsilon, variant: HeavisideVariant::Clamped { floor: CLAMPED_FLOOR } }
    }

    pub fn step(epsilon: f64) -> Self {
        Self { epsilon, variant: HeavisideVariant::Step }
    }

    pub fn reference() -> Self {
        Self { epsilon: 0.0, variant: HeavisideVariant::Reference { floor: REFERENCE_FLOOR } }
    }

    /// Kernel used for state solves: the clamped variant below `epsilon = 1e-2`,
    /// where the smooth kernel makes the void stiffness too small to solve
    /// reliably.
    pub fn for_state(epsilon: f64) -> Self {
        if epsilon < 1e-2 {
            Self::clamped(epsilon)
        } else {
            Self::smooth(epsilon)
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        let eps = self.epsilon;
        match self.variant {
            HeavisideVariant::Smooth => smooth_value(r, eps),
            HeavisideVariant::Clamped { floor } => {
                if r >= 0.0 {
                    smooth_value(r, eps)
                } else {
                    smooth_value(r, eps).max(floor)
                }
            }
            HeavisideVariant::Step => {
                if r >= 0.0 {
                    1.0
                } else {
                    eps
                }
            }
            HeavisideVariant::Reference { floor } => {
                if r >= 0.0 {
                    1.0
                } else {
                    floor
                }
            }
        }
    }

    /// Derivative of the smooth kernel, `exp(-|r|/eps) / (2 eps)`.
    pub fn derivative(&self, r: f64) -> Result<f64> {
        match self.variant {
            HeavisideVariant::Smooth => Ok(smooth_derivative(r, self.epsilon)),
            other => Err(Error::Unsupported(format!("derivative of {other:?} kernel"))),
        }
    }

    /// The smooth kernel with the same `epsilon`; derivative quantities are
    /// always taken from it.
    pub fn as_smooth(&self) -> Self {
        Self::smooth(self.epsilon)
    }
}

fn smooth_value(r: f64, eps: f64) -> f64 {
    if r >= 0.0 {
        1.0 - 0.5 * (-r / eps).exp()
    } else {
        0.5 * (r / eps).exp()
    }
}

fn smooth_derivative(r: f64, eps: f64) -> f64 {
    (-r.abs() / eps).exp() / (2.0 * eps)
}

/// Odd, strictly increasing saturation `R` with range `(-c, c)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaturationR {
    pub c: f64,
}

impl Default for SaturationR {
    fn default() -> Self {
        Self { c: 1.0 }
    }
}

impl SaturationR {
    pub fn new(c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("saturation constant c = {c} must be positive")));
        }
        Ok(Self { c })
    }

    pub fn value(&self, r: f64) -> f64 {
        // Written on |r| so that R(-r) = -R(r) holds bit for bit.
        let magnitude = self.c * -(-r.abs()).exp_m1();
        if r < 0.0 {
            -magnitude
        } else {
            magnitude
        }
    }
}

/// Continuous piecewise-linear field given by its values at mesh vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField(Vec<f64>);

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(mesh: &Mesh) -> Self {
        Self(vec![0.0; mesh.n_vertices()])
    }

    pub fn constant(mesh: &Mesh, value: f64) -> Self {
        Self(vec![value; mesh.n_vertices()])
    }

    /// Nodal interpolant of `f`.
    pub fn from_fn(mesh: &Mesh, f: impl Fn(f64, f64) -> f64) -> Self {
        Self(mesh.vertices().iter().map(|p| f(p[0], p[1])).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check_mesh(&self, mesh: &Mesh) -> Result<()> {
        if self.0.len() != mesh.n_vertices() {
            return Err(Error::InvalidInput(format!(
                "scalar field has {} values, mesh has {} vertices",
                self.0.len(),
                mesh.n_vertices()
            )));
        }
        Ok(())
    }

    /// Nodal values `kernel.value(g_i)`. Inside a triangle the result is
    /// interpolated linearly from these values, not re-evaluated pointwise.
    pub fn apply(&self, kernel: &HeavisideKernel) -> ScalarField {
        Self(self.0.iter().map(|&g| kernel.value(g)).collect())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    /// `self + alpha * other`.
    #[must_use]
    pub fn add_scaled(&self, alpha: f64, other: &ScalarField) -> ScalarField {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + alpha * b).collect())
    }

    pub fn scale(&self, alpha: f64) -> ScalarField {
        self.map(|v| alpha * v)
    }

    pub fn dot(&self, other: &ScalarField) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Values at the three vertices of triangle `t`.
    pub fn on_triangle(&self, mesh: &Mesh, t: usize) -> [f64; 3] {
        mesh.triangles()[t].map(|v| self.0[v])
    }
}

impl From<Vec<f64>> for ScalarField {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}
