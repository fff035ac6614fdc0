//! Quadratic (P2) triangle: shape functions, gradients and the
//! coefficient-weighted elasticity element matrix.
//!
//! Local node order is the three vertices followed by the midpoints of
//! edges (0,1), (1,2), (2,0). Element dofs are interleaved, `2 * node + comp`.

use crate::error::{Error, Result};
use crate::fem::quadrature::{triangle_rule, N_TRI_POINTS};
use crate::mesh::signed_area;

/// Isotropic material given by its Lamé coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && mu > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Lamé coefficients must be positive (lambda = {lambda}, mu = {mu})"
            )));
        }
        Ok(Self { lambda, mu })
    }

    pub fn plane_strain(young: f64, poisson: f64) -> Result<Self> {
        Self::new(
            young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson)),
            young / (2.0 * (1.0 + poisson)),
        )
    }

    pub fn plane_stress(young: f64, poisson: f64) -> Result<Self> {
        Self::new(young * poisson / (1.0 - poisson * poisson), young / (2.0 * (1.0 + poisson)))
    }

    /// `lambda (div y)^2 + 2 mu e(y):e(y)` for a displacement gradient
    /// `grad[i][j] = d y_i / d x_j`.
    pub fn energy_density(&self, grad: &[[f64; 2]; 2]) -> f64 {
        let div = grad[0][0] + grad[1][1];
        let e12 = 0.5 * (grad[0][1] + grad[1][0]);
        self.lambda * div * div
            + 2.0 * self.mu * (grad[0][0] * grad[0][0] + grad[1][1] * grad[1][1] + 2.0 * e12 * e12)
    }
}

pub type ElementMatrix = [[f64; 12]; 12];

/// Geometry of one triangle, with the P2 basis expressed in barycentric
/// coordinates.
#[derive(Debug, Clone, Copy)]
pub struct P2Triangle {
    pub coords: [[f64; 2]; 3],
    pub area: f64,
    /// Constant gradients of the barycentric coordinates.
    pub grad_bary: [[f64; 2]; 3],
}

impl P2Triangle {
    pub fn new(coords: [[f64; 2]; 3], index: usize) -> Result<Self> {
        let area = signed_area(&coords);
        if !(area > 0.0) {
            return Err(Error::DegenerateTriangle { triangle: index, area });
        }
        let [p0, p1, p2] = coords;
        let inv = 1.0 / (2.0 * area);
        let grad_bary = [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ];
        Ok(Self { coords, area, grad_bary })
    }

    pub fn point(&self, l: &[f64; 3]) -> [f64; 2] {
        let c = &self.coords;
        [
            l[0] * c[0][0] + l[1] * c[1][0] + l[2] * c[2][0],
            l[0] * c[0][1] + l[1] * c[1][1] + l[2] * c[2][1],
        ]
    }

    pub fn shape(l: &[f64; 3]) -> [f64; 6] {
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }

    pub fn shape_grads(&self, l: &[f64; 3]) -> [[f64; 2]; 6] {
        let g = &self.grad_bary;
        let lin = |a: usize| [(4.0 * l[a] - 1.0) * g[a][0], (4.0 * l[a] - 1.0) * g[a][1]];
        let quad = |a: usize, b: usize| {
            [4.0 * (l[a] * g[b][0] + l[b] * g[a][0]), 4.0 * (l[a] * g[b][1] + l[b] * g[a][1])]
        };
        [lin(0), lin(1), lin(2), quad(0, 1), quad(1, 2), quad(2, 0)]
    }

    /// Shape-function gradients at every point of the triangle rule.
    pub fn quad_grads(&self) -> [[[f64; 2]; 6]; N_TRI_POINTS] {
        let rule = triangle_rule();
        std::array::from_fn(|q| self.shape_grads(&rule[q].bary))
    }

    /// Displacement gradient `grad[i][j] = d y_i / d x_j` from element dofs.
    pub fn displacement_gradient(grads: &[[f64; 2]; 6], dofs: &[f64; 12]) -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        for (a, ga) in grads.iter().enumerate() {
            for i in 0..2 {
                out[i][0] += dofs[2 * a + i] * ga[0];
                out[i][1] += dofs[2 * a + i] * ga[1];
            }
        }
        out
    }

    /// Element matrix of `a(u, v) = ∫ H σ(u):∇v` with `H` interpolated
    /// linearly from its vertex values.
    pub fn stiffness(&self, material: &Material, h_vertex: &[f64; 3]) -> ElementMatrix {
        let (lambda, mu) = (material.lambda, material.mu);
        let mut k = [[0.0; 12]; 12];
        for q in triangle_rule() {
            let grads = self.shape_grads(&q.bary);
            let h = q.bary[0] * h_vertex[0] + q.bary[1] * h_vertex[1] + q.bary[2] * h_vertex[2];
            let scale = q.weight * self.area * h;
            for a in 0..6 {
                let ga = grads[a];
                for b in a..6 {
                    let gb = grads[b];
                    let dot = ga[0] * gb[0] + ga[1] * gb[1];
                    for i in 0..2 {
                        for j in 0..2 {
                            let delta = if i == j { dot } else { 0.0 };
                            let v = lambda * ga[i] * gb[j] + mu * (delta + ga[j] * gb[i]);
                            k[2 * a + i][2 * b + j] += scale * v;
                        }
                    }
                }
            }
        }
        for a in 0..6 {
            for b in (a + 1)..6 {
                for i in 0..2 {
                    for j in 0..2 {
                        k[2 * b + j][2 * a + i] = k[2 * a + i][2 * b + j];
                    }
                }
            }
        }
        k
    }

    /// Consistent load vector of a body force `f` weighted by the linearly
    /// interpolated coefficient.
    pub fn body_load(&self, force: [f64; 2], h_vertex: &[f64; 3]) -> [f64; 12] {
        let mut out = [0.0; 12];
        for q in triangle_rule() {
            let n = Self::shape(&q.bary);
            let h = q.bary[0] * h_vertex[0] + q.bary[1] * h_vertex[1] + q.bary[2] * h_vertex[2];
            let scale = q.weight * self.area * h;
            for a in 0..6 {
                out[2 * a] += scale * n[a] * force[0];
                out[2 * a + 1] += scale * n[a] * force[1];
            }
        }
        out
    }
}

/// Shape functions of the quadratic edge trace at parameter `t` in `[0, 1]`:
/// start vertex, end vertex, midpoint.
pub fn edge_shape(t: f64) -> [f64; 3] {
    [(1.0 - t) * (1.0 - 2.0 * t), t * (2.0 * t - 1.0), 4.0 * t * (1.0 - t)]
}
