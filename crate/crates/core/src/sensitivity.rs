//! Shape sensitivity without an adjoint state.
//!
//! With `d = 2 f·y + ℓ - (λ (div y)² + 2 μ e(y):e(y))` the derivative of the
//! cost along a level-set perturbation `w` is `J'(g) w = ∫ H'(g) w d`.
//! Because `H(g)` enters the discrete problem through its vertex values,
//! `H'(g) w` is likewise taken at the vertices and interpolated linearly.
//! This makes the formula the exact derivative of the discrete cost.

use crate::error::Result;
use crate::fem::quadrature::{triangle_rule, N_TRI_POINTS};
use crate::fem::{solve_spd, FemSpace, P2Triangle};
use crate::levelset::{HeavisideKernel, SaturationR, ScalarField};
use crate::par;
use crate::state::{Problem, StateSolution};

/// Tolerance of the smoothing solve behind the regularized direction.
pub const SMOOTHING_REL_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SensitivityField {
    /// `d` at the quadrature points of every triangle.
    pub d_quad: Vec<[f64; N_TRI_POINTS]>,
    /// `∫ d φ_i` for every vertex hat function `φ_i`.
    pub d_moments: ScalarField,
    /// Lumped-mass projection of `d` onto P1.
    pub d_p1: ScalarField,
}

impl SensitivityField {
    /// Mean of `d` over each triangle.
    pub fn element_means(&self) -> Vec<f64> {
        self.d_quad
            .iter()
            .map(|d| triangle_rule().iter().zip(d).map(|(q, v)| q.weight * v).sum())
            .collect()
    }

    /// `∫ d_p1²`, evaluated with the lumped mass.
    pub fn p1_norm_sq(&self, space: &FemSpace) -> f64 {
        self.d_p1.values().iter().zip(space.lumped_mass()).map(|(d, m)| d * d * m).sum()
    }
}

/// Evaluates `d` from a solved state.
pub fn compute_d(problem: &Problem, state: &StateSolution) -> SensitivityField {
    let space = &problem.space;
    let mesh = space.mesh();
    let f = problem.loads.body;
    let ell = problem.penalty;
    let d_quad = par::map_range(mesh.n_triangles(), |t| {
        let e = space.element(t);
        let u = state.displacement.element_dofs(&mesh.p2_nodes(t));
        std::array::from_fn(|q| {
            let l = triangle_rule()[q].bary;
            let grads = e.shape_grads(&l);
            let grad = P2Triangle::displacement_gradient(&grads, &u);
            let work = if f == [0.0, 0.0] {
                0.0
            } else {
                let n = P2Triangle::shape(&l);
                let y: [f64; 2] = std::array::from_fn(|i| (0..6).map(|a| n[a] * u[2 * a + i]).sum());
                f[0] * y[0] + f[1] * y[1]
            };
            2.0 * work + ell - problem.material.energy_density(&grad)
        })
    });

    let mut moments = vec![0.0; mesh.n_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let area = space.element(t).area;
        for (q, qp) in triangle_rule().iter().enumerate() {
            for k in 0..3 {
                moments[tri[k]] += qp.weight * area * qp.bary[k] * d_quad[t][q];
            }
        }
    }
    let d_p1 = moments.iter().zip(space.lumped_mass()).map(|(m, w)| m / w).collect::<Vec<_>>();
    SensitivityField { d_quad, d_moments: ScalarField::new(moments), d_p1: ScalarField::new(d_p1) }
}

/// Nodal gradient `G_i = H'(g_i) ∫ d φ_i`, so that `J'(g) w = Σ G_i w_i`.
pub fn gradient_vector(g: &ScalarField, sens: &SensitivityField, kernel: &HeavisideKernel) -> Result<ScalarField> {
    let kernel = kernel.as_smooth();
    g.values()
        .iter()
        .zip(sens.d_moments.values())
        .map(|(&gi, &m)| Ok(kernel.derivative(gi)? * m))
        .collect::<Result<Vec<_>>>()
        .map(ScalarField::new)
}

/// `J'(g) w = ∫ I(H'(g) w) d`, where `I` is the vertex interpolant and `d`
/// is taken at the quadrature points.
pub fn directional_derivative(
    g: &ScalarField,
    w: &ScalarField,
    sens: &SensitivityField,
    kernel: &HeavisideKernel,
) -> Result<f64> {
    Ok(gradient_vector(g, sens, kernel)?.dot(w))
}

/// One of the three canonical descent directions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DescentChoice {
    /// `w = -H(g) d`.
    DirI,
    /// `w = -H(g) R(d)`.
    DirII(SaturationR),
    /// `w = -d̃` with `∫ γ ∇d̃·∇v + d̃ v = ∫ H'(g) d v` for all P1 `v`.
    DirIII { gamma: f64 },
}

impl DescentChoice {
    pub fn label(&self) -> &'static str {
        match self {
            DescentChoice::DirI => "i",
            DescentChoice::DirII(_) => "ii",
            DescentChoice::DirIII { .. } => "iii",
        }
    }
}

pub fn descent_direction(
    choice: &DescentChoice,
    space: &FemSpace,
    g: &ScalarField,
    sens: &SensitivityField,
    kernel: &HeavisideKernel,
) -> Result<ScalarField> {
    let smooth = kernel.as_smooth();
    let nodal = |f: &dyn Fn(f64) -> f64| -> ScalarField {
        ScalarField::new(
            g.values().iter().zip(sens.d_p1.values()).map(|(&gi, &d)| -smooth.value(gi) * f(d)).collect(),
        )
    };
    match choice {
        DescentChoice::DirI => Ok(nodal(&|d| d)),
        DescentChoice::DirII(sat) => Ok(nodal(&|d| sat.value(d))),
        DescentChoice::DirIII { gamma } => {
            let rhs = gradient_vector(g, sens, kernel)?;
            let a = space.assemble_p1_reaction_diffusion(*gamma);
            let smoothed = solve_spd(&a, rhs.values(), SMOOTHING_REL_TOL, 20 * a.dim().max(100))?;
            Ok(ScalarField::new(smoothed.into_iter().map(|v| -v).collect()))
        }
    }
}

/// `∫ γ |∇u|² + u²` for a P1 field, used to check the smoothed direction.
pub fn reaction_diffusion_energy(space: &FemSpace, gamma: f64, u: &ScalarField) -> f64 {
    let a = space.assemble_p1_reaction_diffusion(gamma);
    u.dot(&ScalarField::new(a.apply(u.values())))
}
