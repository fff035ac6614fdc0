//! The Heaviside-weighted elasticity state and the penalized compliance.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::quadrature::triangle_rule;
use crate::fem::{FemSpace, LinearSolverKind, Loads, Material, P2Triangle, VectorField};
use crate::levelset::{HeavisideKernel, ScalarField};
use crate::mesh::BoundaryLabel;
use crate::par;

/// Everything the cost depends on apart from the level-set function.
#[derive(Debug, Clone)]
pub struct Problem {
    pub space: Arc<FemSpace>,
    pub material: Material,
    pub loads: Loads,
    /// Volume penalty `ℓ`.
    pub penalty: f64,
    pub solver: LinearSolverKind,
}

impl Problem {
    pub fn new(space: Arc<FemSpace>, material: Material, loads: Loads, penalty: f64) -> Self {
        Self { space, material, loads, penalty, solver: LinearSolverKind::default() }
    }

    pub fn with_solver(mut self, solver: LinearSolverKind) -> Self {
        self.solver = solver;
        self
    }
}

#[derive(Debug, Clone)]
pub struct StateSolution {
    pub displacement: VectorField,
    /// Nodal Heaviside values the state was solved with.
    pub coeff: ScalarField,
    /// `∫ H f·y`.
    pub compliance_volume_term: f64,
    /// `∫_ΓN h·y`.
    pub compliance_surface_term: f64,
    /// `∫ H` (unscaled by the penalty).
    pub volume_term: f64,
    pub cost: f64,
}

impl StateSolution {
    pub fn compliance(&self) -> f64 {
        self.compliance_volume_term + self.compliance_surface_term
    }
}

/// Solves the weighted state for `g` and evaluates
/// `J = ∫ H f·y + ∫_ΓN h·y + ℓ ∫ H`.
pub fn solve_state(problem: &Problem, g: &ScalarField, kernel: &HeavisideKernel) -> Result<StateSolution> {
    let space = &problem.space;
    g.check_mesh(space.mesh())?;
    if space.mesh().boundary_edges(BoundaryLabel::SigmaD).is_empty() && !space.has_fixed_dofs() {
        return Err(Error::InvalidInput("mesh has no clamped boundary".into()));
    }
    let coeff = g.apply(kernel);
    let body = Loads::new(problem.loads.body, [0.0, 0.0]);
    let traction = Loads::new([0.0, 0.0], problem.loads.traction);
    let rhs_body = space.assemble_rhs(&body, &coeff)?;
    let rhs_traction = space.assemble_rhs(&traction, &coeff)?;
    let rhs: Vec<f64> = rhs_body.iter().zip(&rhs_traction).map(|(a, b)| a + b).collect();

    let displacement = if rhs.iter().all(|&v| v == 0.0) {
        VectorField::zeros(space.mesh().n_p2_nodes())
    } else {
        let system = space.assemble_system(&problem.material, &coeff)?;
        space.solve(&system, &rhs, problem.solver)?
    };
    let y = displacement.values();
    let compliance_volume_term = dot(&rhs_body, y);
    let compliance_surface_term = dot(&rhs_traction, y);
    let volume_term = space.integrate_p1(&coeff);
    let cost = compliance_volume_term + compliance_surface_term + problem.penalty * volume_term;
    Ok(StateSolution {
        displacement,
        coeff,
        compliance_volume_term,
        compliance_surface_term,
        volume_term,
        cost,
    })
}

/// `∫_D H(g)` with `H(g)` interpolated linearly from its vertex values.
pub fn volume_of(space: &FemSpace, g: &ScalarField, kernel: &HeavisideKernel) -> f64 {
    space.integrate_p1(&g.apply(kernel))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Triangles whose three vertices satisfy `g >= 0`: a conservative inner
/// approximation of the design.
pub fn inside_triangles(space: &FemSpace, g: &ScalarField) -> Vec<bool> {
    let mesh = space.mesh();
    (0..mesh.n_triangles()).map(|t| g.on_triangle(mesh, t).iter().all(|&v| v >= 0.0)).collect()
}

/// `L²` and full `H¹` norms of `a - b` over the flagged triangles.
pub fn difference_norms(space: &FemSpace, a: &VectorField, b: &VectorField, include: &[bool]) -> (f64, f64) {
    let mesh = space.mesh();
    let parts = par::map_range(mesh.n_triangles(), |t| {
        if !include[t] {
            return (0.0, 0.0);
        }
        let e = space.element(t);
        let nodes = mesh.p2_nodes(t);
        let ua = a.element_dofs(&nodes);
        let ub = b.element_dofs(&nodes);
        let diff: [f64; 12] = std::array::from_fn(|k| ua[k] - ub[k]);
        let (mut l2, mut semi) = (0.0, 0.0);
        for q in triangle_rule() {
            let n = P2Triangle::shape(&q.bary);
            let grads = e.shape_grads(&q.bary);
            let mut v = [0.0; 2];
            for a in 0..6 {
                v[0] += n[a] * diff[2 * a];
                v[1] += n[a] * diff[2 * a + 1];
            }
            let g = P2Triangle::displacement_gradient(&grads, &diff);
            let w = q.weight * e.area;
            l2 += w * (v[0] * v[0] + v[1] * v[1]);
            semi += w * (g[0][0] * g[0][0] + g[0][1] * g[0][1] + g[1][0] * g[1][0] + g[1][1] * g[1][1]);
        }
        (l2, semi)
    });
    let (l2, semi) = parts.iter().fold((0.0, 0.0), |(x, y), (a, b)| (x + a, y + b));
    (l2.sqrt(), (l2 + semi).sqrt())
}
