//! Global assembly on a fixed mesh: P2 vector space for the displacement,
//! P1 scalar space for level-set quantities.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fem::element::{edge_shape, Material, P2Triangle};
use crate::fem::quadrature::{segment_rule, triangle_rule};
use crate::fem::solver::{pcg, LinearSolverKind, SparseCholesky, DEFAULT_REL_TOL};
use crate::fem::sparse::{CsrMatrix, ElementPattern};
use crate::levelset::ScalarField;
use crate::mesh::{BoundaryLabel, Mesh};
use crate::par;

/// Constant body force and constant traction on the loaded boundary.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Loads {
    pub body: [f64; 2],
    pub traction: [f64; 2],
}

impl Loads {
    pub fn new(body: [f64; 2], traction: [f64; 2]) -> Self {
        Self { body, traction }
    }

    pub fn is_zero(&self) -> bool {
        self.body == [0.0, 0.0] && self.traction == [0.0, 0.0]
    }
}

/// P2 vector field, two interleaved components per node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField(Vec<f64>);

impl VectorField {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(n_nodes: usize) -> Self {
        Self(vec![0.0; 2 * n_nodes])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn node(&self, n: usize) -> [f64; 2] {
        [self.0[2 * n], self.0[2 * n + 1]]
    }

    pub fn element_dofs(&self, nodes: &[usize; 6]) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (a, &n) in nodes.iter().enumerate() {
            out[2 * a] = self.0[2 * n];
            out[2 * a + 1] = self.0[2 * n + 1];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

/// Precomputed element geometry, sparsity patterns and Dirichlet data for
/// one mesh.
#[derive(Debug)]
pub struct FemSpace {
    mesh: Arc<Mesh>,
    elements: Vec<P2Triangle>,
    vector_pattern: ElementPattern,
    scalar_pattern: ElementPattern,
    fixed: Vec<bool>,
    lumped_mass: Vec<f64>,
    cholesky: OnceLock<SparseCholesky>,
}

impl FemSpace {
    /// Clamps both displacement components at every P2 node of the
    /// `SigmaD` edges.
    pub fn new(mesh: Arc<Mesh>) -> Result<Self> {
        let nodes = mesh.labelled_p2_nodes(BoundaryLabel::SigmaD);
        Self::with_fixed_nodes(mesh, &nodes)
    }

    /// Clamps the given P2 nodes instead of the `SigmaD` ones.
    pub fn with_fixed_nodes(mesh: Arc<Mesh>, nodes: &[usize]) -> Result<Self> {
        let elements = (0..mesh.n_triangles())
            .map(|t| P2Triangle::new(mesh.triangle_coords(t), t))
            .collect::<Result<Vec<_>>>()?;
        let n_nodes = mesh.n_p2_nodes();
        let vector_dofs = (0..mesh.n_triangles())
            .map(|t| mesh.p2_nodes(t).iter().flat_map(|&n| [2 * n, 2 * n + 1]).collect())
            .collect();
        let scalar_dofs = mesh.triangles().iter().map(|t| t.to_vec()).collect();
        let mut fixed = vec![false; 2 * n_nodes];
        for &n in nodes {
            fixed[2 * n] = true;
            fixed[2 * n + 1] = true;
        }
        let mut lumped_mass = vec![0.0; mesh.n_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            for &v in tri {
                lumped_mass[v] += elements[t].area / 3.0;
            }
        }
        Ok(Self {
            vector_pattern: ElementPattern::new(2 * n_nodes, vector_dofs),
            scalar_pattern: ElementPattern::new(mesh.n_vertices(), scalar_dofs),
            mesh,
            elements,
            fixed,
            lumped_mass,
            cholesky: OnceLock::new(),
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self, t: usize) -> &P2Triangle {
        &self.elements[t]
    }

    pub fn n_dofs(&self) -> usize {
        self.fixed.len()
    }

    pub fn fixed_dofs(&self) -> &[bool] {
        &self.fixed
    }

    pub fn has_fixed_dofs(&self) -> bool {
        self.fixed.iter().any(|&f| f)
    }

    /// Row sums of the P1 mass matrix, `∫ φ_i`.
    pub fn lumped_mass(&self) -> &[f64] {
        &self.lumped_mass
    }

    fn check_coefficient(&self, coeff: &ScalarField) -> Result<()> {
        coeff.check_mesh(&self.mesh)
    }

    /// Weighted stiffness `∫ H σ(u):∇v` before any boundary treatment.
    pub fn assemble_stiffness_raw(&self, material: &Material, coeff: &ScalarField) -> Result<CsrMatrix> {
        self.check_coefficient(coeff)?;
        let locals = par::map_range(self.elements.len(), |t| {
            let k = self.elements[t].stiffness(material, &coeff.on_triangle(&self.mesh, t));
            let mut flat = [0.0; 144];
            for (r, row) in k.iter().enumerate() {
                flat[12 * r..12 * r + 12].copy_from_slice(row);
            }
            flat
        });
        Ok(self.vector_pattern.assemble(&locals))
    }

    /// Load vector `∫ H f·v + ∫_ΓN h·v` before any boundary treatment.
    pub fn assemble_rhs_raw(&self, loads: &Loads, coeff: &ScalarField) -> Result<Vec<f64>> {
        self.check_coefficient(coeff)?;
        let mut rhs = if loads.body == [0.0, 0.0] {
            vec![0.0; self.n_dofs()]
        } else {
            let locals = par::map_range(self.elements.len(), |t| {
                self.elements[t].body_load(loads.body, &coeff.on_triangle(&self.mesh, t))
            });
            self.vector_pattern.assemble_vector(&locals)
        };
        if loads.traction != [0.0, 0.0] {
            let nv = self.mesh.n_vertices();
            for be in self.mesh.boundary_edges(BoundaryLabel::GammaN) {
                let nodes = [be.vertices[0], be.vertices[1], nv + be.edge];
                for (t, w) in segment_rule() {
                    let n = edge_shape(t);
                    for (k, &node) in nodes.iter().enumerate() {
                        rhs[2 * node] += be.length * w * n[k] * loads.traction[0];
                        rhs[2 * node + 1] += be.length * w * n[k] * loads.traction[1];
                    }
                }
            }
        }
        Ok(rhs)
    }

    /// Stiffness with symmetric elimination of the clamped dofs.
    pub fn assemble_system(&self, material: &Material, coeff: &ScalarField) -> Result<CsrMatrix> {
        let mut k = self.assemble_stiffness_raw(material, coeff)?;
        let mut scratch = vec![0.0; self.n_dofs()];
        k.apply_dirichlet(&mut scratch, &self.fixed, &vec![0.0; self.n_dofs()]);
        Ok(k)
    }

    /// Load vector with clamped entries zeroed.
    pub fn assemble_rhs(&self, loads: &Loads, coeff: &ScalarField) -> Result<Vec<f64>> {
        let mut rhs = self.assemble_rhs_raw(loads, coeff)?;
        for (r, &f) in rhs.iter_mut().zip(&self.fixed) {
            if f {
                *r = 0.0;
            }
        }
        Ok(rhs)
    }

    /// Solves an assembled displacement system.
    pub fn solve(&self, system: &CsrMatrix, rhs: &[f64], kind: LinearSolverKind) -> Result<VectorField> {
        if !self.has_fixed_dofs() {
            return Err(Error::InvalidInput("no clamped dofs: the elasticity system is singular".into()));
        }
        let x = match kind {
            LinearSolverKind::Cholesky => {
                let chol = match self.cholesky.get() {
                    Some(c) => c,
                    None => {
                        let c = SparseCholesky::analyze(system)?;
                        self.cholesky.get_or_init(|| c)
                    }
                };
                chol.solve(system, rhs)?
            }
            LinearSolverKind::Pcg => pcg(system, rhs, None, DEFAULT_REL_TOL, 20 * system.dim())?.0,
        };
        Ok(VectorField(x))
    }

    /// Matrix of `∫ γ ∇u·∇v + u v` on the P1 space (no boundary conditions).
    pub fn assemble_p1_reaction_diffusion(&self, gamma: f64) -> CsrMatrix {
        let locals = par::map_range(self.elements.len(), |t| {
            let e = &self.elements[t];
            let mut k = [0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    let g = e.grad_bary[i][0] * e.grad_bary[j][0] + e.grad_bary[i][1] * e.grad_bary[j][1];
                    let m = if i == j { 2.0 } else { 1.0 } / 12.0;
                    k[3 * i + j] = e.area * (gamma * g + m);
                }
            }
            k
        });
        self.scalar_pattern.assemble(&locals)
    }

    /// `∫ H (λ (div u)(div v) + 2 μ e(u):e(v))` evaluated as `uᵀ K v` without
    /// any boundary treatment, for energy checks.
    pub fn energy(&self, material: &Material, coeff: &ScalarField, u: &VectorField) -> Result<f64> {
        let k = self.assemble_stiffness_raw(material, coeff)?;
        Ok(u.values().iter().zip(k.apply(u.values())).map(|(a, b)| a * b).sum())
    }

    /// `∫_D` of the P1 interpolant of nodal values.
    pub fn integrate_p1(&self, field: &ScalarField) -> f64 {
        field.values().iter().zip(&self.lumped_mass).map(|(v, m)| v * m).sum()
    }

    /// Values of a vertex-interpolated field at the quadrature points of `t`.
    pub fn p1_at_quad(&self, field: &ScalarField, t: usize) -> [f64; 6] {
        let v = field.on_triangle(&self.mesh, t);
        std::array::from_fn(|q| {
            let l = triangle_rule()[q].bary;
            l[0] * v[0] + l[1] * v[1] + l[2] * v[2]
        })
    }
}
