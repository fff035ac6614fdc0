//! The two benchmark problems: a cantilever and a bridge.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{FemSpace, Loads, Material};
use crate::levelset::{HeavisideKernel, ScalarField};
use crate::mesh::{BoundaryLabel, BoundarySegment, Mesh, Rect, Side};
use crate::optimizer::OptimizerConfig;
use crate::sensitivity::DescentChoice;
use crate::state::Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Plane {
    Strain,
    Stress,
}

impl std::str::FromStr for Plane {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strain" | "plane_strain" => Ok(Plane::Strain),
            "stress" | "plane_stress" => Ok(Plane::Stress),
            other => Err(Error::Config(format!("unknown plane assumption '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MaterialSource {
    Lame { lambda: f64, mu: f64 },
    Young { young: f64, poisson: f64, plane: Plane },
}

impl MaterialSource {
    pub fn material(&self) -> Result<Material> {
        match *self {
            MaterialSource::Lame { lambda, mu } => Material::new(lambda, mu),
            MaterialSource::Young { young, poisson, plane: Plane::Strain } => Material::plane_strain(young, poisson),
            MaterialSource::Young { young, poisson, plane: Plane::Stress } => Material::plane_stress(young, poisson),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    /// `0.1 - sin(4πx) sin(3π(y - 0.5))`.
    CantileverHoles,
    /// `0.1 - sin(4π(x - 0.125)) sin(4π(y - 0.5))`.
    BridgeHoles,
    /// `0.1 (0.6 - y)`: the lower half of the bridge domain.
    HalfDomain,
}

impl InitialGuess {
    pub fn eval(self, x: f64, y: f64) -> f64 {
        match self {
            InitialGuess::CantileverHoles => 0.1 - (4.0 * PI * x).sin() * (3.0 * PI * (y - 0.5)).sin(),
            InitialGuess::BridgeHoles => 0.1 - (4.0 * PI * (x - 0.125)).sin() * (4.0 * PI * (y - 0.5)).sin(),
            InitialGuess::HalfDomain => 0.1 * (0.6 - y),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InitialGuess::CantileverHoles | InitialGuess::BridgeHoles => "sinusoidal",
            InitialGuess::HalfDomain => "half",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BridgeInit {
    Sinusoidal,
    HalfDomain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: String,
    pub rect: Rect,
    pub segments: Vec<BoundarySegment>,
    pub material: MaterialSource,
    pub loads: Loads,
    pub penalty: f64,
    pub epsilon: f64,
    pub rho: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub init: InitialGuess,
    pub resolution: (usize, usize),
}

pub fn cantilever() -> Preset {
    Preset {
        name: "cantilever".into(),
        rect: Rect::new(0.0, 2.0, -0.5, 0.5).expect("valid rectangle"),
        segments: vec![
            BoundarySegment::new(BoundaryLabel::SigmaD, Side::Left, -0.5, 0.5),
            BoundarySegment::new(BoundaryLabel::GammaN, Side::Right, -0.1, 0.1),
        ],
        material: MaterialSource::Lame { lambda: 1.0, mu: 8.0 },
        loads: Loads::new([0.0, 0.0], [0.0, -5.0]),
        penalty: 0.5,
        epsilon: 1e-2,
        rho: 0.6,
        tol: 1e-6,
        max_iters: 50,
        init: InitialGuess::CantileverHoles,
        resolution: (120, 60),
    }
}

pub fn bridge(init: BridgeInit) -> Preset {
    Preset {
        name: "bridge".into(),
        rect: Rect::new(-1.0, 1.0, 0.0, 1.2).expect("valid rectangle"),
        segments: vec![
            BoundarySegment::new(BoundaryLabel::SigmaD, Side::Bottom, -1.0, -0.9),
            BoundarySegment::new(BoundaryLabel::SigmaD, Side::Bottom, 0.9, 1.0),
            BoundarySegment::new(BoundaryLabel::GammaN, Side::Bottom, -0.1, 0.1),
        ],
        material: MaterialSource::Young { young: 1.0, poisson: 0.3, plane: Plane::Strain },
        loads: Loads::new([0.0, 0.0], [0.0, -1.0]),
        penalty: 0.1,
        epsilon: 1e-2,
        rho: 0.6,
        tol: 1e-6,
        max_iters: 100,
        init: match init {
            BridgeInit::Sinusoidal => InitialGuess::BridgeHoles,
            BridgeInit::HalfDomain => InitialGuess::HalfDomain,
        },
        resolution: (100, 60),
    }
}

/// Looks a preset up by name: `cantilever`, `bridge` (sinusoidal start) or
/// `bridge-half`.
pub fn by_name(name: &str) -> Result<Preset> {
    match name.trim().to_ascii_lowercase().as_str() {
        "cantilever" => Ok(cantilever()),
        "bridge" | "bridge-sinusoidal" => Ok(bridge(BridgeInit::Sinusoidal)),
        "bridge-half" | "bridge-halfdomain" => Ok(bridge(BridgeInit::HalfDomain)),
        other => Err(Error::Config(format!("unknown preset '{other}'"))),
    }
}

impl Preset {
    pub fn mesh(&self, nx: usize, ny: usize) -> Result<Mesh> {
        Mesh::build(self.rect, nx, ny, &self.segments)
    }

    /// Builds the state problem on an `nx` by `ny` grid.
    pub fn problem(&self, nx: usize, ny: usize) -> Result<Problem> {
        let mesh = Arc::new(self.mesh(nx, ny)?);
        let space = Arc::new(FemSpace::new(mesh)?);
        Ok(Problem::new(space, self.material.material()?, self.loads, self.penalty))
    }

    pub fn initial_g(&self, mesh: &Mesh) -> ScalarField {
        let init = self.init;
        ScalarField::from_fn(mesh, move |x, y| init.eval(x, y))
    }

    pub fn state_kernel(&self) -> HeavisideKernel {
        HeavisideKernel::for_state(self.epsilon)
    }

    pub fn optimizer_config(&self, direction: DescentChoice) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.max_iters,
            tol: self.tol,
            grad_tol: None,
            rho: self.rho,
            ls_max: 10,
            direction,
        }
    }
}
