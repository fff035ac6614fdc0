//! The three user-facing workflows: an optimization run, the ε-convergence
//! study and the finite-difference gradient check.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::fem::VectorField;
use crate::io::{self, RunManifest, VtkField};
use crate::levelset::{HeavisideKernel, ScalarField};
use crate::mesh::Mesh;
use crate::optimizer::{optimize, IterationRecord, StopReason};
use crate::sensitivity::{compute_d, directional_derivative, SensitivityField};
use crate::state::{difference_norms, inside_triangles, solve_state, Problem, StateSolution};

pub const DEFAULT_EPS_LIST: [f64; 4] = [0.01, 0.005, 0.001, 0.0005];

pub fn build_problem(manifest: &RunManifest) -> Result<Problem> {
    let (nx, ny) = manifest.resolution;
    Ok(manifest.preset.problem(nx, ny)?.with_solver(manifest.solver))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn vertex_displacement(mesh: &Mesh, u: &VectorField) -> Vec<[f64; 2]> {
    // P2 nodes start with the mesh vertices.
    (0..mesh.n_vertices()).map(|n| u.node(n)).collect()
}

fn write_snapshot(
    path: &Path,
    mesh: &Mesh,
    g: &ScalarField,
    state: &StateSolution,
    sens: &SensitivityField,
) -> Result<()> {
    let u = vertex_displacement(mesh, &state.displacement);
    let d = sens.element_means();
    io::write_vtk(
        path,
        mesh,
        "topopt level-set snapshot",
        &[
            VtkField::scalar("g", g.values()),
            VtkField::scalar("Hg", state.coeff.values()),
            VtkField::vector("displacement", &u),
        ],
        &[VtkField::scalar("d", &d)],
    )
}

fn snapshot_path(dir: &Path, iter: usize) -> PathBuf {
    dir.join(format!("snapshot_{iter:04}.vtk"))
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub history: Vec<IterationRecord>,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub final_g: ScalarField,
    pub stop_reason: StopReason,
    pub history_path: PathBuf,
}

/// Runs the optimizer and writes `history.csv`, `final_g.csv` and VTK
/// snapshots every `cadence` iterations plus the final iterate. On a hard
/// solver failure the partial history is still written.
pub fn cmd_run(manifest: &RunManifest) -> Result<RunSummary> {
    let dir = &manifest.out_dir;
    create_dir(dir)?;
    let problem = build_problem(manifest)?;
    let mesh = problem.space.mesh();
    let kernel = manifest.kernel();
    let g0 = manifest.preset.initial_g(mesh);
    let history_path = dir.join("history.csv");
    let mut write_error = None;

    let result = optimize(&problem, &kernel, g0, &manifest.optimizer, |view| {
        let iter = view.record.iter;
        if iter % manifest.cadence == 0 && write_error.is_none() {
            if let Err(e) = write_snapshot(&snapshot_path(dir, iter), mesh, view.g, view.state, view.sensitivity) {
                write_error = Some(e);
            }
        }
        log::info!(
            "iter {iter:3}  J = {:.6}  J'w = {:.3e}  lambda = {}  volume = {:.5}",
            view.record.cost,
            view.record.jprime_w,
            view.record.lambda,
            view.record.volume
        );
    });
    let outcome = match result {
        Ok(o) => o,
        Err(aborted) => {
            io::write_history(&history_path, &aborted.history, None)?;
            io::write_scalar_field(&dir.join("final_g.csv"), mesh, &aborted.g)?;
            return Err(aborted.error);
        }
    };
    if let Some(e) = write_error {
        return Err(e);
    }

    let last = outcome.history.last().expect("at least one iteration");
    let stepped = last.lambda > 0.0;
    let final_iter = if stepped { outcome.history.len() } else { last.iter };
    let terminal = stepped.then_some((outcome.state.cost, outcome.state.volume_term));
    io::write_history(&history_path, &outcome.history, terminal)?;
    let sens = compute_d(&problem, &outcome.state);
    write_snapshot(&snapshot_path(dir, final_iter), mesh, &outcome.g, &outcome.state, &sens)?;
    io::write_scalar_field(&dir.join("final_g.csv"), mesh, &outcome.g)?;

    Ok(RunSummary {
        initial_cost: outcome.history[0].cost,
        final_cost: outcome.state.cost,
        stop_reason: outcome.stop_reason,
        final_g: outcome.g,
        history: outcome.history,
        history_path,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsRow {
    pub epsilon: f64,
    /// `(J, L² difference, H¹ difference)`, or the failure message.
    pub result: std::result::Result<(f64, f64, f64), String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsStudy {
    pub rows: Vec<EpsRow>,
    pub reference_cost: f64,
}

impl EpsStudy {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,J,l2_diff,h1_diff,status\n");
        for row in &self.rows {
            match &row.result {
                Ok((j, l2, h1)) => {
                    let _ = writeln!(out, "{:e},{j:.12e},{l2:.12e},{h1:.12e},ok", row.epsilon);
                }
                Err(msg) => {
                    let _ = writeln!(out, "{:e},nan,nan,nan,failed: {}", row.epsilon, msg.replace(',', ";"));
                }
            }
        }
        let _ = writeln!(out, "reference,{:.12e},0,0,ok", self.reference_cost);
        out
    }
}

/// Solves the state for a fixed `g` at each `ε` and compares it with the
/// sharp reference kernel on the triangles inside the design.
pub fn eps_study(problem: &Problem, g: &ScalarField, eps_list: &[f64]) -> Result<EpsStudy> {
    if eps_list.is_empty() || eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidInput("epsilon values must be positive".into()));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidInput("epsilon values must be strictly decreasing".into()));
    }
    let zeros = g.values().iter().filter(|&&v| v == 0.0).count();
    if zeros > 0 {
        // Every H^ε is 1/2 at r = 0 while the reference kernel is 1, so the
        // differences cannot vanish as ε decreases.
        log::warn!("g vanishes exactly at {zeros} vertices; the eps-limit and the reference kernel disagree there");
    }
    let reference = solve_state(problem, g, &HeavisideKernel::reference())?;
    let inside = inside_triangles(&problem.space, g);
    let rows = eps_list
        .iter()
        .map(|&epsilon| {
            let result = solve_state(problem, g, &HeavisideKernel::for_state(epsilon))
                .map(|s| {
                    let (l2, h1) = difference_norms(&problem.space, &s.displacement, &reference.displacement, &inside);
                    (s.cost, l2, h1)
                })
                .map_err(|e| {
                    log::warn!("eps = {epsilon}: {e}");
                    e.to_string()
                });
            EpsRow { epsilon, result }
        })
        .collect();
    Ok(EpsStudy { rows, reference_cost: reference.cost })
}

/// Runs [`eps_study`] on the preset's initial `g`, or on a `g` read from
/// `g_file`, and writes `eps_study.csv`.
pub fn cmd_eps_study(manifest: &RunManifest, eps_list: &[f64], g_file: Option<&Path>) -> Result<EpsStudy> {
    create_dir(&manifest.out_dir)?;
    let problem = build_problem(manifest)?;
    let mesh = problem.space.mesh();
    let g = match g_file {
        Some(path) => io::read_scalar_field(path, mesh)?,
        None => manifest.preset.initial_g(mesh),
    };
    let study = eps_study(&problem, &g, eps_list)?;
    let path = manifest.out_dir.join("eps_study.csv");
    fs::write(&path, study.to_csv()).map_err(|e| Error::io(&path, e))?;
    Ok(study)
}

/// Deterministic smooth random fields: vertex values uniform in `[-1, 1]`
/// from a 64-bit LCG, followed by one pass of averaging each vertex with its
/// neighbours.
pub struct DirectionSampler {
    state: u64,
}

impl DirectionSampler {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    fn next_uniform(&mut self) -> f64 {
        self.state = self.state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }

    pub fn sample(&mut self, mesh: &Mesh, neighbours: &[Vec<usize>]) -> ScalarField {
        let raw: Vec<f64> = (0..mesh.n_vertices()).map(|_| self.next_uniform()).collect();
        let smooth = neighbours
            .iter()
            .enumerate()
            .map(|(i, nb)| (raw[i] + nb.iter().map(|&j| raw[j]).sum::<f64>()) / (1 + nb.len()) as f64)
            .collect();
        ScalarField::new(smooth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckRow {
    pub label: String,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

/// Compares `J'(g) w` with `(J(g + t w) - J(g - t w)) / 2t` for each `w`.
/// When both sides vanish the error is reported as zero.
pub fn grad_check(
    problem: &Problem,
    g: &ScalarField,
    kernel: &HeavisideKernel,
    directions: &[(String, ScalarField)],
    fd_step: f64,
) -> Result<Vec<GradCheckRow>> {
    if !(fd_step > 0.0) {
        return Err(Error::InvalidInput(format!("finite-difference step must be positive, got {fd_step}")));
    }
    let state = solve_state(problem, g, kernel)?;
    let sens = compute_d(problem, &state);
    directions
        .iter()
        .map(|(label, w)| {
            let analytic = directional_derivative(g, w, &sens, kernel)?;
            let plus = solve_state(problem, &g.add_scaled(fd_step, w), kernel)?.cost;
            let minus = solve_state(problem, &g.add_scaled(-fd_step, w), kernel)?.cost;
            let fd = (plus - minus) / (2.0 * fd_step);
            let rel_error = if analytic == fd { 0.0 } else { (analytic - fd).abs() / fd.abs() };
            Ok(GradCheckRow { label: label.clone(), analytic, finite_difference: fd, rel_error })
        })
        .collect()
}

/// The zero direction followed by `m` sampled directions.
pub fn grad_check_directions(mesh: &Mesh, m: usize, seed: u64) -> Vec<(String, ScalarField)> {
    let neighbours = mesh.vertex_neighbours();
    let mut sampler = DirectionSampler::new(seed);
    std::iter::once(("zero".to_string(), ScalarField::zeros(mesh)))
        .chain((0..m).map(|k| (format!("random{k}"), sampler.sample(mesh, &neighbours))))
        .collect()
}

/// Runs [`grad_check`] at the preset's initial `g` with the smooth kernel and
/// writes `grad_check.csv`. Returns the rows and the largest relative error
/// over the sampled directions.
pub fn cmd_grad_check(manifest: &RunManifest, m: usize, fd_step: f64, seed: u64) -> Result<(Vec<GradCheckRow>, f64)> {
    create_dir(&manifest.out_dir)?;
    let problem = build_problem(manifest)?;
    let mesh = problem.space.mesh();
    let g = manifest.preset.initial_g(mesh);
    let kernel = HeavisideKernel::smooth(manifest.preset.epsilon);
    let rows = grad_check(&problem, &g, &kernel, &grad_check_directions(mesh, m, seed), fd_step)?;
    let max = rows.iter().filter(|r| r.label != "zero").map(|r| r.rel_error).fold(0.0, f64::max);
    let mut csv = String::from("direction,analytic,finite_difference,rel_error\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{:.12e},{:.12e},{:.3e}", r.label, r.analytic, r.finite_difference, r.rel_error);
    }
    let path = manifest.out_dir.join("grad_check.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok((rows, max))
}
