//! Output files (legacy VTK snapshots, convergence CSV, level-set dumps) and
//! the INI run configuration.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ini::Ini;

use crate::error::{Error, Result};
use crate::fem::LinearSolverKind;
use crate::levelset::{HeavisideKernel, SaturationR, ScalarField};
use crate::mesh::Mesh;
use crate::optimizer::{IterationRecord, OptimizerConfig};
use crate::presets::{self, BridgeInit, InitialGuess, MaterialSource, Plane, Preset};
use crate::sensitivity::DescentChoice;

pub const HISTORY_HEADER: &str = "iter,J,Jprime_w,lambda,volume,ls_trials,stop_reason";

pub enum FieldData<'a> {
    Scalar(&'a [f64]),
    /// Planar vectors, written with a zero third component.
    Vector(&'a [[f64; 2]]),
}

pub struct VtkField<'a> {
    pub name: &'a str,
    pub data: FieldData<'a>,
}

impl<'a> VtkField<'a> {
    pub fn scalar(name: &'a str, data: &'a [f64]) -> Self {
        Self { name, data: FieldData::Scalar(data) }
    }

    pub fn vector(name: &'a str, data: &'a [[f64; 2]]) -> Self {
        Self { name, data: FieldData::Vector(data) }
    }

    fn len(&self) -> usize {
        match self.data {
            FieldData::Scalar(d) => d.len(),
            FieldData::Vector(d) => d.len(),
        }
    }
}

/// Nine significant digits; `-0` is printed as `0` so equal values always
/// produce equal text.
fn num(v: f64) -> String {
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.8e}")
}

fn write_fields(out: &mut String, fields: &[VtkField<'_>]) {
    for f in fields {
        match f.data {
            FieldData::Scalar(d) => {
                let _ = writeln!(out, "SCALARS {} double 1\nLOOKUP_TABLE default", f.name);
                for &v in d {
                    let _ = writeln!(out, "{}", num(v));
                }
            }
            FieldData::Vector(d) => {
                let _ = writeln!(out, "VECTORS {} double", f.name);
                for v in d {
                    let _ = writeln!(out, "{} {} {}", num(v[0]), num(v[1]), num(0.0));
                }
            }
        }
    }
}

/// Legacy ASCII unstructured grid with the mesh vertices as points and the
/// triangles as cells.
pub fn render_vtk(mesh: &Mesh, title: &str, point_fields: &[VtkField<'_>], cell_fields: &[VtkField<'_>]) -> Result<String> {
    let (np, nc) = (mesh.n_vertices(), mesh.n_triangles());
    for f in point_fields {
        if f.len() != np {
            return Err(Error::InvalidInput(format!("point field '{}' has {} values, expected {np}", f.name, f.len())));
        }
    }
    for f in cell_fields {
        if f.len() != nc {
            return Err(Error::InvalidInput(format!("cell field '{}' has {} values, expected {nc}", f.name, f.len())));
        }
    }
    let mut out = String::with_capacity(64 * (np + nc) * (1 + point_fields.len() + cell_fields.len()));
    let _ = write!(out, "# vtk DataFile Version 3.0\n{}\nASCII\nDATASET UNSTRUCTURED_GRID\n", title.lines().next().unwrap_or(""));
    let _ = writeln!(out, "POINTS {np} double");
    for p in mesh.vertices() {
        let _ = writeln!(out, "{} {} {}", num(p[0]), num(p[1]), num(0.0));
    }
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    if !point_fields.is_empty() {
        let _ = writeln!(out, "POINT_DATA {np}");
        write_fields(&mut out, point_fields);
    }
    if !cell_fields.is_empty() {
        let _ = writeln!(out, "CELL_DATA {nc}");
        write_fields(&mut out, cell_fields);
    }
    Ok(out)
}

pub fn write_vtk(
    path: &Path,
    mesh: &Mesh,
    title: &str,
    point_fields: &[VtkField<'_>],
    cell_fields: &[VtkField<'_>],
) -> Result<()> {
    let text = render_vtk(mesh, title, point_fields, cell_fields)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn csv_num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else {
        format!("{:.12e}", if v == 0.0 { 0.0 } else { v })
    }
}

/// Convergence table. `terminal` adds a row for the final iterate (cost and
/// volume) after the last recorded step.
pub fn render_history(history: &[IterationRecord], terminal: Option<(f64, f64)>) -> String {
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in history {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.iter,
            csv_num(r.cost),
            csv_num(r.jprime_w),
            csv_num(r.lambda),
            csv_num(r.volume),
            r.ls_trials,
            r.stop_reason.map_or("", |s| s.as_str())
        );
    }
    if let Some((cost, volume)) = terminal {
        let _ = writeln!(out, "{},{},nan,{},{},0,", history.len(), csv_num(cost), csv_num(0.0), csv_num(volume));
    }
    out
}

pub fn write_history(path: &Path, history: &[IterationRecord], terminal: Option<(f64, f64)>) -> Result<()> {
    fs::write(path, render_history(history, terminal)).map_err(|e| Error::io(path, e))
}

/// Vertex values of `g` as `x,y,g` rows.
pub fn write_scalar_field(path: &Path, mesh: &Mesh, g: &ScalarField) -> Result<()> {
    g.check_mesh(mesh)?;
    let mut out = String::from("x,y,g\n");
    for (p, v) in mesh.vertices().iter().zip(g.values()) {
        let _ = writeln!(out, "{},{},{}", csv_num(p[0]), csv_num(p[1]), format_args!("{v:e}"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a file written by [`write_scalar_field`] and checks it against `mesh`.
pub fn read_scalar_field(path: &Path, mesh: &Mesh) -> Result<ScalarField> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |line: usize, what: &str| Error::InvalidInput(format!("{}:{line}: {what}", path.display()));
    let mut values = Vec::with_capacity(mesh.n_vertices());
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(i + 1, "expected three numbers"))?;
        if cols.len() != 3 {
            return Err(bad(i + 1, "expected three columns"));
        }
        let v = values.len();
        if v >= mesh.n_vertices() {
            return Err(bad(i + 1, "more rows than mesh vertices"));
        }
        let p = mesh.vertices()[v];
        let scale = mesh.rect().width().max(mesh.rect().height());
        if (p[0] - cols[0]).abs() > 1e-9 * scale || (p[1] - cols[1]).abs() > 1e-9 * scale {
            return Err(bad(i + 1, "vertex coordinates do not match the mesh"));
        }
        values.push(cols[2]);
    }
    let g = ScalarField::new(values);
    g.check_mesh(mesh)?;
    Ok(g)
}

/// Which Heaviside kernel defines the cost of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelChoice {
    /// Smooth at `epsilon >= 1e-2`, clamped below.
    #[default]
    Auto,
    Smooth,
    Clamped,
}

impl KernelChoice {
    pub fn kernel(self, epsilon: f64) -> HeavisideKernel {
        match self {
            KernelChoice::Auto => HeavisideKernel::for_state(epsilon),
            KernelChoice::Smooth => HeavisideKernel::smooth(epsilon),
            KernelChoice::Clamped => HeavisideKernel::clamped(epsilon),
        }
    }
}

impl std::str::FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(Self::Auto),
            "smooth" => Ok(Self::Smooth),
            "clamped" => Ok(Self::Clamped),
            other => Err(Error::Config(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Parses `i`, `ii` or `iii` into a descent choice with the given parameters.
pub fn parse_direction(s: &str, c: f64, gamma: f64) -> Result<DescentChoice> {
    match s.trim().to_ascii_lowercase().as_str() {
        "i" | "1" => Ok(DescentChoice::DirI),
        "ii" | "2" => Ok(DescentChoice::DirII(SaturationR::new(c)?)),
        "iii" | "3" => Ok(DescentChoice::DirIII { gamma }),
        other => Err(Error::Config(format!("unknown descent direction '{other}' (expected i, ii or iii)"))),
    }
}

/// A fully resolved run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub preset: Preset,
    pub resolution: (usize, usize),
    pub optimizer: OptimizerConfig,
    pub kernel: KernelChoice,
    pub solver: LinearSolverKind,
    pub out_dir: PathBuf,
    /// Snapshot every `cadence` iterations; the first and last are always written.
    pub cadence: usize,
}

const KEYS: &[(&str, &[&str])] = &[
    ("geometry", &["preset", "init", "nx", "ny"]),
    ("material", &["lambda", "mu", "young", "poisson", "plane"]),
    ("loads", &["fx", "fy", "hx", "hy", "penalty"]),
    ("optimizer", &[
        "direction", "max_iters", "tol", "grad_tol", "rho", "ls_max", "epsilon", "c", "gamma", "kernel", "solver",
    ]),
    ("output", &["dir", "cadence"]),
];

/// Drops a trailing `; comment` or `# comment`. The marker must follow
/// whitespace, so paths like `out#2` survive.
fn strip_inline_comment(v: &str) -> &str {
    v.char_indices()
        .find(|&(i, c)| (c == ';' || c == '#') && v[..i].ends_with([' ', '\t']))
        .map_or(v, |(i, _)| &v[..i])
}

impl RunManifest {
    /// Defaults of a named preset with the DirI direction.
    pub fn for_preset(preset: Preset) -> Self {
        let optimizer = preset.optimizer_config(DescentChoice::DirI);
        Self {
            resolution: preset.resolution,
            preset,
            optimizer,
            kernel: KernelChoice::Auto,
            solver: LinearSolverKind::default(),
            out_dir: PathBuf::from("out"),
            cadence: 5,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_ini_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parses an INI configuration. Unknown sections or keys are errors.
    pub fn from_ini_str(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for (section, props) in ini.iter() {
            let Some(section) = section else {
                if let Some((k, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key '{k}' outside of any section")));
                }
                continue;
            };
            let Some((_, keys)) = KEYS.iter().find(|(s, _)| *s == section) else {
                return Err(Error::Config(format!("unknown section [{section}]")));
            };
            for (k, _) in props.iter() {
                if !keys.contains(&k) {
                    return Err(Error::Config(format!("unknown key '{k}' in [{section}]")));
                }
            }
        }
        let get = |section: &str, key: &str| {
            ini.section(Some(section)).and_then(|p| p.get(key)).map(|v| strip_inline_comment(v).trim())
        };
        fn parse<T: std::str::FromStr>(section: &str, key: &str, v: Option<&str>) -> Result<Option<T>> {
            v.map(|s| s.parse::<T>().map_err(|_| Error::Config(format!("invalid value '{s}' for {section}.{key}"))))
                .transpose()
        }
        let num = |s: &str, k: &str| parse::<f64>(s, k, get(s, k));
        let count = |s: &str, k: &str| parse::<usize>(s, k, get(s, k));

        let mut preset = presets::by_name(get("geometry", "preset").unwrap_or("cantilever"))?;
        if let Some(init) = get("geometry", "init") {
            preset.init = match (preset.init, init.to_ascii_lowercase().as_str()) {
                (InitialGuess::CantileverHoles, "sinusoidal") => InitialGuess::CantileverHoles,
                (_, "half") => InitialGuess::HalfDomain,
                (_, "sinusoidal") => presets::bridge(BridgeInit::Sinusoidal).init,
                (_, other) => return Err(Error::Config(format!("unknown init '{other}'"))),
            };
        }
        let mut resolution = preset.resolution;
        if let Some(nx) = count("geometry", "nx")? {
            resolution.0 = nx;
        }
        if let Some(ny) = count("geometry", "ny")? {
            resolution.1 = ny;
        }

        match (num("material", "lambda")?, num("material", "mu")?) {
            (Some(lambda), Some(mu)) => preset.material = MaterialSource::Lame { lambda, mu },
            (None, None) => {}
            _ => return Err(Error::Config("material.lambda and material.mu must be given together".into())),
        }
        let young = num("material", "young")?;
        let poisson = num("material", "poisson")?;
        let plane = parse::<Plane>("material", "plane", get("material", "plane"))?;
        if young.is_some() || poisson.is_some() || plane.is_some() {
            if matches!(preset.material, MaterialSource::Lame { .. }) && (young.is_none() || poisson.is_none()) {
                return Err(Error::Config("material.young and material.poisson must be given together".into()));
            }
            let (y0, p0, pl0) = match preset.material {
                MaterialSource::Young { young, poisson, plane } => (young, poisson, plane),
                MaterialSource::Lame { .. } => (f64::NAN, f64::NAN, Plane::Strain),
            };
            preset.material = MaterialSource::Young {
                young: young.unwrap_or(y0),
                poisson: poisson.unwrap_or(p0),
                plane: plane.unwrap_or(pl0),
            };
        }
        preset.material.material()?;

        let [mut fx, mut fy] = preset.loads.body;
        let [mut hx, mut hy] = preset.loads.traction;
        for (key, slot) in [("fx", &mut fx), ("fy", &mut fy), ("hx", &mut hx), ("hy", &mut hy)] {
            if let Some(v) = num("loads", key)? {
                *slot = v;
            }
        }
        preset.loads = crate::fem::Loads::new([fx, fy], [hx, hy]);
        if let Some(v) = num("loads", "penalty")? {
            preset.penalty = v;
        }

        if let Some(v) = num("optimizer", "epsilon")? {
            if !(v > 0.0) {
                return Err(Error::Config(format!("optimizer.epsilon must be positive, got {v}")));
            }
            preset.epsilon = v;
        }
        if let Some(v) = num("optimizer", "rho")? {
            preset.rho = v;
        }
        if let Some(v) = num("optimizer", "tol")? {
            preset.tol = v;
        }
        if let Some(v) = count("optimizer", "max_iters")? {
            preset.max_iters = v;
        }
        let c = num("optimizer", "c")?.unwrap_or(SaturationR::default().c);
        let gamma = num("optimizer", "gamma")?.unwrap_or(1e-3);
        let direction = parse_direction(get("optimizer", "direction").unwrap_or("i"), c, gamma)?;
        let mut optimizer = preset.optimizer_config(direction);
        optimizer.grad_tol = num("optimizer", "grad_tol")?;
        if let Some(v) = count("optimizer", "ls_max")? {
            optimizer.ls_max = v;
        }
        optimizer.validate().map_err(|e| Error::Config(e.to_string()))?;
        let kernel = parse::<KernelChoice>("optimizer", "kernel", get("optimizer", "kernel"))?.unwrap_or_default();
        let solver = parse::<LinearSolverKind>("optimizer", "solver", get("optimizer", "solver"))?.unwrap_or_default();

        let cadence = count("output", "cadence")?.unwrap_or(5);
        if cadence == 0 {
            return Err(Error::Config("output.cadence must be at least 1".into()));
        }
        let out_dir = PathBuf::from(get("output", "dir").unwrap_or("out"));
        preset.mesh(resolution.0, resolution.1)?;
        Ok(Self { preset, resolution, optimizer, kernel, solver, out_dir, cadence })
    }

    pub fn kernel(&self) -> HeavisideKernel {
        self.kernel.kernel(self.preset.epsilon)
    }
}
