//! Structured triangulation of a rectangular hold-all domain with labelled
//! boundary segments.
//!
//! Vertices are laid out row by row, each grid cell is split into two
//! counterclockwise triangles and the diagonal alternates with the parity of
//! `i + j`. For an even number of columns this makes the triangulation
//! mirror-symmetric about the vertical centerline.
//!
//! P2 nodes are numbered vertices first, then one midpoint node per edge:
//! the midpoint of edge `e` is node `n_vertices + e`.

use std::collections::HashMap;

use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-12;

/// Axis-aligned rectangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Rect {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        if !(x_min < x_max && y_min < y_max) {
            return Err(Error::InvalidInput(format!(
                "degenerate rectangle [{x_min}, {x_max}] x [{y_min}, {y_max}]"
            )));
        }
        Ok(Self { x_min, x_max, y_min, y_max })
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// Boundary part of the hold-all domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryLabel {
    /// Part of the boundary where the displacement may be clamped.
    SigmaD,
    /// Loaded part of the boundary.
    GammaN,
    /// Traction-free remainder.
    Sigma,
}

/// Side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Side::Left => [-1.0, 0.0],
            Side::Right => [1.0, 0.0],
            Side::Bottom => [0.0, -1.0],
            Side::Top => [0.0, 1.0],
        }
    }
}

/// A labelled segment `[from, to]` of one side, parametrized by the
/// coordinate running along that side (`y` for left/right, `x` for
/// bottom/top).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySegment {
    pub label: BoundaryLabel,
    pub side: Side,
    pub from: f64,
    pub to: f64,
}

impl BoundarySegment {
    pub fn new(label: BoundaryLabel, side: Side, from: f64, to: f64) -> Self {
        Self { label, side, from, to }
    }
}

/// Mesh edge with its optional boundary label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub label: Option<BoundaryLabel>,
    pub side: Option<Side>,
}

/// A boundary edge returned by [`Mesh::boundary_edges`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub vertices: [usize; 2],
    pub normal: [f64; 2],
    pub length: f64,
}

#[derive(Debug, Clone)]
pub struct Mesh {
    rect: Rect,
    nx: usize,
    ny: usize,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Local edge `k` of a triangle joins local vertices `k` and `(k + 1) % 3`.
    triangle_edges: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    edge_triangles: Vec<Vec<usize>>,
}

impl Mesh {
    /// Builds the structured mesh and labels its boundary edges. Boundary
    /// edges not covered by any segment are labelled [`BoundaryLabel::Sigma`].
    pub fn build(rect: Rect, nx: usize, ny: usize, segments: &[BoundarySegment]) -> Result<Self> {
        if nx < 1 || ny < 1 {
            return Err(Error::InvalidInput(format!("mesh resolution {nx}x{ny} has no cells")));
        }
        let dx = rect.width() / nx as f64;
        let dy = rect.height() / ny as f64;
        for seg in segments {
            check_alignment(&rect, dx, dy, seg)?;
        }

        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            let y = if j == ny { rect.y_max } else { rect.y_min + j as f64 * dy };
            for i in 0..=nx {
                let x = if i == nx { rect.x_max } else { rect.x_min + i as f64 * dx };
                vertices.push([x, y]);
            }
        }

        let vid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut triangles = Vec::with_capacity(2 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                if (i + j) % 2 == 0 {
                    triangles.push([a, b, c]);
                    triangles.push([a, c, d]);
                } else {
                    triangles.push([a, b, d]);
                    triangles.push([b, c, d]);
                }
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * nx * ny + nx + ny);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<Vec<usize>> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for k in 0..3 {
                let (p, q) = (tri[k], tri[(k + 1) % 3]);
                let key = (p.min(q), p.max(q));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge { vertices: [key.0, key.1], label: None, side: None });
                    edge_triangles.push(Vec::with_capacity(2));
                    edges.len() - 1
                });
                edge_triangles[e].push(t);
                local[k] = e;
            }
            triangle_edges.push(local);
        }

        for (e, edge) in edges.iter_mut().enumerate() {
            if edge_triangles[e].len() != 1 {
                continue;
            }
            let [p, q] = edge.vertices.map(|v| vertices[v]);
            let side = side_of(&rect, p, q);
            edge.side = Some(side);
            let (s0, s1) = match side {
                Side::Left | Side::Right => (p[1].min(q[1]), p[1].max(q[1])),
                Side::Bottom | Side::Top => (p[0].min(q[0]), p[0].max(q[0])),
            };
            let scale = rect.width().max(rect.height());
            edge.label = Some(
                segments
                    .iter()
                    .find(|seg| {
                        seg.side == side
                            && s0 >= seg.from.min(seg.to) - ALIGN_TOL * scale
                            && s1 <= seg.from.max(seg.to) + ALIGN_TOL * scale
                    })
                    .map_or(BoundaryLabel::Sigma, |seg| seg.label),
            );
        }

        Ok(Self { rect, nx, ny, vertices, triangles, triangle_edges, edges, edge_triangles })
    }

    pub fn rect(&self) -> Rect {
        self.rect
    }

    pub fn resolution(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    /// Number of triangles sharing edge `e` (1 on the boundary, 2 inside).
    pub fn edge_multiplicity(&self, e: usize) -> usize {
        self.edge_triangles[e].len()
    }

    pub fn n_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    /// The six P2 nodes of triangle `t`: three vertices followed by the
    /// midpoints of edges (0,1), (1,2), (2,0).
    pub fn p2_nodes(&self, t: usize) -> [usize; 6] {
        let [a, b, c] = self.triangles[t];
        let nv = self.vertices.len();
        let [e0, e1, e2] = self.triangle_edges[t];
        [a, b, c, nv + e0, nv + e1, nv + e2]
    }

    /// Coordinates of a P2 node.
    pub fn p2_node_coords(&self, node: usize) -> [f64; 2] {
        let nv = self.vertices.len();
        if node < nv {
            self.vertices[node]
        } else {
            let [p, q] = self.edges[node - nv].vertices.map(|v| self.vertices[v]);
            [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]
        }
    }

    pub fn triangle_coords(&self, t: usize) -> [[f64; 2]; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    /// Signed area of triangle `t` (positive for counterclockwise order).
    pub fn triangle_area(&self, t: usize) -> f64 {
        signed_area(&self.triangle_coords(t))
    }

    pub fn boundary_edges(&self, label: BoundaryLabel) -> Vec<BoundaryEdge> {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == Some(label))
            .map(|(i, e)| {
                let [p, q] = e.vertices.map(|v| self.vertices[v]);
                BoundaryEdge {
                    edge: i,
                    vertices: e.vertices,
                    normal: e.side.map_or([0.0, 0.0], Side::outward_normal),
                    length: ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt(),
                }
            })
            .collect()
    }

    /// P2 nodes (vertices and midpoints) lying on edges with `label`, sorted.
    pub fn labelled_p2_nodes(&self, label: BoundaryLabel) -> Vec<usize> {
        let nv = self.vertices.len();
        let mut nodes: Vec<usize> = self
            .boundary_edges(label)
            .iter()
            .flat_map(|be| [be.vertices[0], be.vertices[1], nv + be.edge])
            .collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Vertices lying on edges with `label`, sorted.
    pub fn labelled_vertices(&self, label: BoundaryLabel) -> Vec<usize> {
        let mut nodes: Vec<usize> =
            self.boundary_edges(label).iter().flat_map(|be| be.vertices).collect();
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// Vertex adjacency lists (each vertex's edge neighbours, sorted).
    pub fn vertex_neighbours(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for e in &self.edges {
            adj[e.vertices[0]].push(e.vertices[1]);
            adj[e.vertices[1]].push(e.vertices[0]);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// Index of the vertex at grid position `(i, j)`.
    pub fn grid_vertex(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    /// For each vertex, the vertex obtained by reflecting about the vertical
    /// centerline of the rectangle.
    pub fn mirror_vertex_map(&self) -> Vec<usize> {
        (0..self.vertices.len())
            .map(|v| {
                let (i, j) = (v % (self.nx + 1), v / (self.nx + 1));
                self.grid_vertex(self.nx - i, j)
            })
            .collect()
    }
}

pub fn signed_area(p: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
}

fn side_of(rect: &Rect, p: [f64; 2], q: [f64; 2]) -> Side {
    if p[0] == rect.x_min && q[0] == rect.x_min {
        Side::Left
    } else if p[0] == rect.x_max && q[0] == rect.x_max {
        Side::Right
    } else if p[1] == rect.y_min && q[1] == rect.y_min {
        Side::Bottom
    } else {
        Side::Top
    }
}

fn check_alignment(rect: &Rect, dx: f64, dy: f64, seg: &BoundarySegment) -> Result<()> {
    let (origin, step, lo, hi) = match seg.side {
        Side::Left | Side::Right => (rect.y_min, dy, rect.y_min, rect.y_max),
        Side::Bottom | Side::Top => (rect.x_min, dx, rect.x_min, rect.x_max),
    };
    let scale = (hi - lo).abs();
    for v in [seg.from, seg.to] {
        let k = ((v - origin) / step).round();
        let in_range = v >= lo - ALIGN_TOL * scale && v <= hi + ALIGN_TOL * scale;
        if !in_range || (origin + k * step - v).abs() > ALIGN_TOL * scale {
            return Err(Error::MisalignedBoundary {
                label: seg.label,
                side: seg.side,
                from: seg.from,
                to: seg.to,
            });
        }
    }
    Ok(())
}
