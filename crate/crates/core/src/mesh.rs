//! Closed, oriented, genus-0 triangle meshes.
//!
//! A [`TriMesh`] can only be obtained through [`TriMesh::build`] (or the
//! readers in [`io`]), which checks every topological and geometric
//! invariant the downstream geometry relies on.

pub mod io;

use std::collections::HashMap;

use nalgebra::Vector3;
use thiserror::Error;

pub use io::{read_mesh, write_mesh, MeshFormat};

pub type Vec3 = Vector3<f64>;

/// Relative threshold for degenerate faces, in units of squared mean edge length.
pub const DEGENERATE_AREA_FACTOR: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh has no vertices or no faces")]
    Empty,
    #[error("face {face} references vertex {index} but only {count} vertices exist")]
    IndexOutOfRange { face: usize, index: usize, count: usize },
    #[error("edge ({a}, {b}) is shared by {count} faces")]
    NonManifoldEdge { a: usize, b: usize, count: usize },
    #[error("vertex {vertex} is not manifold ({reason})")]
    NonManifoldVertex { vertex: usize, reason: &'static str },
    #[error("edge ({a}, {b}) lies on an open boundary")]
    OpenBoundary { a: usize, b: usize },
    #[error("Euler characteristic is {chi}, expected 2 (sphere topology)")]
    WrongGenus { chi: i64 },
    #[error("edge ({a}, {b}) has the same direction in both adjacent faces")]
    InconsistentOrientation { a: usize, b: usize },
    #[error("signed volume {volume} is not positive; faces are oriented inwards")]
    InvertedOrientation { volume: f64 },
    #[error("face {face} is degenerate (area {area:e})")]
    DegenerateFace { face: usize, area: f64 },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error on {path:?}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Closed oriented triangle mesh of sphere topology.
///
/// Faces are counterclockwise when seen from outside. Immutable once built.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    /// Undirected edges with `e[0] < e[1]`.
    edges: Vec<[usize; 2]>,
    /// For each edge, the face containing `e[0] -> e[1]` and the face containing `e[1] -> e[0]`.
    edge_faces: Vec<[usize; 2]>,
    /// CSR one-ring adjacency.
    nbr_offsets: Vec<usize>,
    nbrs: Vec<usize>,
}

impl TriMesh {
    /// Builds a mesh and checks all invariants.
    pub fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        if vertices.is_empty() || faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let nv = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= nv {
                    return Err(MeshError::IndexOutOfRange { face: fi, index: i, count: nv });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::DegenerateFace { face: fi, area: 0.0 });
            }
        }

        // Undirected edge -> (faces holding a->b with a<b, faces holding b->a).
        let mut edge_map: HashMap<(usize, usize), (Vec<usize>, Vec<usize>)> = HashMap::new();
        let mut edge_order: Vec<(usize, usize)> = Vec::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let entry = edge_map.entry(key).or_insert_with(|| {
                    edge_order.push(key);
                    (Vec::new(), Vec::new())
                });
                if a < b {
                    entry.0.push(fi);
                } else {
                    entry.1.push(fi);
                }
            }
        }

        let mut edges = Vec::with_capacity(edge_order.len());
        let mut edge_faces = Vec::with_capacity(edge_order.len());
        for key in &edge_order {
            let (fwd, bwd) = &edge_map[key];
            let count = fwd.len() + bwd.len();
            if count == 1 {
                return Err(MeshError::OpenBoundary { a: key.0, b: key.1 });
            }
            if count > 2 {
                return Err(MeshError::NonManifoldEdge { a: key.0, b: key.1, count });
            }
            if fwd.len() != 1 {
                return Err(MeshError::InconsistentOrientation { a: key.0, b: key.1 });
            }
            edges.push([key.0, key.1]);
            edge_faces.push([fwd[0], bwd[0]]);
        }

        let (nbr_offsets, nbrs) = build_one_rings(nv, &faces)?;

        let chi = nv as i64 - edges.len() as i64 + faces.len() as i64;
        if chi != 2 {
            return Err(MeshError::WrongGenus { chi });
        }

        let mesh = Self { vertices, faces, edges, edge_faces, nbr_offsets, nbrs };
        mesh.check_geometry()?;
        Ok(mesh)
    }

    /// Same connectivity, new positions. Only the geometric invariants are re-checked.
    pub fn with_positions(&self, vertices: Vec<Vec3>) -> Result<Self, MeshError> {
        assert_eq!(vertices.len(), self.vertices.len(), "vertex count must not change");
        let mesh = Self { vertices, ..self.clone_topology() };
        mesh.check_geometry()?;
        Ok(mesh)
    }

    fn clone_topology(&self) -> Self {
        Self {
            vertices: Vec::new(),
            faces: self.faces.clone(),
            edges: self.edges.clone(),
            edge_faces: self.edge_faces.clone(),
            nbr_offsets: self.nbr_offsets.clone(),
            nbrs: self.nbrs.clone(),
        }
    }

    fn check_geometry(&self) -> Result<(), MeshError> {
        let mean_edge = self.mean_edge_length();
        let min_area = DEGENERATE_AREA_FACTOR * mean_edge * mean_edge;
        for fi in 0..self.faces.len() {
            let area = self.face_area(fi);
            if !(area > min_area) {
                return Err(MeshError::DegenerateFace { face: fi, area });
            }
        }
        let volume = self.signed_volume();
        if !(volume > 0.0) {
            return Err(MeshError::InvertedOrientation { volume });
        }
        Ok(())
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Faces on either side of each edge, see [`TriMesh::edges`].
    pub fn edge_faces(&self) -> &[[usize; 2]] {
        &self.edge_faces
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    /// Vertices adjacent to `v`, in counterclockwise order seen from outside.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.nbrs[self.nbr_offsets[v]..self.nbr_offsets[v + 1]]
    }

    pub fn face_positions(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized face normal `(b - a) x (c - a)`, twice the area in length.
    pub fn face_area_vector(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_positions(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_area_vector(f).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Signed volume by the tetrahedral fan about the origin.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])))
            .sum::<f64>()
            / 6.0
    }

    pub fn mean_edge_length(&self) -> f64 {
        let total: f64 = self
            .edges
            .iter()
            .map(|&[a, b]| (self.vertices[a] - self.vertices[b]).norm())
            .sum();
        total / self.edges.len() as f64
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        (self.vertices[a] - self.vertices[b]).norm()
    }

    /// Smallest interior angle over all faces, in radians.
    pub fn min_angle(&self) -> f64 {
        (0..self.faces.len())
            .flat_map(|f| face_angles(&self.face_positions(f)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Largest vertex distance from the centroid of the vertex set.
    pub fn diameter_bound(&self) -> f64 {
        let c = self.vertices.iter().sum::<Vec3>() / self.vertices.len() as f64;
        self.vertices.iter().map(|v| (v - c).norm()).fold(0.0, f64::max) * 2.0
    }

    /// Applies `f` to every vertex position.
    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<Self, MeshError> {
        self.with_positions(self.vertices.iter().map(f).collect())
    }

    pub fn translated(&self, offset: Vec3) -> Result<Self, MeshError> {
        self.map_positions(|v| v + offset)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self, MeshError> {
        self.map_positions(|v| v * factor)
    }
}

/// Interior angles of a triangle at its three corners.
pub fn face_angles(p: &[Vec3; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for k in 0..3 {
        let u = p[(k + 1) % 3] - p[k];
        let v = p[(k + 2) % 3] - p[k];
        out[k] = u.cross(&v).norm().atan2(u.dot(&v));
    }
    out
}

/// Builds ordered one-rings and rejects pinched vertices.
fn build_one_rings(nv: usize, faces: &[[usize; 3]]) -> Result<(Vec<usize>, Vec<usize>), MeshError> {
    // For vertex v, each incident face (v, a, b) contributes the arc a -> b.
    let mut arcs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for f in faces {
        for k in 0..3 {
            arcs[f[k]].push((f[(k + 1) % 3], f[(k + 2) % 3]));
        }
    }
    let mut offsets = Vec::with_capacity(nv + 1);
    let mut nbrs = Vec::with_capacity(faces.len() * 3);
    offsets.push(0);
    for (v, ring) in arcs.iter().enumerate() {
        if ring.is_empty() {
            return Err(MeshError::NonManifoldVertex { vertex: v, reason: "unreferenced" });
        }
        let next: HashMap<usize, usize> = ring.iter().copied().collect();
        if next.len() != ring.len() {
            return Err(MeshError::NonManifoldVertex { vertex: v, reason: "repeated arc" });
        }
        let start = ring[0].0;
        let mut cur = start;
        for _ in 0..ring.len() {
            nbrs.push(cur);
            cur = match next.get(&cur) {
                Some(&n) => n,
                None => return Err(MeshError::NonManifoldVertex { vertex: v, reason: "open fan" }),
            };
        }
        if cur != start {
            return Err(MeshError::NonManifoldVertex { vertex: v, reason: "pinched fan" });
        }
        offsets.push(nbrs.len());
    }
    Ok((offsets, nbrs))
}
