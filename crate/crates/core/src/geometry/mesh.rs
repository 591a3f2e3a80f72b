//! Fixed-topology triangle meshes and vertex animations.

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Default playback rate of synthetic animation clips.
pub const DEFAULT_FRAME_RATE: f64 = 25.0;

const NORMAL_UNIT_TOLERANCE: f64 = 1e-6;

/// Triangle soup over a shared vertex array.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i as usize >= n) {
                return Err(Error::invalid(format!(
                    "triangle {t} references vertex out of range ({tri:?}, {n} vertices)"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::invalid(format!(
                    "triangle {t} repeats a vertex index ({tri:?})"
                )));
            }
        }
        if let Some((i, _)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("vertex {i} is not finite")));
        }
        Ok(Self {
            vertices,
            triangles,
            normals: None,
        })
    }

    /// Attaches per-vertex normals, which must be unit length.
    pub fn with_normals(mut self, normals: Vec<Vec3>) -> Result<Self> {
        if normals.len() != self.vertices.len() {
            return Err(Error::invalid(format!(
                "{} normals for {} vertices",
                normals.len(),
                self.vertices.len()
            )));
        }
        if let Some(i) = normals
            .iter()
            .position(|n| (n.norm() - 1.0).abs() > NORMAL_UNIT_TOLERANCE)
        {
            return Err(Error::invalid(format!("normal {i} is not unit length")));
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn empty() -> Self {
        Self {
            vertices: Vec::new(),
            triangles: Vec::new(),
            normals: None,
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> Option<&[Vec3]> {
        self.normals.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle_positions(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Same topology, different vertex positions. Normals are dropped.
    pub fn with_positions(&self, positions: Vec<Vec3>) -> Result<Self> {
        if positions.len() != self.vertices.len() {
            return Err(Error::invalid(format!(
                "{} positions for a mesh of {} vertices",
                positions.len(),
                self.vertices.len()
            )));
        }
        Ok(Self {
            vertices: positions,
            triangles: self.triangles.clone(),
            normals: None,
        })
    }

    pub fn transformed(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            vertices: self.vertices.iter().map(f).collect(),
            triangles: self.triangles.clone(),
            normals: None,
        }
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.vertices.first()?;
        Some(self.vertices.iter().fold((first, first), |(lo, hi), v| {
            (lo.inf(v), hi.sup(v))
        }))
    }

    /// Undirected edges, each listed once with the smaller index first, sorted.
    pub fn edges(&self) -> Vec<[u32; 2]> {
        let mut edges: Vec<[u32; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[i, j]| if i < j { [i, j] } else { [j, i] })
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Sorted one-ring neighbours of every vertex.
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for [i, j] in self.edges() {
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Edges used by exactly one triangle.
    pub fn boundary_edges(&self) -> Vec<[u32; 2]> {
        let mut edges: Vec<[u32; 2]> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [[a, b], [b, c], [c, a]])
            .map(|[i, j]| if i < j { [i, j] } else { [j, i] })
            .collect();
        edges.sort_unstable();
        let mut boundary = Vec::new();
        let mut i = 0;
        while i < edges.len() {
            let mut j = i + 1;
            while j < edges.len() && edges[j] == edges[i] {
                j += 1;
            }
            if j - i == 1 {
                boundary.push(edges[i]);
            }
            i = j;
        }
        boundary
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangle_positions(t);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }
}

/// Per-vertex normals with a flag for vertices whose incident area vanishes.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexNormals {
    pub normals: Vec<Vec3>,
    /// `true` where the normal is an arbitrary placeholder.
    pub unreliable: Vec<bool>,
}

/// Area-weighted vertex normals.
///
/// Each triangle adds its unnormalized face normal (twice its area times the
/// unit normal) to its three corners. Isolated vertices and vertices whose
/// star has zero area receive `+z` and are flagged unreliable.
pub fn compute_vertex_normals(mesh: &TriangleMesh) -> VertexNormals {
    let mut acc = vec![Vec3::zeros(); mesh.vertex_count()];
    for t in 0..mesh.triangles().len() {
        let [a, b, c] = mesh.triangle_positions(t);
        let n = (b - a).cross(&(c - a));
        for &i in &mesh.triangles()[t] {
            acc[i as usize] += n;
        }
    }
    let mut unreliable = vec![false; acc.len()];
    let normals = acc
        .into_iter()
        .enumerate()
        .map(|(i, n)| {
            let len = n.norm();
            if len > f64::MIN_POSITIVE && len.is_finite() {
                n / len
            } else {
                unreliable[i] = true;
                Vec3::z()
            }
        })
        .collect();
    VertexNormals {
        normals,
        unreliable,
    }
}

/// A mesh animated by per-frame vertex positions.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimationClip {
    mesh: TriangleMesh,
    frames: Vec<Vec<Vec3>>,
    frame_rate: f64,
}

impl AnimationClip {
    pub fn new(mesh: TriangleMesh, frames: Vec<Vec<Vec3>>, frame_rate: f64) -> Result<Self> {
        if !(frame_rate > 0.0 && frame_rate.is_finite()) {
            return Err(Error::invalid(format!("frame rate {frame_rate} must be positive")));
        }
        if frames.is_empty() {
            return Err(Error::invalid("animation has no frames"));
        }
        let n = mesh.vertex_count();
        if let Some(f) = frames.iter().position(|f| f.len() != n) {
            return Err(Error::invalid(format!(
                "frame {f} has {} vertices, mesh has {n}",
                frames[f].len()
            )));
        }
        Ok(Self {
            mesh,
            frames,
            frame_rate,
        })
    }

    /// Clip at the default frame rate.
    pub fn from_frames(mesh: TriangleMesh, frames: Vec<Vec<Vec3>>) -> Result<Self> {
        Self::new(mesh, frames, DEFAULT_FRAME_RATE)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn frames(&self) -> &[Vec<Vec3>] {
        &self.frames
    }

    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn frame_rate(&self) -> f64 {
        self.frame_rate
    }

    pub fn frame(&self, index: usize) -> Result<&[Vec3]> {
        self.frames.get(index).map(Vec::as_slice).ok_or_else(|| {
            Error::invalid(format!(
                "frame {index} out of range ({} frames)",
                self.frames.len()
            ))
        })
    }

    /// The base topology posed at `index`.
    pub fn frame_mesh(&self, index: usize) -> Result<TriangleMesh> {
        self.mesh.with_positions(self.frame(index)?.to_vec())
    }

    /// Applies `f` to every vertex of every frame.
    pub fn map_positions(&self, f: impl Fn(&Vec3) -> Vec3) -> Self {
        Self {
            mesh: self.mesh.transformed(&f),
            frames: self
                .frames
                .iter()
                .map(|frame| frame.iter().map(&f).collect())
                .collect(),
            frame_rate: self.frame_rate,
        }
    }
}

/// Per-vertex motion `frames[dst][i] - frames[src][i]`.
pub fn vertex_displacements(clip: &AnimationClip, src: usize, dst: usize) -> Result<Vec<Vec3>> {
    let from = clip.frame(src)?;
    let to = clip.frame(dst)?;
    Ok(from.iter().zip(to).map(|(a, b)| b - a).collect())
}
