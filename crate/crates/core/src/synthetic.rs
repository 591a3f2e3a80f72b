//! Procedural meshes and animation clips for tests, benchmarks and demos.

use std::collections::HashMap;

use crate::error::Result;
use crate::geometry::{AnimationClip, RigidTransform, TriangleMesh, Vec3};

const GOLDEN: f64 = 1.618_033_988_749_895;

const ICOSAHEDRON_FACES: [[u32; 3]; 20] = [
    [0, 11, 5],
    [0, 5, 1],
    [0, 1, 7],
    [0, 7, 10],
    [0, 10, 11],
    [1, 5, 9],
    [5, 11, 4],
    [11, 10, 2],
    [10, 7, 6],
    [7, 1, 8],
    [3, 9, 4],
    [3, 4, 2],
    [3, 2, 6],
    [3, 6, 8],
    [3, 8, 9],
    [4, 9, 5],
    [2, 4, 11],
    [6, 2, 10],
    [8, 6, 7],
    [9, 8, 1],
];

/// Unit-sphere icosphere vertex directions and faces after `subdivisions`
/// rounds of edge-midpoint subdivision (12, 42, 162, ... vertices).
pub fn icosphere_directions(subdivisions: u32) -> (Vec<Vec3>, Vec<[u32; 3]>) {
    let mut verts: Vec<Vec3> = [
        (-1.0, GOLDEN, 0.0),
        (1.0, GOLDEN, 0.0),
        (-1.0, -GOLDEN, 0.0),
        (1.0, -GOLDEN, 0.0),
        (0.0, -1.0, GOLDEN),
        (0.0, 1.0, GOLDEN),
        (0.0, -1.0, -GOLDEN),
        (0.0, 1.0, -GOLDEN),
        (GOLDEN, 0.0, -1.0),
        (GOLDEN, 0.0, 1.0),
        (-GOLDEN, 0.0, -1.0),
        (-GOLDEN, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces = ICOSAHEDRON_FACES.to_vec();
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        for &[a, b, c] in &faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend_from_slice(&[[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    (verts, faces)
}

/// Outward-oriented icosphere centered at the origin.
pub fn icosphere(subdivisions: u32, radius: f64) -> TriangleMesh {
    let (dirs, faces) = icosphere_directions(subdivisions);
    TriangleMesh::new(dirs.into_iter().map(|d| d * radius).collect(), faces)
        .expect("icosphere topology is valid")
}

/// Closed tube along `+z` from `z = 0` to `z = length`: `rings` circles of
/// `segments` vertices, plus one center vertex per cap.
pub fn capped_tube(radius: f64, length: f64, rings: usize, segments: usize) -> TriangleMesh {
    assert!(rings >= 2 && segments >= 3);
    let mut vertices = Vec::with_capacity(rings * segments + 2);
    for r in 0..rings {
        let z = length * r as f64 / (rings - 1) as f64;
        for s in 0..segments {
            let a = std::f64::consts::TAU * s as f64 / segments as f64;
            vertices.push(Vec3::new(radius * a.cos(), radius * a.sin(), z));
        }
    }
    let idx = |r: usize, s: usize| (r * segments + s % segments) as u32;
    let mut triangles = Vec::new();
    for r in 0..rings - 1 {
        for s in 0..segments {
            triangles.push([idx(r, s), idx(r, s + 1), idx(r + 1, s + 1)]);
            triangles.push([idx(r, s), idx(r + 1, s + 1), idx(r + 1, s)]);
        }
    }
    let bottom = vertices.len() as u32;
    vertices.push(Vec3::zeros());
    let top = vertices.len() as u32;
    vertices.push(Vec3::new(0.0, 0.0, length));
    for s in 0..segments {
        triangles.push([bottom, idx(0, s + 1), idx(0, s)]);
        triangles.push([top, idx(rings - 1, s), idx(rings - 1, s + 1)]);
    }
    TriangleMesh::new(vertices, triangles).expect("tube topology is valid")
}

/// Bends the `+z` axis into a circular arc in the xz-plane with the given
/// curvature (1/m). Lengths along the axis are preserved.
pub fn bend_point(p: &Vec3, curvature: f64) -> Vec3 {
    if curvature == 0.0 {
        return *p;
    }
    let rho = 1.0 / curvature;
    let theta = p.z * curvature;
    let arm = rho - p.x;
    Vec3::new(rho - arm * theta.cos(), p.y, arm * theta.sin())
}

/// Two-frame clip: the rest mesh and the mesh bent with `curvature`.
pub fn bent_clip(mesh: &TriangleMesh, curvature: f64) -> Result<AnimationClip> {
    let rest = mesh.vertices().to_vec();
    let bent = rest.iter().map(|p| bend_point(p, curvature)).collect();
    AnimationClip::from_frames(mesh.clone(), vec![rest, bent])
}

/// Clip whose frame `k` is the base mesh moved by `k * step`.
pub fn translating_clip(mesh: &TriangleMesh, step: Vec3, frames: usize) -> Result<AnimationClip> {
    animated_clip(mesh, frames, |k, p| p + step * k as f64)
}

/// Clip whose frame `k` is `motion^k` applied to the base mesh.
pub fn rigid_clip(mesh: &TriangleMesh, motion: &RigidTransform, frames: usize) -> Result<AnimationClip> {
    let mut poses = vec![RigidTransform::identity()];
    for k in 1..frames {
        poses.push(motion.compose(&poses[k - 1]));
    }
    animated_clip(mesh, frames, |k, p| poses[k].apply(p))
}

/// Clip with frame `k` given by `f(k, rest_position)`.
pub fn animated_clip(
    mesh: &TriangleMesh,
    frames: usize,
    f: impl Fn(usize, &Vec3) -> Vec3,
) -> Result<AnimationClip> {
    let frames = (0..frames)
        .map(|k| mesh.vertices().iter().map(|p| f(k, p)).collect())
        .collect();
    AnimationClip::from_frames(mesh.clone(), frames)
}

/// Smooth non-rigid wobble: each frame bends and sways the mesh a little more.
pub fn wobble_clip(mesh: &TriangleMesh, frames: usize, amplitude: f64) -> Result<AnimationClip> {
    animated_clip(mesh, frames, |k, p| {
        let s = amplitude * k as f64;
        p + Vec3::new(
            s * (2.0 * p.z).sin(),
            s * 0.5 * (1.5 * p.x + 0.3).cos(),
            s * 0.25 * (p.y * 2.0).sin(),
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn signed_volume(mesh: &TriangleMesh) -> f64 {
        (0..mesh.triangles().len())
            .map(|t| {
                let [a, b, c] = mesh.triangle_positions(t);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn icosphere_counts_and_orientation() {
        for (sub, n) in [(0, 12), (1, 42), (2, 162), (3, 642)] {
            let m = icosphere(sub, 1.0);
            assert_eq!(m.vertex_count(), n);
            assert!(m.boundary_edges().is_empty());
            assert!(signed_volume(&m) > 0.0);
        }
    }

    #[test]
    fn tube_is_closed_and_outward() {
        let tube = capped_tube(0.1, 1.0, 10, 12);
        assert_eq!(tube.vertex_count(), 122);
        assert!(tube.boundary_edges().is_empty());
        let v = signed_volume(&tube.transformed(|p| p - Vec3::new(0.0, 0.0, 0.5)));
        assert!(v > 0.0);
    }

    #[test]
    fn bend_preserves_axis_length() {
        let a = bend_point(&Vec3::new(0.0, 0.0, 0.3), 2.0);
        let b = bend_point(&Vec3::new(0.0, 0.0, 0.31), 2.0);
        assert!(((a - b).norm() - 0.01).abs() < 1e-5);
        assert_eq!(bend_point(&Vec3::new(0.2, 0.1, 0.0), 2.0), Vec3::new(0.2, 0.1, 0.0));
    }
}
