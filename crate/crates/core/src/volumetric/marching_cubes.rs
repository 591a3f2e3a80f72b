use std::collections::HashMap;

use rayon::prelude::*;

use crate::geometry::{TriangleMesh, Vec3};
use crate::volumetric::grid::{TsdfGrid, VoxelCoord};
use crate::volumetric::mc_tables::{CORNERS, EDGES, TRI_TABLE};

/// Where an output vertex lives: strictly inside a cell edge, or on a grid
/// point whose value is exactly zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum VertexKey {
    Corner(VoxelCoord),
    Edge(VoxelCoord, u8),
}

fn offset(c: &VoxelCoord, d: &[i32; 3]) -> VoxelCoord {
    [c[0] + d[0], c[1] + d[1], c[2] + d[2]]
}

/// Zero level set of a sparse TSDF (negative inside).
///
/// Only cells with all eight corners stored are polygonized. Vertices on
/// shared edges are merged, so closed level sets give closed meshes.
/// Triangles are wound counter-clockwise seen from outside.
pub fn marching_cubes(grid: &TsdfGrid) -> TriangleMesh {
    let layout = grid.layout;
    let cells: Vec<&VoxelCoord> = grid.coords().collect();
    let per_cell: Vec<Vec<[(VertexKey, Vec3); 3]>> = cells
        .par_iter()
        .map(|base| {
            let mut values = [0.0f64; 8];
            for (i, d) in CORNERS.iter().enumerate() {
                match grid.get(&offset(base, d)) {
                    Some(v) => values[i] = *v,
                    None => return Vec::new(),
                }
            }
            let case = values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v < 0.0)
                .fold(0usize, |acc, (i, _)| acc | (1 << i));
            let row = &TRI_TABLE[case];
            let vertex = |edge: usize| -> (VertexKey, Vec3) {
                let [i, j] = EDGES[edge];
                let (ci, cj) = (offset(base, &CORNERS[i]), offset(base, &CORNERS[j]));
                let (vi, vj) = (values[i], values[j]);
                let t = vi / (vi - vj);
                let (pi, pj) = (layout.center(&ci), layout.center(&cj));
                if t <= 0.0 {
                    (VertexKey::Corner(ci), pi)
                } else if t >= 1.0 {
                    (VertexKey::Corner(cj), pj)
                } else {
                    let (lo, axis) = edge_key(&ci, &cj);
                    (VertexKey::Edge(lo, axis), pi + (pj - pi) * t)
                }
            };
            row.chunks_exact(3)
                .take_while(|tri| tri[0] >= 0)
                .map(|tri| {
                    // Table winding faces inward for this corner layout.
                    [
                        vertex(tri[0] as usize),
                        vertex(tri[2] as usize),
                        vertex(tri[1] as usize),
                    ]
                })
                .collect()
        })
        .collect();

    let mut ids: HashMap<VertexKey, u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for tri in per_cell.into_iter().flatten() {
        let idx = tri.map(|(key, pos)| {
            *ids.entry(key).or_insert_with(|| {
                vertices.push(pos);
                (vertices.len() - 1) as u32
            })
        });
        if idx[0] != idx[1] && idx[1] != idx[2] && idx[0] != idx[2] {
            triangles.push(idx);
        }
    }
    TriangleMesh::new(vertices, triangles).expect("marching cubes emits valid indices")
}

/// Edge identified by its lower endpoint and axis.
fn edge_key(a: &VoxelCoord, b: &VoxelCoord) -> (VoxelCoord, u8) {
    let axis = (0..3).find(|&k| a[k] != b[k]).expect("edge endpoints differ");
    let lo = if a[axis] < b[axis] { *a } else { *b };
    (lo, axis as u8)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volumetric::grid::GridLayout;

    fn cell_grid(values: [f64; 8]) -> TsdfGrid {
        let layout = GridLayout::with_voxel_size(1.0).unwrap();
        TsdfGrid::from_entries(layout, CORNERS.iter().zip(values).map(|(c, v)| (*c, v))).unwrap()
    }

    #[test]
    fn single_negative_corner() {
        let mut values = [1.0; 8];
        values[0] = -1.0;
        let mesh = marching_cubes(&cell_grid(values));
        assert_eq!(mesh.triangles().len(), 1);
        let mut verts: Vec<Vec3> = mesh.vertices().to_vec();
        verts.sort_by(|a, b| a.as_slice().partial_cmp(b.as_slice()).unwrap());
        assert_eq!(
            verts,
            vec![
                Vec3::new(0.0, 0.0, 0.5),
                Vec3::new(0.0, 0.5, 0.0),
                Vec3::new(0.5, 0.0, 0.0)
            ]
        );
        // normal points away from the inside corner
        let [a, b, c] = mesh.triangle_positions(0);
        let n = (b - a).cross(&(c - a));
        assert!(n.dot(&Vec3::new(1.0, 1.0, 1.0)) > 0.0);
    }

    #[test]
    fn all_positive_is_empty() {
        assert!(marching_cubes(&cell_grid([0.5; 8])).is_empty());
    }

    #[test]
    fn missing_corner_skips_cell() {
        let layout = GridLayout::with_voxel_size(1.0).unwrap();
        let mut values = [1.0; 8];
        values[0] = -1.0;
        let grid = TsdfGrid::from_entries(
            layout,
            CORNERS.iter().zip(values).skip(1).map(|(c, v)| (*c, v)),
        )
        .unwrap();
        assert!(marching_cubes(&grid).is_empty());
    }

    #[test]
    fn zero_corner_does_not_make_degenerate_triangles() {
        let mut values = [1.0; 8];
        values[0] = 0.0;
        values[6] = -1.0;
        let mesh = marching_cubes(&cell_grid(values));
        for t in mesh.triangles() {
            assert!(t[0] != t[1] && t[1] != t[2] && t[0] != t[2]);
        }
    }
}
