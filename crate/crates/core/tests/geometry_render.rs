use nalgebra::UnitQuaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use volmotion_core::geometry::{
    compute_vertex_normals, dqb_blend_dual, random_rotation, DualQuaternion, Intrinsics, PinholeCamera,
    RigidTransform, TriangleMesh, Vec3,
};
use volmotion_core::render::{render_depth, render_scene_flow, sample_camera_rig};
use volmotion_core::synthetic::{icosphere, wobble_clip};
use volmotion_core::volumetric::{
    build_hierarchy, fuse_tsdf, marching_cubes, projective_tsdf, GridLayout, TsdfGrid, HIERARCHY_VOXEL_SIZES,
    TRUNCATION_VOXELS,
};

fn rand_vec(rng: &mut impl Rng, s: f64) -> Vec3 {
    Vec3::new(rng.random_range(-s..s), rng.random_range(-s..s), rng.random_range(-s..s))
}

fn small_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 252.0,
        fy: 252.0,
        cx: 159.5,
        cy: 143.5,
        width: 320,
        height: 288,
    }
}

/// Unit cube whose face diagonals all run between even-parity corners, so
/// every corner sees its three faces with equal area.
fn unit_cube() -> TriangleMesh {
    let corners: Vec<Vec3> = (0..8)
        .map(|i| Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let even = |i: u32| ((i & 1) + ((i >> 1) & 1) + ((i >> 2) & 1)) % 2 == 0;
    let mut triangles = Vec::new();
    for axis in 0..3 {
        for side in 0..2u32 {
            let face: Vec<u32> = (0..8u32).filter(|&i| (i >> axis) & 1 == side).collect();
            let diag: Vec<u32> = face.iter().copied().filter(|&i| even(i)).collect();
            let off: Vec<u32> = face.iter().copied().filter(|&i| !even(i)).collect();
            let mut outward = Vec3::zeros();
            outward[axis] = if side == 1 { 1.0 } else { -1.0 };
            for &o in &off {
                let mut t = [diag[0], diag[1], o];
                let [a, b, c] = t.map(|i| corners[i as usize]);
                if (b - a).cross(&(c - a)).dot(&outward) < 0.0 {
                    t.swap(0, 1);
                }
                triangles.push(t);
            }
        }
    }
    TriangleMesh::new(corners, triangles).unwrap()
}

#[test]
fn cube_corner_normals_are_diagonal() {
    let cube = unit_cube();
    let normals = compute_vertex_normals(&cube);
    for (p, n) in cube.vertices().iter().zip(&normals.normals) {
        let want = (p - Vec3::repeat(0.5)).normalize();
        assert!((n - want).norm() < 1e-12, "{p:?}: {n:?}");
    }
    assert!(normals.unreliable.iter().all(|u| !u));
}

#[test]
fn icosphere_normals_are_radial() {
    let mesh = icosphere(4, 1.0);
    let normals = compute_vertex_normals(&mesh).normals;
    let worst = mesh
        .vertices()
        .iter()
        .zip(&normals)
        .map(|(p, n)| n.dot(&p.normalize()).clamp(-1.0, 1.0).acos().to_degrees())
        .fold(0.0, f64::max);
    assert!(worst < 2.0, "{worst} degrees");
}

#[test]
fn project_inverts_unproject() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..200 {
        let eye = rand_vec(&mut rng, 2.0) + Vec3::new(0.0, 0.0, 3.0);
        let cam = PinholeCamera::look_at(Intrinsics::default(), eye, rand_vec(&mut rng, 0.5), Vec3::y()).unwrap();
        let (u, v) = (rng.random_range(0.0..640.0), rng.random_range(0.0..576.0));
        let depth = rng.random_range(0.1..10.0);
        let p = cam.project(&cam.unproject(u, v, depth)).unwrap();
        assert!((p.u - u).abs() < 1e-6 && (p.v - v).abs() < 1e-6);
        assert!((p.depth - depth).abs() < 1e-9);
    }
}

#[test]
fn dual_quaternion_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let t = RigidTransform::new(random_rotation(&mut rng), rand_vec(&mut rng, 5.0)).unwrap();
        let dq = DualQuaternion::from_rigid(&t);
        assert!((dq.real.norm() - 1.0).abs() < 1e-9);
        assert!(dq.real.dot(&dq.dual).abs() < 1e-9);
        let back = dq.to_rigid().unwrap();
        assert!((back.rotation() - t.rotation()).norm() < 1e-9);
        assert!((back.translation() - t.translation()).norm() < 1e-9);
    }
}

#[test]
fn equal_weight_rotation_blend_is_the_slerp_midpoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..200 {
        let a = RigidTransform::new(random_rotation(&mut rng), Vec3::zeros()).unwrap();
        let b = RigidTransform::new(random_rotation(&mut rng), Vec3::zeros()).unwrap();
        let (qa, qb) = (a.quaternion(), b.quaternion());
        let qb_aligned = if qa.coords.dot(&qb.coords) < 0.0 {
            UnitQuaternion::new_unchecked(-qb.into_inner())
        } else {
            qb
        };
        let Some(mid) = qa.try_slerp(&qb_aligned, 0.5, 1e-12) else {
            continue;
        };
        let mut db = DualQuaternion::from_rigid(&b);
        if i % 2 == 1 {
            db = db.negated();
        }
        let blended = dqb_blend_dual(&[DualQuaternion::from_rigid(&a), db], &[0.5, 0.5]).unwrap();
        let want = mid.to_rotation_matrix();
        assert!((blended.rotation() - want.matrix()).norm() < 1e-9);
        assert!(blended.translation().norm() < 1e-12);
    }
}

#[test]
fn rig_of_42_is_an_icosphere_at_fixed_distance() {
    let target = Vec3::new(0.2, -0.1, 0.4);
    let rig = sample_camera_rig(target, 1.5, 42, Intrinsics::default()).unwrap();
    assert_eq!(rig.cameras.len(), 42);
    let dirs: Vec<Vec3> = rig.cameras.iter().map(|c| (c.center() - target).normalize()).collect();
    for cam in &rig.cameras {
        assert!(((cam.center() - target).norm() - 1.5).abs() < 1e-9);
        let to_target = (target - cam.center()).normalize();
        assert!(cam.axis().dot(&to_target).clamp(-1.0, 1.0).acos() < 1e-6);
    }
    let mut min_sep: Vec<f64> = dirs
        .iter()
        .enumerate()
        .map(|(i, a)| {
            dirs.iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| a.dot(b).clamp(-1.0, 1.0).acos())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    min_sep.sort_by(f64::total_cmp);
    // Two orbits: the 12 original icosahedron vertices and 30 edge midpoints.
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for s in min_sep {
        match groups.last_mut() {
            Some((v, n)) if (s - *v).abs() < 1e-6 => *n += 1,
            _ => groups.push((s, 1)),
        }
    }
    let mut counts: Vec<usize> = groups.iter().map(|g| g.1).collect();
    counts.sort();
    assert!(counts == vec![42] || counts == vec![12, 30], "{groups:?}");
}

#[test]
fn flow_is_valid_exactly_where_depth_is() {
    let clip = wobble_clip(&icosphere(3, 0.4), 4, 0.02).unwrap();
    let cam = PinholeCamera::look_at(small_intrinsics(), Vec3::new(0.3, 0.2, 1.4), Vec3::zeros(), Vec3::y()).unwrap();
    let depth = render_depth(&clip.frame_mesh(0).unwrap(), &cam);
    let still = render_scene_flow(&clip, 0, 0, &cam).unwrap();
    let moving = render_scene_flow(&clip, 0, 3, &cam).unwrap();
    for row in 0..cam.height() {
        for col in 0..cam.width() {
            let valid = depth.is_valid(col, row);
            assert_eq!(still.get(col, row).is_some(), valid);
            assert_eq!(moving.get(col, row).is_some(), valid);
            if let Some(f) = still.get(col, row) {
                assert_eq!(f, Vec3::zeros());
            }
        }
    }
    assert!(depth.valid_count() > 1000);
}

#[test]
fn projective_tsdf_matches_per_ray_oracle() {
    let vs = 0.01;
    let cam = PinholeCamera::look_at(small_intrinsics(), Vec3::new(0.0, 0.0, 1.5), Vec3::zeros(), Vec3::y()).unwrap();
    let depth = render_depth(&icosphere(5, 0.5), &cam).quantized();
    let grid = projective_tsdf(&depth, vs).unwrap();
    assert!(grid.len() > 10_000);
    let k = small_intrinsics();
    let to_cam = cam.pose().inverse();
    for (c, sdf) in grid.iter() {
        let p = to_cam.apply(&grid.layout.center(c));
        let col = (k.fx * p.x / p.z + k.cx).round() as u32;
        let row = (k.fy * p.y / p.z + k.cy).round() as u32;
        let d = depth.get(col, row).expect("stored voxels project onto valid pixels");
        let want = (d - p.z) / vs;
        assert!((sdf - want).abs() < 1e-6, "{c:?}: {sdf} vs {want}");
        assert!(want.abs() < TRUNCATION_VOXELS);
    }
}

#[test]
fn fusing_a_view_twice_changes_nothing() {
    let cam = PinholeCamera::look_at(small_intrinsics(), Vec3::new(0.4, 0.0, 1.2), Vec3::zeros(), Vec3::y()).unwrap();
    let d = render_depth(&icosphere(4, 0.4), &cam);
    let once = fuse_tsdf(std::slice::from_ref(&d), 0.02).unwrap();
    let twice = fuse_tsdf(&[d.clone(), d], 0.02).unwrap();
    assert_eq!(once.tsdf, twice.tsdf);
}

#[test]
fn every_hierarchy_level_sees_the_sphere() {
    let radius = 0.5;
    let mesh = icosphere(5, radius);
    let rig = sample_camera_rig(Vec3::zeros(), 1.5, 42, small_intrinsics()).unwrap();
    let depths: Vec<_> = rig.cameras.iter().map(|c| render_depth(&mesh, c).quantized()).collect();
    let h = build_hierarchy(&depths).unwrap();
    assert_eq!(h.voxel_sizes(), HIERARCHY_VOXEL_SIZES.to_vec());
    for level in &h.levels {
        let vs = level.voxel_size();
        let surface = marching_cubes(&level.tsdf);
        assert!(!surface.is_empty());
        let worst = surface
            .vertices()
            .iter()
            .map(|p| (p.norm() - radius).abs() / vs)
            .fold(0.0, f64::max);
        assert!(worst < 1.0, "level {vs}: {worst} voxels");
    }
}

#[test]
fn marching_cubes_on_analytic_sphere() {
    let (radius, vs) = (0.5, 0.01);
    let layout = GridLayout::with_voxel_size(vs).unwrap();
    let n = (radius / vs) as i32 + 4;
    let mut entries = Vec::new();
    for x in -n..=n {
        for y in -n..=n {
            for z in -n..=n {
                let d = (layout.center(&[x, y, z]).norm() - radius) / vs;
                if d.abs() < TRUNCATION_VOXELS {
                    entries.push(([x, y, z], d));
                }
            }
        }
    }
    let mesh = marching_cubes(&TsdfGrid::from_entries(layout, entries).unwrap());
    let worst = mesh.vertices().iter().map(|p| (p.norm() - radius).abs() / vs).fold(0.0, f64::max);
    assert!(worst < 0.5, "{worst}");
    assert!(mesh.boundary_edges().is_empty());
}
