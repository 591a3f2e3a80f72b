//! Acceptance criteria. Each test prints one PASS/FAIL line, then asserts.

use std::time::Instant;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use volmotion_core::formats::encode_anim;
use volmotion_core::geometry::{random_rotation, Intrinsics, RigidTransform, TriangleMesh, Vec3};
use volmotion_core::metrics::{
    eval_motion_vectors, eval_shape, sample_surface, surface_metrics, volume_metrics, ACC_THRESHOLDS,
};
use volmotion_core::motion_field::{
    sff_to_vmf, trilinear_corners, vmf_to_sff, PointMotionSet, Support, VmfOptions, DEFAULT_NEIGHBORS,
    TRILINEAR_CORNERS,
};
use volmotion_core::pipeline::{run_datagen, PipelineConfig, MANIFEST_FILE};
use volmotion_core::render::{render_depth, sample_camera_rig, DEFAULT_VIEW_COUNT};
use volmotion_core::solvers::{
    arap_complete, arap_post_process, fit_rigid, kabsch, ArapConfig, MotionCompletionProblem,
};
use volmotion_core::synthetic::{bend_point, capped_tube, icosphere, wobble_clip};
use volmotion_core::volumetric::{
    build_hierarchy, fuse_tsdf, marching_cubes, GridLayout, MotionGrid, TsdfGrid, VoxelCoord,
    HIERARCHY_VOXEL_SIZES, TRUNCATION_VOXELS,
};

fn verdict(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {id} failed: {detail}");
}

fn rand_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn random_layout(rng: &mut impl Rng) -> GridLayout {
    GridLayout::new(rng.random_range(0.005..0.1), rand_vec(rng, 0.5)).unwrap()
}

/// k nearest by exhaustive sort (ties to the lower index), then the
/// inverse-distance average, or the coincident point's value.
fn brute_idw(points: &[Vec3], motions: &[Vec3], q: &Vec3, k: usize) -> Vec3 {
    let mut d: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| ((p - q).norm(), i)).collect();
    d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let nn = &d[..k.min(d.len())];
    if let Some(&(_, i)) = nn.iter().find(|(dist, _)| *dist < 1e-9) {
        return motions[i];
    }
    let mut num = Vec3::zeros();
    let mut den = 0.0;
    for &(dist, i) in nn {
        num += motions[i] / dist;
        den += 1.0 / dist;
    }
    num / den
}

#[test]
fn c01_point_to_volume_interpolation_matches_brute_force() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for instance in 0..1000 {
        let k = [1, 3, 5][instance % 3];
        let n = rng.random_range(5..80);
        let layout = random_layout(&mut rng);
        let m = rng.random_range(1..40);
        let mut voxels: Vec<VoxelCoord> = (0..m)
            .map(|_| std::array::from_fn(|_| rng.random_range(-40..40)))
            .collect();
        voxels.sort();
        voxels.dedup();
        let extent = 40.0 * layout.voxel_size;
        let mut points: Vec<Vec3> = (0..n).map(|_| layout.origin + rand_vec(&mut rng, extent)).collect();
        if instance % 10 == 0 {
            points[0] = layout.center(&voxels[0]);
        }
        let motions: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 0.2)).collect();
        let sff = PointMotionSet::new(points.clone(), motions.clone()).unwrap();
        let vmf = sff_to_vmf(&sff, layout, &voxels, k).unwrap();
        for c in &voxels {
            let want = brute_idw(&points, &motions, &layout.center(c), k);
            let got = vmf.get(c).unwrap();
            worst = worst.max((got - want).norm() / want.norm().max(1e-300));
            checked += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        1,
        "inverse-distance point-to-volume oracle",
        worst <= 1e-6 && secs < 10.0,
        format!("{checked} voxels, worst relative error {worst:.2e}, {secs:.2} s"),
    );
}

fn brute_trilinear(layout: &GridLayout, values: &dyn Fn(VoxelCoord) -> Vec3, p: &Vec3) -> Vec3 {
    let g = (p - layout.origin) / layout.voxel_size;
    let b = g.map(f64::floor);
    let f = g - b;
    let mut sum = Vec3::zeros();
    for dx in 0..2 {
        for dy in 0..2 {
            for dz in 0..2 {
                let w = (if dx == 1 { f.x } else { 1.0 - f.x })
                    * (if dy == 1 { f.y } else { 1.0 - f.y })
                    * (if dz == 1 { f.z } else { 1.0 - f.z });
                sum += values([b.x as i32 + dx, b.y as i32 + dy, b.z as i32 + dz]) * w;
            }
        }
    }
    sum
}

#[test]
fn c02_volume_to_point_interpolation_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut worst_const) = (0.0f64, 0.0f64);
    let mut all_full = true;
    for _ in 0..1000 {
        let layout = random_layout(&mut rng);
        let lo: [i32; 3] = std::array::from_fn(|_| rng.random_range(-20..20));
        let dims: [i32; 3] = std::array::from_fn(|_| rng.random_range(2..6));
        let table: Vec<(VoxelCoord, Vec3)> = (0..dims[0])
            .flat_map(|x| (0..dims[1]).flat_map(move |y| (0..dims[2]).map(move |z| [lo[0] + x, lo[1] + y, lo[2] + z])))
            .map(|c| (c, rand_vec(&mut rng, 1.0)))
            .collect();
        let vmf = MotionGrid::from_entries(layout, table.iter().copied()).unwrap();
        let lookup = |c: VoxelCoord| *vmf.get(&c).unwrap();
        let queries: Vec<Vec3> = (0..20)
            .map(|_| {
                let g = Vec3::from_fn(|a, _| lo[a] as f64 + rng.random_range(0.0..(dims[a] - 1) as f64));
                layout.origin + g * layout.voxel_size
            })
            .collect();
        let sampled = vmf_to_sff(&vmf, &queries).unwrap();
        all_full &= sampled.support.iter().all(|s| *s == Support::Full);
        for (q, got) in queries.iter().zip(sampled.motion.motions()) {
            worst = worst.max((got - brute_trilinear(&layout, &lookup, q)).norm());
        }

        // Constant field on a sparse subset, queried anywhere nearby.
        let c = rand_vec(&mut rng, 1.0);
        let sparse: Vec<(VoxelCoord, Vec3)> =
            table.iter().filter(|_| rng.random_bool(0.4)).map(|(v, _)| (*v, c)).collect();
        let sparse = if sparse.is_empty() { vec![(table[0].0, c)] } else { sparse };
        let grid = MotionGrid::from_entries(layout, sparse).unwrap();
        let far: Vec<Vec3> = (0..20)
            .map(|_| layout.center(&lo) + rand_vec(&mut rng, 8.0 * layout.voxel_size))
            .collect();
        for m in vmf_to_sff(&grid, &far).unwrap().motion.motions() {
            worst_const = worst_const.max((m - c).norm());
        }
    }
    verdict(
        2,
        "trilinear volume-to-point oracle",
        worst <= 1e-6 && worst_const <= 1e-9 && all_full,
        format!("max error {worst:.2e}, constant-field max error {worst_const:.2e}"),
    );
}

#[test]
fn c03_default_constants() {
    let cfg = PipelineConfig::from_toml("version = 1\nclip = \"clip.anim\"\n").unwrap();
    let corners = trilinear_corners(&GridLayout::with_voxel_size(0.01).unwrap(), &Vec3::new(0.003, 0.004, 0.005));
    let weight_sum: f64 = corners.iter().map(|c| c.1).sum();
    let checks = [
        ("vmf k", DEFAULT_NEIGHBORS == 3 && VmfOptions::default().k == 3 && cfg.motion.k == 3),
        ("trilinear corners", TRILINEAR_CORNERS == 8 && corners.len() == 8 && (weight_sum - 1.0).abs() < 1e-12),
        ("voxel sizes", HIERARCHY_VOXEL_SIZES == [0.01, 0.02, 0.04, 0.08] && cfg.voxel_sizes == HIERARCHY_VOXEL_SIZES),
        ("truncation", TRUNCATION_VOXELS == 3.0),
        ("camera count", DEFAULT_VIEW_COUNT == 42 && cfg.cameras.view_count() == 42),
        ("frame jumps", cfg.frame_jumps == [1, 3, 7, 12]),
    ];
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    verdict(3, "default constants", failed.is_empty(), format!("failed: {failed:?}"));
}

#[test]
fn c04_rigid_fit_recovers_transforms() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut rot_err, mut trans_err) = (0.0f64, 0.0f64);
    for _ in 0..1000 {
        let r = random_rotation(&mut rng);
        let t = rand_vec(&mut rng, 1.0);
        let n = rng.random_range(10..50);
        let src: Vec<Vec3> = (0..n).map(|_| rand_vec(&mut rng, 1.0)).collect();
        let dst: Vec<Vec3> = src.iter().map(|p| r * p + t).collect();
        let fit = kabsch(&src, &dst).unwrap();
        rot_err = rot_err.max((fit.rotation() - r).norm());
        trans_err = trans_err.max((fit.translation() - t).norm());
    }
    let exact_secs = start.elapsed().as_secs_f64();

    let noise = Normal::new(0.0, 0.001).unwrap();
    let mut noisy_err: f64 = 0.0;
    for _ in 0..20 {
        let r = random_rotation(&mut rng);
        let t = rand_vec(&mut rng, 1.0);
        let src: Vec<Vec3> = (0..1000).map(|_| rand_vec(&mut rng, 1.0)).collect();
        let dst: Vec<Vec3> = src
            .iter()
            .map(|p| r * p + t + Vec3::from_fn(|_, _| noise.sample(&mut rng)))
            .collect();
        noisy_err = noisy_err.max((kabsch(&src, &dst).unwrap().translation() - t).norm());
    }
    verdict(
        4,
        "rigid fitting",
        rot_err < 1e-9 && trans_err < 1e-9 && noisy_err < 1e-3 && exact_secs < 5.0,
        format!(
            "rotation {rot_err:.2e}, translation {trans_err:.2e} m, noisy translation {:.3} mm, {exact_secs:.2} s",
            noisy_err * 1e3
        ),
    );
}

fn hidden_epe_cm(problem: &MotionCompletionProblem, motion: &[Vec3], gt: &[Vec3]) -> f64 {
    let hidden = problem.hidden();
    hidden
        .iter()
        .map(|&i| (motion[i as usize] - gt[i as usize]).norm())
        .sum::<f64>()
        / hidden.len() as f64
        * 100.0
}

#[test]
fn c05_arap_recovers_rigid_motion() {
    let mesh = capped_tube(0.15, 1.0, 54, 37);
    assert_eq!(mesh.vertex_count(), 2000);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let motion = RigidTransform::new(random_rotation(&mut rng), rand_vec(&mut rng, 0.3)).unwrap();
    let gt: Vec<Vec3> = mesh.vertices().iter().map(|p| motion.apply(p) - p).collect();
    let mut order: Vec<u32> = (0..2000).collect();
    order.sort_by(|&a, &b| mesh.vertices()[a as usize].z.total_cmp(&mesh.vertices()[b as usize].z));
    let visible = order[..600].to_vec();
    let problem = MotionCompletionProblem::from_full_motion(mesh, visible, &gt).unwrap();

    let start = Instant::now();
    let result = arap_complete(&problem, &ArapConfig::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let epe = hidden_epe_cm(&problem, &result.motion, &gt);
    let monotone = result.report.is_non_increasing();
    verdict(
        5,
        "ARAP rigid-recovery certificate",
        epe < 1e-3 && monotone && secs < 30.0,
        format!(
            "hidden EPE {epe:.2e} cm, {} iterations, non-increasing {monotone}, {secs:.2} s",
            result.report.iterations
        ),
    );
}

#[test]
fn c06_arap_beats_rigid_on_a_bend() {
    let mesh = capped_tube(0.1, 1.0, 60, 32);
    let gt: Vec<Vec3> = mesh.vertices().iter().map(|p| bend_point(p, 1.0) - p).collect();
    let visible: Vec<u32> = (0..mesh.vertex_count() as u32)
        .filter(|&i| mesh.vertices()[i as usize].z < 0.5)
        .collect();
    let problem = MotionCompletionProblem::from_full_motion(mesh, visible, &gt).unwrap();
    let rigid = hidden_epe_cm(&problem, &fit_rigid(&problem).unwrap().motion, &gt);
    let arap = hidden_epe_cm(&problem, &arap_complete(&problem, &ArapConfig::default()).unwrap().motion, &gt);
    verdict(
        6,
        "ARAP beats rigid fitting",
        arap < 0.5 * rigid,
        format!("hidden EPE rigid {rigid:.3} cm, ARAP {arap:.3} cm, ratio {:.3}", arap / rigid),
    );
}

#[test]
fn c07_post_processing_denoises() {
    let mesh = icosphere(4, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut improved = 0;
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..20 {
        let motion = RigidTransform::new(random_rotation(&mut rng), rand_vec(&mut rng, 0.2)).unwrap();
        let clean: Vec<Vec3> = mesh.vertices().iter().map(|p| motion.apply(p) - p).collect();
        let noisy: Vec<Vec3> = clean
            .iter()
            .map(|m| m + Vec3::from_fn(|_, _| noise.sample(&mut rng)))
            .collect();
        let out = arap_post_process(&mesh, &noisy, 1.0, &ArapConfig::default()).unwrap().motion;
        let before = eval_motion_vectors(&noisy, &clean).unwrap().epe;
        let after = eval_motion_vectors(&out, &clean).unwrap().epe;
        improved += (after < before) as usize;
        worst_ratio = worst_ratio.max(after / before);
    }
    verdict(
        7,
        "post-processing denoising",
        improved == 20,
        format!("{improved}/20 trials improved, worst output/input EPE ratio {worst_ratio:.3}"),
    );
}

#[test]
fn c08_sphere_fusion_fidelity() {
    let start = Instant::now();
    let (radius, vs) = (0.5, 0.01);
    let mesh = icosphere(6, radius);
    let rig = sample_camera_rig(Vec3::zeros(), 1.5, 42, Intrinsics::default()).unwrap();
    let depths: Vec<_> = rig.cameras.iter().map(|c| render_depth(&mesh, c)).collect();
    let fused = fuse_tsdf(&depths, vs).unwrap();
    let mean_err = fused
        .tsdf
        .iter()
        .map(|(c, v)| (v - (fused.tsdf.layout.center(c).norm() - radius) / vs).abs())
        .sum::<f64>()
        / fused.tsdf.len() as f64;
    let surface = marching_cubes(&fused.tsdf);
    let max_dev = surface
        .vertices()
        .iter()
        .map(|p| ((p.norm() - radius) / vs).abs())
        .fold(0.0, f64::max);
    let boundary = surface.boundary_edges().len();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        8,
        "TSDF fidelity",
        mean_err < 0.5 && max_dev < 0.5 && boundary == 0 && !surface.is_empty() && secs < 60.0,
        format!(
            "{} voxels, mean error {mean_err:.4} voxel, surface max deviation {max_dev:.4} voxel, {boundary} boundary edges, {secs:.1} s",
            fused.tsdf.len()
        ),
    );
}

fn sphere_tsdf(radius: f64, vs: f64) -> TsdfGrid {
    let layout = GridLayout::with_voxel_size(vs).unwrap();
    let n = (radius / vs).ceil() as i32 + 4;
    let mut entries = Vec::new();
    for x in -n..=n {
        for y in -n..=n {
            for z in -n..=n {
                let c = [x, y, z];
                let d = (layout.center(&c).norm() - radius) / vs;
                if d.abs() < TRUNCATION_VOXELS {
                    entries.push((c, d));
                }
            }
        }
    }
    TsdfGrid::from_entries(layout, entries).unwrap()
}

/// Chamfer, normal consistency and point-to-plane by exhaustive search.
fn brute_surface(a: &(Vec<Vec3>, Vec<Vec3>), b: &(Vec<Vec3>, Vec<Vec3>)) -> (f64, f64, f64) {
    let directed = |from: &(Vec<Vec3>, Vec<Vec3>), to: &(Vec<Vec3>, Vec<Vec3>)| {
        let mut sums = (0.0, 0.0, 0.0);
        for (p, n) in from.0.iter().zip(&from.1) {
            let j = (0..to.0.len())
                .min_by(|&i, &j| (p - to.0[i]).norm_squared().total_cmp(&(p - to.0[j]).norm_squared()))
                .unwrap();
            sums.0 += (p - to.0[j]).norm();
            sums.1 += n.dot(&to.1[j]).abs();
            sums.2 += (p - to.0[j]).dot(&to.1[j]).abs();
        }
        let n = from.0.len() as f64;
        (sums.0 / n, sums.1 / n, sums.2 / n)
    };
    let (d1, c1, p1) = directed(a, b);
    let (d2, c2, p2) = directed(b, a);
    (0.5 * (d1 + d2) * 100.0, 0.5 * (c1 + c2), 0.5 * (p1 + p2) * 100.0)
}

#[test]
fn c09_metric_self_consistency() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut problems = Vec::new();

    let gt: Vec<Vec3> = (0..500).map(|_| rand_vec(&mut rng, 0.3)).collect();
    let self_motion = eval_motion_vectors(&gt, &gt).unwrap();
    if (self_motion.epe, self_motion.acc5, self_motion.acc10) != (0.0, 1.0, 1.0) {
        problems.push(format!("eval_motion(gt, gt) = {self_motion:?}"));
    }

    let mesh: TriangleMesh = icosphere(4, 0.5);
    let tsdf = sphere_tsdf(0.5, 0.02);
    let s = eval_shape(&mesh, &mesh, &tsdf, &tsdf, 30_000, 3).unwrap();
    if (s.iou, s.cd, s.snc, s.p2p, s.l1_sdf) != (1.0, 0.0, 1.0, 0.0, 0.0) {
        problems.push(format!("eval_shape(X, X) = {s:?}"));
    }

    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..200);
        let gt: Vec<Vec3> = (0..n)
            .map(|_| rand_vec(&mut rng, 1.0).normalize() * 10f64.powf(rng.random_range(-3.0..0.0)))
            .collect();
        let err_scale = 10f64.powf(rng.random_range(-3.5..-0.5));
        let pred: Vec<Vec3> = gt.iter().map(|g| g + rand_vec(&mut rng, err_scale)).collect();
        let r = eval_motion_vectors(&pred, &gt).unwrap();
        if r.acc5 > r.acc10 {
            problems.push(format!("acc5 {} > acc10 {}", r.acc5, r.acc10));
        }
        let mut epe = 0.0;
        let mut hits = [0usize; 2];
        for (p, g) in pred.iter().zip(&gt) {
            let e = ((p.x - g.x).powi(2) + (p.y - g.y).powi(2) + (p.z - g.z).powi(2)).sqrt();
            let mag = (g.x * g.x + g.y * g.y + g.z * g.z).sqrt();
            epe += e;
            for (h, t) in hits.iter_mut().zip(ACC_THRESHOLDS) {
                *h += (e * 100.0 < t || e < t / 100.0 * mag) as usize;
            }
        }
        let nf = n as f64;
        worst = worst
            .max((r.epe - epe / nf * 100.0).abs())
            .max((r.acc5 - hits[0] as f64 / nf).abs())
            .max((r.acc10 - hits[1] as f64 / nf).abs());
    }

    let other = icosphere(3, 0.52);
    let samples = 1500;
    let fast = surface_metrics(&mesh, &other, samples, 11).unwrap();
    let sa = sample_surface(&mesh, samples, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let sb = sample_surface(&other, samples, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let (cd, snc, p2p) = brute_surface(&sa, &sb);
    worst = worst.max((fast.cd - cd).abs()).max((fast.snc - snc).abs()).max((fast.p2p - p2p).abs());

    let other_tsdf = sphere_tsdf(0.55, 0.02);
    let vol = volume_metrics(&tsdf, &other_tsdf).unwrap();
    let (mut both, mut either, mut l1, mut shared) = (0usize, 0usize, 0.0, 0usize);
    let mut union: Vec<VoxelCoord> = tsdf.coords().chain(other_tsdf.coords()).copied().collect();
    union.sort();
    union.dedup();
    for c in &union {
        let (a, b) = (tsdf.get(c), other_tsdf.get(c));
        let (ia, ib) = (a.is_some_and(|v| *v < 0.0), b.is_some_and(|v| *v < 0.0));
        both += (ia && ib) as usize;
        either += (ia || ib) as usize;
        if let (Some(a), Some(b)) = (a, b) {
            l1 += (a - b).abs();
            shared += 1;
        }
    }
    worst = worst
        .max((vol.iou - both as f64 / either as f64).abs())
        .max((vol.l1_sdf - l1 / shared as f64).abs());

    if worst > 1e-9 {
        problems.push(format!("brute-force mismatch {worst:.2e}"));
    }
    verdict(
        9,
        "metric self-consistency",
        problems.is_empty(),
        format!("max brute-force deviation {worst:.2e}; issues: {problems:?}"),
    );
}

#[test]
fn c10_haar_rotations_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let n = 100_000;
    let v = Vec3::new(1.0, 2.0, 3.0).normalize();
    let mut z = Vec::with_capacity(n);
    let mut mean = Matrix3::zeros();
    for _ in 0..n {
        let r = random_rotation(&mut rng);
        z.push((r * v).z);
        mean += r;
    }
    mean /= n as f64;
    z.sort_by(f64::total_cmp);
    let ks = z
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = ((x + 1.0) / 2.0).clamp(0.0, 1.0);
            ((i + 1) as f64 / n as f64 - f).max(f - i as f64 / n as f64)
        })
        .fold(0.0, f64::max);
    let max_mean = mean.abs().max();
    verdict(
        10,
        "Haar rotation uniformity",
        ks < 0.005 && max_mean < 0.01,
        format!("KS statistic {ks:.5}, largest mean entry {max_mean:.5}"),
    );
}

#[test]
fn c11_datagen_is_deterministic_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = capped_tube(0.15, 1.0, 54, 37);
    let clip = wobble_clip(&mesh, 10, 0.01).unwrap();
    let clip_path = dir.path().join("clip.anim");
    std::fs::write(&clip_path, encode_anim(&clip).unwrap()).unwrap();
    let mut config = PipelineConfig::new(&clip_path);
    config.seed = 11;

    let mut runs = Vec::new();
    for threads in [1, 4] {
        let out = dir.path().join(format!("run_{threads}"));
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let start = Instant::now();
        pool.install(|| run_datagen(&config, &out)).unwrap();
        let secs = start.elapsed().as_secs_f64();
        runs.push((std::fs::read(out.join(MANIFEST_FILE)).unwrap(), secs));
    }
    let identical = runs[0].0 == runs[1].0;
    let slowest = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    verdict(
        11,
        "end-to-end determinism",
        identical && slowest < 300.0,
        format!(
            "{} vertices, {} frames, {} views; manifests identical {identical}; runs {:.1} s (1 thread), {:.1} s (4 threads)",
            mesh.vertex_count(),
            clip.frame_count(),
            config.cameras.view_count(),
            runs[0].1,
            runs[1].1
        ),
    );
}

#[test]
fn hierarchy_has_the_four_default_levels() {
    let mesh = icosphere(3, 0.3);
    let rig = sample_camera_rig(Vec3::zeros(), 1.0, 6, Intrinsics::default()).unwrap();
    let depths: Vec<_> = rig.cameras.iter().map(|c| render_depth(&mesh, c)).collect();
    let h = build_hierarchy(&depths).unwrap();
    assert_eq!(h.voxel_sizes(), HIERARCHY_VOXEL_SIZES.to_vec());
}
