//! Bounding volume hierarchy over mesh triangles, built with a binned
//! surface-area heuristic, for nearest-hit ray queries.

use crate::geometry::{TriangleMesh, Vec3};

const BINS: usize = 12;
const MAX_LEAF: usize = 4;
const TRAVERSAL_COST: f64 = 1.0;
const INTERSECT_COST: f64 = 1.0;
// Inclusive barycentric bounds so rays through shared edges never slip between triangles.
const EDGE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Vec3,
    max: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    fn area(&self) -> f64 {
        let d = self.max - self.min;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Entry distance of the ray into the box, if it is hit before `t_max`.
    fn hit(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf means the ray lies in the slab plane: keep bounds.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first primitive slot. Interior: index of the second child
    /// (the first child is stored immediately after its parent).
    offset: usize,
    /// Zero for interior nodes.
    count: usize,
}

/// Nearest ray hit on a triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    /// Ray parameter: hit point is `origin + t * dir`.
    pub t: f64,
    pub triangle: usize,
    /// Barycentric weights of the triangle's three vertices.
    pub barycentric: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    prims: Vec<usize>,
    tris: Vec<[Vec3; 3]>,
}

impl Bvh {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let tris: Vec<[Vec3; 3]> = (0..mesh.triangles().len())
            .map(|t| mesh.triangle_positions(t))
            .collect();
        let mut bvh = Self {
            nodes: Vec::with_capacity(2 * tris.len().max(1)),
            prims: (0..tris.len()).collect(),
            tris,
        };
        if !bvh.tris.is_empty() {
            let bounds: Vec<Aabb> = bvh.tris.iter().map(tri_bounds).collect();
            let centroids: Vec<Vec3> = bvh.tris.iter().map(|t| (t[0] + t[1] + t[2]) / 3.0).collect();
            bvh.build(0, bvh.tris.len(), &bounds, &centroids);
        }
        bvh
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    fn build(&mut self, start: usize, end: usize, bounds: &[Aabb], centroids: &[Vec3]) -> usize {
        let mut node_bounds = Aabb::empty();
        let mut cbounds = Aabb::empty();
        for &p in &self.prims[start..end] {
            node_bounds.merge(&bounds[p]);
            cbounds.grow(&centroids[p]);
        }
        let id = self.nodes.len();
        self.nodes.push(Node {
            bounds: node_bounds,
            offset: start,
            count: end - start,
        });
        let count = end - start;
        if count <= MAX_LEAF {
            return id;
        }

        let extent = cbounds.max - cbounds.min;
        let axis = extent.imax();
        if !(extent[axis] > 0.0) {
            // All centroids coincide: split by index to keep the tree bounded.
            return self.split_node(id, start, start + count / 2, end, bounds, centroids);
        }

        let bin_of = |c: &Vec3| -> usize {
            let f = (c[axis] - cbounds.min[axis]) / extent[axis];
            ((f * BINS as f64) as usize).min(BINS - 1)
        };
        let mut bin_bounds = [Aabb::empty(); BINS];
        let mut bin_counts = [0usize; BINS];
        for &p in &self.prims[start..end] {
            let b = bin_of(&centroids[p]);
            bin_counts[b] += 1;
            bin_bounds[b].merge(&bounds[p]);
        }
        let mut best = (f64::INFINITY, 0usize);
        for split in 1..BINS {
            let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
            let (mut lc, mut rc) = (0, 0);
            for b in 0..split {
                lb.merge(&bin_bounds[b]);
                lc += bin_counts[b];
            }
            for b in split..BINS {
                rb.merge(&bin_bounds[b]);
                rc += bin_counts[b];
            }
            if lc == 0 || rc == 0 {
                continue;
            }
            let cost = TRAVERSAL_COST
                + INTERSECT_COST * (lb.area() * lc as f64 + rb.area() * rc as f64) / node_bounds.area().max(f64::MIN_POSITIVE);
            if cost < best.0 {
                best = (cost, split);
            }
        }
        if best.0 >= INTERSECT_COST * count as f64 && count <= 2 * MAX_LEAF {
            return id;
        }
        let mid = if best.0.is_finite() {
            let split = best.1;
            let (mut i, mut j) = (start, end);
            while i < j {
                if bin_of(&centroids[self.prims[i]]) < split {
                    i += 1;
                } else {
                    j -= 1;
                    self.prims.swap(i, j);
                }
            }
            i
        } else {
            start + count / 2
        };
        self.split_node(id, start, mid, end, bounds, centroids)
    }

    fn split_node(
        &mut self,
        id: usize,
        start: usize,
        mid: usize,
        end: usize,
        bounds: &[Aabb],
        centroids: &[Vec3],
    ) -> usize {
        // Stable order inside each half keeps builds reproducible.
        self.prims[start..mid].sort_unstable();
        self.prims[mid..end].sort_unstable();
        self.build(start, mid, bounds, centroids);
        let right = self.build(mid, end, bounds, centroids);
        self.nodes[id].offset = right;
        self.nodes[id].count = 0;
        id
    }

    /// Nearest intersection with `t > 0`. Equal distances resolve to the
    /// lowest triangle index; both triangle faces are hit.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<RayHit> = None;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            let t_max = best.map_or(f64::INFINITY, |h| h.t);
            if node.bounds.hit(origin, &inv_dir, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for &p in &self.prims[node.offset..node.offset + node.count] {
                    if let Some((t, b)) = intersect_triangle(origin, dir, &self.tris[p]) {
                        let better = match best {
                            None => true,
                            Some(h) => t < h.t || (t == h.t && p < h.triangle),
                        };
                        if better {
                            best = Some(RayHit {
                                t,
                                triangle: p,
                                barycentric: b,
                            });
                        }
                    }
                }
            } else {
                let (left, right) = (n + 1, node.offset);
                let tl = self.nodes[left].bounds.hit(origin, &inv_dir, t_max);
                let tr = self.nodes[right].bounds.hit(origin, &inv_dir, t_max);
                match (tl, tr) {
                    (Some(a), Some(b)) => {
                        if a <= b {
                            stack.push(right);
                            stack.push(left);
                        } else {
                            stack.push(left);
                            stack.push(right);
                        }
                    }
                    (Some(_), None) => stack.push(left),
                    (None, Some(_)) => stack.push(right),
                    (None, None) => {}
                }
            }
        }
        best
    }
}

fn tri_bounds(t: &[Vec3; 3]) -> Aabb {
    let mut b = Aabb::empty();
    for p in t {
        b.grow(p);
    }
    b
}

/// Möller–Trumbore, two-sided.
pub(crate) fn intersect_triangle(origin: &Vec3, dir: &Vec3, tri: &[Vec3; 3]) -> Option<(f64, [f64; 3])> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv;
    if u < -EDGE_EPS || u > 1.0 + EDGE_EPS {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < -EDGE_EPS || u + v > 1.0 + EDGE_EPS {
        return None;
    }
    let t = e2.dot(&q) * inv;
    if !(t > 0.0) {
        return None;
    }
    Some((t, [1.0 - u - v, u, v]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::icosphere;
    use proptest::prelude::*;

    fn brute(mesh: &TriangleMesh, o: &Vec3, d: &Vec3) -> Option<(f64, usize)> {
        let mut best: Option<(f64, usize)> = None;
        for t in 0..mesh.triangles().len() {
            if let Some((tt, _)) = intersect_triangle(o, d, &mesh.triangle_positions(t)) {
                if best.map_or(true, |(bt, _)| tt < bt) {
                    best = Some((tt, t));
                }
            }
        }
        best
    }

    #[test]
    fn hits_axis_aligned_triangle() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 2.0),
                Vec3::new(1.0, -1.0, 2.0),
                Vec3::new(0.0, 1.0, 2.0),
            ],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = Bvh::new(&mesh);
        let hit = bvh.intersect(&Vec3::zeros(), &Vec3::z()).unwrap();
        assert_eq!(hit.t, 2.0);
        assert!((hit.barycentric.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(bvh.intersect(&Vec3::zeros(), &-Vec3::z()).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn agrees_with_brute_force(
            o in (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0),
            d in (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0),
        ) {
            let mesh = icosphere(2, 0.7);
            let bvh = Bvh::new(&mesh);
            let o = Vec3::new(o.0, o.1, o.2);
            let d = Vec3::new(d.0, d.1, d.2);
            prop_assume!(d.norm() > 1e-3);
            let got = bvh.intersect(&o, &d).map(|h| (h.t, h.triangle));
            let want = brute(&mesh, &o, &d);
            match (got, want) {
                (None, None) => {}
                (Some(g), Some(w)) => prop_assert!((g.0 - w.0).abs() < 1e-12),
                other => prop_assert!(false, "mismatch {:?}", other),
            }
        }
    }
}
