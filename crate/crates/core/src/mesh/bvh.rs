//! Axis-aligned bounding-box tree for closest-point queries on a triangle
//! mesh.
//!
//! The tree copies triangle geometry at build time, so queries do not touch
//! the mesh. Construction is median-split on the largest centroid extent
//! with at most four triangles per leaf; queries prune by squared distance
//! to node boxes. Exact distance ties resolve to the lowest face index, so
//! results are deterministic and match a brute-force scan.

use super::{HalfedgeMesh, SurfacePoint};
use crate::Vec3;

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy)]
pub struct ClosestHit {
    /// Barycentric location of the closest point.
    pub surface_point: SurfacePoint,
    /// The closest point itself.
    pub point: Vec3,
    /// Euclidean distance from the query to `point`.
    pub distance: f64,
}

struct Node {
    min: Vec3,
    max: Vec3,
    /// Left child index, or `u32::MAX` for leaves.
    left: u32,
    right: u32,
    /// Range into `tris` for leaves; `count == 0` for inner nodes.
    start: u32,
    count: u32,
}

struct Tri {
    a: Vec3,
    b: Vec3,
    c: Vec3,
    face: u32,
}

/// Bounding-volume hierarchy over a mesh's live faces.
pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<Tri>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn new(mesh: &HalfedgeMesh) -> Self {
        let mut tris: Vec<Tri> = mesh
            .live_faces()
            .map(|f| {
                let [a, b, c] = mesh.face_positions(f);
                Tri { a, b, c, face: f }
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * tris.len());
        let n = tris.len();
        build(&mut nodes, &mut tris, 0, n);
        Bvh { nodes, tris }
    }

    /// Closest point on the mesh to `q`; ties on distance pick the lowest
    /// face index.
    pub fn closest(&self, q: Vec3) -> ClosestHit {
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(u32, [f64; 3], Vec3)> = None;
        // Depth-first with near-child-first ordering and box pruning.
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let d2box = aabb_dist2(node.min, node.max, q);
            // `<=` keeps boxes at exactly the best distance alive so the
            // lowest-face tie-break can still fire inside them.
            if d2box > best_d2 {
                continue;
            }
            if node.count > 0 {
                for t in &self.tris[node.start as usize..(node.start + node.count) as usize] {
                    let (p, bary) = closest_point_triangle(t.a, t.b, t.c, q);
                    let d2 = (p - q).norm_squared();
                    let better = match &best {
                        None => true,
                        Some((bf, _, _)) => d2 < best_d2 || (d2 == best_d2 && t.face < *bf),
                    };
                    if better {
                        best_d2 = d2;
                        best = Some((t.face, bary, p));
                    }
                }
            } else {
                let (l, r) = (node.left, node.right);
                let dl = {
                    let n = &self.nodes[l as usize];
                    aabb_dist2(n.min, n.max, q)
                };
                let dr = {
                    let n = &self.nodes[r as usize];
                    aabb_dist2(n.min, n.max, q)
                };
                // Push the farther child first so the nearer pops first.
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        let (face, bary, point) = best.expect("BVH over non-empty mesh");
        ClosestHit {
            surface_point: SurfacePoint::new(face, bary).expect("valid barycentrics"),
            point,
            distance: best_d2.sqrt(),
        }
    }
}

fn build(nodes: &mut Vec<Node>, tris: &mut [Tri], start: usize, count: usize) -> u32 {
    let slice = &tris[start..start + count];
    let mut min = Vec3::repeat(f64::INFINITY);
    let mut max = Vec3::repeat(f64::NEG_INFINITY);
    for t in slice {
        for p in [t.a, t.b, t.c] {
            min = min.inf(&p);
            max = max.sup(&p);
        }
    }
    let idx = nodes.len() as u32;
    nodes.push(Node {
        min,
        max,
        left: u32::MAX,
        right: u32::MAX,
        start: start as u32,
        count: count as u32,
    });
    if count <= LEAF_SIZE {
        return idx;
    }

    // Split at the centroid median along the widest centroid axis.
    let centroid = |t: &Tri| (t.a + t.b + t.c) / 3.0;
    let mut cmin = Vec3::repeat(f64::INFINITY);
    let mut cmax = Vec3::repeat(f64::NEG_INFINITY);
    for t in &tris[start..start + count] {
        let c = centroid(t);
        cmin = cmin.inf(&c);
        cmax = cmax.sup(&c);
    }
    let extent = cmax - cmin;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    let mid = count / 2;
    tris[start..start + count].select_nth_unstable_by(mid, |s, t| {
        centroid(s)[axis].total_cmp(&centroid(t)[axis])
    });

    let left = build(nodes, tris, start, mid);
    let right = build(nodes, tris, start + mid, count - mid);
    let node = &mut nodes[idx as usize];
    node.left = left;
    node.right = right;
    node.count = 0;
    idx
}

fn aabb_dist2(min: Vec3, max: Vec3, q: Vec3) -> f64 {
    let mut d2 = 0.0;
    for i in 0..3 {
        let v = q[i].clamp(min[i], max[i]) - q[i];
        d2 += v * v;
    }
    d2
}

/// Closest point on triangle `abc` to `q`, with barycentric coordinates.
pub(crate) fn closest_point_triangle(a: Vec3, b: Vec3, c: Vec3, q: Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let aq = q - a;
    let d1 = ab.dot(&aq);
    let d2 = ac.dot(&aq);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (a, [1.0, 0.0, 0.0]);
    }

    let bq = q - b;
    let d3 = ab.dot(&bq);
    let d4 = ac.dot(&bq);
    if d3 >= 0.0 && d4 <= d3 {
        return (b, [0.0, 1.0, 0.0]);
    }

    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, [1.0 - v, v, 0.0]);
    }

    let cq = q - c;
    let d5 = ab.dot(&cq);
    let d6 = ac.dot(&cq);
    if d6 >= 0.0 && d5 <= d6 {
        return (c, [0.0, 0.0, 1.0]);
    }

    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, [1.0 - w, 0.0, w]);
    }

    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, [0.0, 1.0 - w, w]);
    }

    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Closest point on the mesh to `q` via an accelerated query.
pub fn closest_point(bvh: &Bvh, q: Vec3) -> ClosestHit {
    bvh.closest(q)
}

/// Linear-scan reference used to validate the accelerated query.
pub fn closest_point_brute_force(mesh: &HalfedgeMesh, q: Vec3) -> ClosestHit {
    let mut best_d2 = f64::INFINITY;
    let mut best: Option<(u32, [f64; 3], Vec3)> = None;
    for f in mesh.live_faces() {
        let [a, b, c] = mesh.face_positions(f);
        let (p, bary) = closest_point_triangle(a, b, c, q);
        let d2 = (p - q).norm_squared();
        if d2 < best_d2 {
            best_d2 = d2;
            best = Some((f, bary, p));
        }
    }
    let (face, bary, point) = best.expect("non-empty mesh");
    ClosestHit {
        surface_point: SurfacePoint::new(face, bary).expect("valid barycentrics"),
        point,
        distance: best_d2.sqrt(),
    }
}
