//! Shared helpers for unit tests: canonical meshes and numeric assertions.

use crate::mesh::HalfedgeMesh;
use crate::Vec3;

/// Asserts |a − b| ≤ tol with a readable failure message.
pub fn assert_near(a: f64, b: f64, tol: f64, what: &str) {
    assert!(
        (a - b).abs() <= tol,
        "{what}: {a} vs {b} (|Δ| = {:.3e} > {tol:.3e})",
        (a - b).abs()
    );
}

/// Asserts relative error ≤ tol (absolute below `floor`).
pub fn assert_rel(a: f64, b: f64, tol: f64, floor: f64, what: &str) {
    let scale = b.abs().max(floor);
    assert!(
        (a - b).abs() <= tol * scale,
        "{what}: {a} vs {b} (rel = {:.3e} > {tol:.3e})",
        (a - b).abs() / scale
    );
}

/// Deterministic, nearly-uniform unit-sphere sampling (golden-angle
/// spiral); normals point outward.
pub fn fibonacci_sphere(n: usize) -> (Vec<Vec3>, Vec<Vec3>) {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let th = golden * i as f64;
        pts.push(Vec3::new(r * th.cos(), r * th.sin(), z));
    }
    let normals = pts.clone();
    (pts, normals)
}

/// Axis-aligned cube [−1,1]³ as 12 CCW triangles.
pub fn cube() -> HalfedgeMesh {
    let p = |x: f64, y: f64, z: f64| Vec3::new(x, y, z);
    let positions = vec![
        p(-1., -1., -1.),
        p(1., -1., -1.),
        p(1., 1., -1.),
        p(-1., 1., -1.),
        p(-1., -1., 1.),
        p(1., -1., 1.),
        p(1., 1., 1.),
        p(-1., 1., 1.),
    ];
    let faces: [[u32; 3]; 12] = [
        [0, 3, 2],
        [0, 2, 1],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [3, 7, 6],
        [3, 6, 2],
        [0, 4, 7],
        [0, 7, 3],
        [1, 2, 6],
        [1, 6, 5],
    ];
    HalfedgeMesh::from_faces(positions, &faces).unwrap()
}

/// Regular tetrahedron inscribed in the unit sphere.
pub fn tetrahedron() -> HalfedgeMesh {
    let s = 1.0 / (3.0f64).sqrt();
    let positions = vec![
        Vec3::new(s, s, s),
        Vec3::new(s, -s, -s),
        Vec3::new(-s, s, -s),
        Vec3::new(-s, -s, s),
    ];
    let faces: [[u32; 3]; 4] = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    HalfedgeMesh::from_faces(positions, &faces).unwrap()
}

/// Regular icosahedron on the unit sphere.
pub fn icosahedron() -> HalfedgeMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut positions = vec![
        Vec3::new(-1., phi, 0.),
        Vec3::new(1., phi, 0.),
        Vec3::new(-1., -phi, 0.),
        Vec3::new(1., -phi, 0.),
        Vec3::new(0., -1., phi),
        Vec3::new(0., 1., phi),
        Vec3::new(0., -1., -phi),
        Vec3::new(0., 1., -phi),
        Vec3::new(phi, 0., -1.),
        Vec3::new(phi, 0., 1.),
        Vec3::new(-phi, 0., -1.),
        Vec3::new(-phi, 0., 1.),
    ];
    for p in &mut positions {
        *p = p.normalize();
    }
    let faces: [[u32; 3]; 20] = [
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
    HalfedgeMesh::from_faces(positions, &faces).unwrap()
}

/// Icosahedron with `n` rounds of midpoint subdivision, vertices projected
/// to the unit sphere. Face count is 20·4ⁿ.
pub fn icosphere(n: usize) -> HalfedgeMesh {
    let mut mesh = icosahedron();
    for _ in 0..n {
        let mut positions: Vec<Vec3> = mesh.positions().to_vec();
        let mut midpoint = std::collections::HashMap::new();
        let mut faces = Vec::with_capacity(mesh.n_faces() * 4);
        for f in mesh.live_faces() {
            let [a, b, c] = mesh.face_vertices(f);
            let mut mid = |u: u32, v: u32| -> u32 {
                let key = (u.min(v), u.max(v));
                *midpoint.entry(key).or_insert_with(|| {
                    let m = ((positions[u as usize] + positions[v as usize]) * 0.5).normalize();
                    positions.push(m);
                    positions.len() as u32 - 1
                })
            };
            let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
            faces.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        mesh = HalfedgeMesh::from_faces(positions, &faces).unwrap();
    }
    mesh
}

/// Structured torus mesh: `nu × nv` quad grid split into triangles, major
/// radius `big_r`, minor radius `small_r`, centered at the origin around z.
pub fn torus_mesh(nu: usize, nv: usize, big_r: f64, small_r: f64) -> HalfedgeMesh {
    let mut positions = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let u = 2.0 * std::f64::consts::PI * i as f64 / nu as f64;
        for j in 0..nv {
            let v = 2.0 * std::f64::consts::PI * j as f64 / nv as f64;
            let ring = big_r + small_r * v.cos();
            positions.push(Vec3::new(
                ring * u.cos(),
                ring * u.sin(),
                small_r * v.sin(),
            ));
        }
    }
    let idx = |i: usize, j: usize| ((i % nu) * nv + (j % nv)) as u32;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            faces.push([a, b, c]);
            faces.push([a, c, d]);
        }
    }
    HalfedgeMesh::from_faces(positions, &faces).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_has_30_edges_matching_brute_force() {
        let m = icosahedron();
        assert_eq!(m.n_edges(), 30);
        assert_eq!(m.euler_characteristic(), 2);
        // Brute-force edge count over face pairs.
        let mut pairs = std::collections::HashSet::new();
        for f in m.live_faces() {
            let [a, b, c] = m.face_vertices(f);
            for (u, v) in [(a, b), (b, c), (c, a)] {
                pairs.insert((u.min(v), u.max(v)));
            }
        }
        assert_eq!(pairs.len(), 30);
    }

    #[test]
    fn icosphere_counts_and_radius() {
        let m = icosphere(3);
        assert_eq!(m.n_faces(), 20 * 64);
        assert_eq!(m.euler_characteristic(), 2);
        for v in m.live_vertices() {
            assert_near(m.position(v).norm(), 1.0, 1e-12, "icosphere radius");
        }
        m.validate().unwrap();
    }

    #[test]
    fn torus_genus_one() {
        let m = torus_mesh(24, 12, 1.0, 0.3);
        assert_eq!(m.euler_characteristic(), 0);
        m.validate().unwrap();
    }
}
