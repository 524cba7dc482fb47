//! Mesh and point-cloud file I/O.
//!
//! Formats: ASCII OBJ and binary little-endian PLY for triangle meshes;
//! ASCII XYZ (6 floats per line: position + normal) and PLY for oriented
//! point clouds. OBJ floats are written with 9 significant digits; PLY
//! stores raw 32-bit floats, so loading reproduces them bit-exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{HalfedgeMesh, MeshError};
use crate::Vec3;

/// Loads a triangle mesh from `.obj` or `.ply`, validating manifoldness.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<HalfedgeMesh, MeshError> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "obj" => {
            let (positions, faces) = read_obj(path)?;
            HalfedgeMesh::from_faces(positions, &faces)
        }
        "ply" => {
            let ply = read_ply(path)?;
            let positions = ply.positions()?;
            if ply.faces.is_empty() {
                return Err(MeshError::Parse {
                    path: path.display().to_string(),
                    line: 0,
                    msg: "PLY contains no faces".into(),
                });
            }
            HalfedgeMesh::from_faces(positions, &ply.faces)
        }
        other => Err(MeshError::UnsupportedFormat(other.to_string())),
    }
}

/// Loads an oriented point cloud (positions + unit normals) from `.xyz`
/// (six ASCII floats per line) or `.ply` (x y z nx ny nz properties).
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<(Vec<Vec3>, Vec<Vec3>), MeshError> {
    let path = path.as_ref();
    match extension(path)?.as_str() {
        "xyz" => read_xyz_cloud(path),
        "ply" => {
            let ply = read_ply(path)?;
            let positions = ply.positions()?;
            let normals = ply.normals().ok_or_else(|| MeshError::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: "PLY lacks nx/ny/nz vertex properties".into(),
            })?;
            Ok((positions, normals))
        }
        other => Err(MeshError::UnsupportedFormat(other.to_string())),
    }
}

/// Writes a mesh as ASCII OBJ with 9-significant-digit floats.
pub fn write_obj(path: impl AsRef<Path>, mesh: &HalfedgeMesh) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    let vmap = live_vertex_map(mesh);
    for v in mesh.live_vertices() {
        let p = mesh.position(v);
        writeln!(w, "v {:.8e} {:.8e} {:.8e}", p.x, p.y, p.z)?;
    }
    for f in mesh.live_faces() {
        let [a, b, c] = mesh.face_vertices(f).map(|v| vmap[v as usize] + 1);
        writeln!(w, "f {a} {b} {c}")?;
    }
    Ok(())
}

/// Writes a mesh as binary little-endian PLY (32-bit float positions),
/// optionally with one scalar vertex attribute.
pub fn write_ply(path: impl AsRef<Path>, mesh: &HalfedgeMesh) -> Result<(), MeshError> {
    write_ply_impl(path, mesh, None)
}

/// Writes a mesh as binary PLY with a named per-vertex scalar property.
pub fn write_ply_scalar(
    path: impl AsRef<Path>,
    mesh: &HalfedgeMesh,
    name: &str,
    values: &[f64],
) -> Result<(), MeshError> {
    write_ply_impl(path, mesh, Some((name, values)))
}

fn write_ply_impl(
    path: impl AsRef<Path>,
    mesh: &HalfedgeMesh,
    scalar: Option<(&str, &[f64])>,
) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n",
        mesh.n_vertices()
    )?;
    if let Some((name, _)) = scalar {
        writeln!(w, "property float {name}")?;
    }
    write!(
        w,
        "element face {}\nproperty list uchar uint vertex_indices\nend_header\n",
        mesh.n_faces()
    )?;
    let vmap = live_vertex_map(mesh);
    for v in mesh.live_vertices() {
        let p = mesh.position(v);
        for c in [p.x, p.y, p.z] {
            w.write_all(&(c as f32).to_le_bytes())?;
        }
        if let Some((_, values)) = scalar {
            w.write_all(&(values[v as usize] as f32).to_le_bytes())?;
        }
    }
    for f in mesh.live_faces() {
        w.write_all(&[3u8])?;
        for v in mesh.face_vertices(f) {
            w.write_all(&vmap[v as usize].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Writes bare points, one `x y z` line each.
pub fn write_xyz(path: impl AsRef<Path>, points: &[Vec3]) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    for p in points {
        writeln!(w, "{:.8e} {:.8e} {:.8e}", p.x, p.y, p.z)?;
    }
    Ok(())
}

/// Writes an oriented point cloud, one `x y z nx ny nz` line each.
pub fn write_point_cloud_xyz(
    path: impl AsRef<Path>,
    points: &[Vec3],
    normals: &[Vec3],
) -> Result<(), MeshError> {
    let mut w = BufWriter::new(File::create(path)?);
    for (p, n) in points.iter().zip(normals) {
        writeln!(
            w,
            "{:.8e} {:.8e} {:.8e} {:.8e} {:.8e} {:.8e}",
            p.x, p.y, p.z, n.x, n.y, n.z
        )?;
    }
    Ok(())
}

fn extension(path: &Path) -> Result<String, MeshError> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .ok_or_else(|| MeshError::UnsupportedFormat(path.display().to_string()))
}

/// Dense renumbering of live vertices in id order.
fn live_vertex_map(mesh: &HalfedgeMesh) -> Vec<u32> {
    let mut map = vec![u32::MAX; mesh.vertex_slots()];
    for (i, v) in mesh.live_vertices().enumerate() {
        map[v as usize] = i as u32;
    }
    map
}

// ----- OBJ -----

fn read_obj(path: &Path) -> Result<(Vec<Vec3>, Vec<[u32; 3]>), MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut positions = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let ln = ln + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut p = [0.0f64; 3];
                for c in &mut p {
                    *c = tok
                        .next()
                        .ok_or_else(|| err(ln, "vertex needs 3 coordinates".into()))?
                        .parse()
                        .map_err(|e| err(ln, format!("bad coordinate: {e}")))?;
                }
                positions.push(Vec3::new(p[0], p[1], p[2]));
            }
            Some("f") => {
                let idx: Vec<u32> = tok
                    .map(|t| -> Result<u32, MeshError> {
                        let first = t.split('/').next().unwrap_or(t);
                        let i: i64 = first
                            .parse()
                            .map_err(|e| err(ln, format!("bad face index: {e}")))?;
                        if i < 1 {
                            return Err(err(ln, format!("unsupported face index {i}")));
                        }
                        Ok((i - 1) as u32)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() != 3 {
                    return Err(err(ln, format!("face has {} vertices, need 3", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {} // comments, normals, groups, materials
        }
    }
    Ok((positions, faces))
}

// ----- PLY -----

#[derive(Clone, Copy, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Self::I8,
            "uchar" | "uint8" => Self::U8,
            "short" | "int16" => Self::I16,
            "ushort" | "uint16" => Self::U16,
            "int" | "int32" => Self::I32,
            "uint" | "uint32" => Self::U32,
            "float" | "float32" => Self::F32,
            "double" | "float64" => Self::F64,
            _ => return None,
        })
    }
    fn size(self) -> usize {
        match self {
            Self::I8 | Self::U8 => 1,
            Self::I16 | Self::U16 => 2,
            Self::I32 | Self::U32 | Self::F32 => 4,
            Self::F64 => 8,
        }
    }
    fn read_f64(self, bytes: &[u8]) -> f64 {
        match self {
            Self::I8 => bytes[0] as i8 as f64,
            Self::U8 => bytes[0] as f64,
            Self::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            Self::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            Self::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

struct PlyData {
    /// Vertex property table: (name, values) per scalar property.
    vertex_props: Vec<(String, Vec<f64>)>,
    faces: Vec<[u32; 3]>,
}

impl PlyData {
    fn column(&self, name: &str) -> Option<&[f64]> {
        self.vertex_props
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
    fn positions(&self) -> Result<Vec<Vec3>, MeshError> {
        let (x, y, z) = match (self.column("x"), self.column("y"), self.column("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => {
                return Err(MeshError::Parse {
                    path: String::new(),
                    line: 0,
                    msg: "PLY lacks x/y/z vertex properties".into(),
                })
            }
        };
        Ok((0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect())
    }
    fn normals(&self) -> Option<Vec<Vec3>> {
        match (self.column("nx"), self.column("ny"), self.column("nz")) {
            (Some(x), Some(y), Some(z)) => {
                Some((0..x.len()).map(|i| Vec3::new(x[i], y[i], z[i])).collect())
            }
            _ => None,
        }
    }
}

fn read_ply(path: &Path) -> Result<PlyData, MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut reader = BufReader::new(File::open(path)?);

    // Header is ASCII lines; body is raw bytes right after "end_header\n".
    let mut header = String::new();
    let mut line_no = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Err(err(line_no, "unexpected end of header".into()));
        }
        line_no += 1;
        header.push_str(&line);
        if line.trim_end() == "end_header" {
            break;
        }
        if line_no > 1000 {
            return Err(err(line_no, "header too large".into()));
        }
    }

    struct Element {
        name: String,
        count: usize,
        // (type, name) for scalars; list properties get (count type, index type).
        scalars: Vec<(PlyType, String)>,
        list: Option<(PlyType, PlyType)>,
    }
    let mut elements: Vec<Element> = Vec::new();
    for (ln, line) in header.lines().enumerate() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("ply") | Some("comment") | Some("end_header") | None => {}
            Some("format") => {
                let fmt = tok.next().unwrap_or("");
                if fmt != "binary_little_endian" {
                    return Err(MeshError::UnsupportedFormat(format!("PLY format {fmt}")));
                }
            }
            Some("element") => {
                let name = tok.next().unwrap_or("").to_string();
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| err(ln + 1, "bad element count".into()))?;
                elements.push(Element {
                    name,
                    count,
                    scalars: Vec::new(),
                    list: None,
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(ln + 1, "property before element".into()))?;
                let t = tok.next().unwrap_or("");
                if t == "list" {
                    let count_t = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| err(ln + 1, "bad list count type".into()))?;
                    let idx_t = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| err(ln + 1, "bad list index type".into()))?;
                    el.list = Some((count_t, idx_t));
                } else {
                    let ty = PlyType::parse(t)
                        .ok_or_else(|| err(ln + 1, format!("unknown property type {t}")))?;
                    el.scalars.push((ty, tok.next().unwrap_or("").to_string()));
                }
            }
            Some(other) => return Err(err(ln + 1, format!("unknown header keyword {other}"))),
        }
    }

    let mut body = Vec::new();
    reader.read_to_end(&mut body)?;
    let mut at = 0usize;
    let mut take = |n: usize| -> Result<&[u8], MeshError> {
        if at + n > body.len() {
            return Err(MeshError::Parse {
                path: path.display().to_string(),
                line: 0,
                msg: "truncated PLY body".into(),
            });
        }
        let s = &body[at..at + n];
        at += n;
        Ok(s)
    };

    let mut data = PlyData {
        vertex_props: Vec::new(),
        faces: Vec::new(),
    };
    for el in &elements {
        match el.name.as_str() {
            "vertex" => {
                let mut cols: Vec<Vec<f64>> =
                    el.scalars.iter().map(|_| Vec::with_capacity(el.count)).collect();
                for _ in 0..el.count {
                    for (k, (ty, _)) in el.scalars.iter().enumerate() {
                        let bytes = take(ty.size())?;
                        cols[k].push(ty.read_f64(bytes));
                    }
                }
                data.vertex_props = el
                    .scalars
                    .iter()
                    .map(|(_, n)| n.clone())
                    .zip(cols)
                    .collect();
            }
            "face" => {
                let (count_t, idx_t) = el
                    .list
                    .ok_or_else(|| err(0, "face element lacks list property".into()))?;
                for _ in 0..el.count {
                    let n = count_t.read_f64(take(count_t.size())?) as usize;
                    if n != 3 {
                        return Err(err(0, format!("face with {n} vertices, need 3")));
                    }
                    let mut tri = [0u32; 3];
                    for t in &mut tri {
                        *t = idx_t.read_f64(take(idx_t.size())?) as u32;
                    }
                    data.faces.push(tri);
                }
            }
            other => return Err(MeshError::UnsupportedFormat(format!("PLY element {other}"))),
        }
    }
    Ok(data)
}

fn read_xyz_cloud(path: &Path) -> Result<(Vec<Vec3>, Vec<Vec3>), MeshError> {
    let err = |line: usize, msg: String| MeshError::Parse {
        path: path.display().to_string(),
        line,
        msg,
    };
    let reader = BufReader::new(File::open(path)?);
    let mut points = Vec::new();
    let mut normals = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let vals: Vec<f64> = t
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| err(ln + 1, format!("bad float: {e}")))?;
        if vals.len() != 6 {
            return Err(err(ln + 1, format!("{} fields, need 6", vals.len())));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        normals.push(Vec3::new(vals[3], vals[4], vals[5]));
    }
    if points.is_empty() {
        return Err(err(0, "empty point cloud".into()));
    }
    Ok((points, normals))
}
