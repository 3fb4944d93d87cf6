//! Triangle meshes and the ASCII OBJ subset used for wreck assets.
//!
//! Only `v` and `f` records are read. Faces with more than three corners are
//! fan-triangulated from their first corner; `v/vt/vn` corner syntax keeps the
//! position index. Negative (relative) indices are accepted. Everything else
//! (`vt`, `vn`, `o`, `g`, `s`, `usemtl`, ...) is skipped.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, Triangle, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeshError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: face index {index} out of range for {vertex_count} vertices")]
    IndexOutOfRange {
        line: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("mesh has no non-degenerate triangles")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub name: String,
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

/// Parse outcome: the mesh and how many zero-area faces were dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMesh {
    pub mesh: TriangleMesh,
    pub degenerate_dropped: usize,
}

impl TriangleMesh {
    /// Build from raw parts, validating indices and dropping zero-area faces.
    #[allow(clippy::new_ret_no_self)]
    pub fn new(
        name: impl Into<String>,
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
    ) -> Result<ParsedMesh, MeshError> {
        let n = vertices.len();
        for t in &triangles {
            for &i in t {
                if i as usize >= n {
                    return Err(MeshError::IndexOutOfRange {
                        line: 0,
                        index: i as i64 + 1,
                        vertex_count: n,
                    });
                }
            }
        }
        finish(name.into(), vertices, triangles)
    }

    pub fn triangle(&self, i: usize) -> Triangle {
        let [a, b, c] = self.triangles[i];
        Triangle::new(
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        )
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }
}

fn finish(
    name: String,
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
) -> Result<ParsedMesh, MeshError> {
    let before = triangles.len();
    let triangles: Vec<[u32; 3]> = triangles
        .into_iter()
        .filter(|&[a, b, c]| {
            let t = Triangle::new(
                vertices[a as usize],
                vertices[b as usize],
                vertices[c as usize],
            );
            t.area() > 1e-12
        })
        .collect();
    let degenerate_dropped = before - triangles.len();
    if triangles.is_empty() {
        return Err(MeshError::Empty);
    }
    Ok(ParsedMesh {
        mesh: TriangleMesh {
            name,
            vertices,
            triangles,
        },
        degenerate_dropped,
    })
}

pub fn parse_obj(name: &str, text: &str) -> Result<ParsedMesh, MeshError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    for (line_idx, raw) in text.lines().enumerate() {
        let line_no = line_idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("v") => {
                let mut xyz = [0.0f64; 3];
                for (k, slot) in xyz.iter_mut().enumerate() {
                    let tok = parts.next().ok_or_else(|| MeshError::Malformed {
                        line: line_no,
                        message: "vertex needs 3 coordinates".to_string(),
                    })?;
                    *slot = tok.parse().map_err(|_| MeshError::Malformed {
                        line: line_no,
                        message: alloc::format!("bad coordinate {k}: {tok:?}"),
                    })?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let mut corners: Vec<u32> = Vec::new();
                for tok in parts {
                    let idx_str = tok.split('/').next().unwrap_or(tok);
                    let idx: i64 = idx_str.parse().map_err(|_| MeshError::Malformed {
                        line: line_no,
                        message: alloc::format!("bad face index {tok:?}"),
                    })?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { n + idx };
                    if idx == 0 || resolved < 0 || resolved >= n {
                        return Err(MeshError::IndexOutOfRange {
                            line: line_no,
                            index: idx,
                            vertex_count: vertices.len(),
                        });
                    }
                    corners.push(resolved as u32);
                }
                if corners.len() < 3 {
                    return Err(MeshError::Malformed {
                        line: line_no,
                        message: alloc::format!("face needs 3 corners, got {}", corners.len()),
                    });
                }
                for i in 1..corners.len() - 1 {
                    triangles.push([corners[0], corners[i], corners[i + 1]]);
                }
            }
            _ => {}
        }
    }
    finish(name.to_string(), vertices, triangles)
}

/// Axis-aligned box spanning `min..max`, 12 outward-wound triangles.
pub fn box_mesh(name: &str, min: Vec3, max: Vec3) -> TriangleMesh {
    let v = alloc::vec![
        Vec3::new(min.x, min.y, min.z),
        Vec3::new(max.x, min.y, min.z),
        Vec3::new(max.x, max.y, min.z),
        Vec3::new(min.x, max.y, min.z),
        Vec3::new(min.x, min.y, max.z),
        Vec3::new(max.x, min.y, max.z),
        Vec3::new(max.x, max.y, max.z),
        Vec3::new(min.x, max.y, max.z),
    ];
    let t = alloc::vec![
        [0, 2, 1],
        [0, 3, 2],
        [4, 5, 6],
        [4, 6, 7],
        [0, 1, 5],
        [0, 5, 4],
        [1, 2, 6],
        [1, 6, 5],
        [2, 3, 7],
        [2, 7, 6],
        [3, 0, 4],
        [3, 4, 7],
    ];
    TriangleMesh {
        name: name.to_string(),
        vertices: v,
        triangles: t,
    }
}

/// A crude cargo-ship hull: tapered bow, flat stern, deckhouse aft.
/// Length runs along +x, beam along y, keel at z = 0.
pub fn procedural_hull(length: f64, beam: f64, depth: f64) -> TriangleMesh {
    let hb = beam * 0.5;
    let bow = length * 0.5;
    let shoulder = length * 0.3;
    let stern = -length * 0.5;
    let keel_hb = hb * 0.6;
    // Cross sections: stern, shoulder, bow point. Each ring: keel-port, keel-stbd, deck-stbd, deck-port.
    let mut vertices = alloc::vec![
        Vec3::new(stern, -keel_hb, 0.0),
        Vec3::new(stern, keel_hb, 0.0),
        Vec3::new(stern, hb, depth),
        Vec3::new(stern, -hb, depth),
        Vec3::new(shoulder, -keel_hb, 0.0),
        Vec3::new(shoulder, keel_hb, 0.0),
        Vec3::new(shoulder, hb, depth),
        Vec3::new(shoulder, -hb, depth),
        Vec3::new(bow, 0.0, depth * 0.3),
        Vec3::new(bow, 0.0, depth * 1.1),
    ];
    let mut triangles: Vec<[u32; 3]> = alloc::vec![
        // stern plate
        [0, 2, 1],
        [0, 3, 2],
        // bottom
        [0, 1, 5],
        [0, 5, 4],
        // starboard side
        [1, 2, 6],
        [1, 6, 5],
        // port side
        [0, 4, 7],
        [0, 7, 3],
        // deck
        [3, 7, 6],
        [3, 6, 2],
        // bow
        [4, 5, 8],
        [5, 6, 9],
        [5, 9, 8],
        [4, 8, 9],
        [4, 9, 7],
        [7, 9, 6],
    ];
    // Deckhouse aft of midships.
    let house = box_mesh(
        "house",
        Vec3::new(stern + length * 0.08, -hb * 0.7, depth),
        Vec3::new(stern + length * 0.28, hb * 0.7, depth * 1.8),
    );
    let base = vertices.len() as u32;
    vertices.extend_from_slice(&house.vertices);
    triangles.extend(house.triangles.iter().map(|t| t.map(|i| i + base)));
    TriangleMesh {
        name: "procedural_hull".to_string(),
        vertices,
        triangles,
    }
}
