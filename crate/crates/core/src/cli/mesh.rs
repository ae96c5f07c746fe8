//! Triangle-mesh export of a stage in OFF (nOFF for dimensions other than 3)
//! or OBJ, and the matching reader used for round-trip checks.

use std::collections::BTreeSet;
use std::fmt::Write;
use std::str::FromStr;

use super::CliError;
use crate::complex_core::kuhn_simplices;
use crate::stage::Stage;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
}

impl FromStr for MeshFormat {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.to_ascii_lowercase().as_str() {
            "off" => Ok(MeshFormat::Off),
            "obj" => Ok(MeshFormat::Obj),
            _ => Err(CliError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub faces: Vec<[u32; 3]>,
}

/// Triangles of the stage: both Kuhn triangles of every square, and for
/// k-cells every triangular face of every Kuhn simplex, deduplicated.
/// Square triangles are ordered anticlockwise in the base.
pub fn stage_mesh(stage: &Stage, project: Option<[usize; 3]>) -> Result<Mesh, CliError> {
    let d = stage.ambient_dim;
    if let Some(p) = project {
        if p.iter().any(|a| *a >= d) {
            return Err(CliError::Config(format!("projection axes {p:?} outside dimension {d}")));
        }
    }
    let vertices = (0..stage.vertex_count() as u32)
        .map(|i| {
            let v = stage.vertex(i);
            match project {
                Some(p) => p.iter().map(|a| v[*a]).collect(),
                None => v.to_vec(),
            }
        })
        .collect();
    let k = stage.k();
    let mut faces = Vec::new();
    let mut seen = BTreeSet::new();
    for (c, rec) in stage.complex.cells.iter().enumerate() {
        let corners = &stage.cell_vertices[c];
        for s in kuhn_simplices(k, rec.mirror) {
            for a in 0..s.len() {
                for b in a + 1..s.len() {
                    for e in b + 1..s.len() {
                        let mut t = [s[a], s[b], s[e]];
                        if k == 2 && orientation(t) < 0 {
                            t.swap(1, 2);
                        }
                        let tri = t.map(|i| corners[i]);
                        let mut key = tri;
                        key.sort();
                        if seen.insert(key) {
                            faces.push(tri);
                        }
                    }
                }
            }
        }
    }
    Ok(Mesh { dim: project.map_or(d, |_| 3), vertices, faces })
}

/// Sign of the base-plane area of a triangle of corner indices (bit d of a
/// corner index is its offset along axis d).
fn orientation(t: [usize; 3]) -> i32 {
    let p = t.map(|i| [(i & 1) as i32, ((i >> 1) & 1) as i32]);
    let cross = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
    cross.signum()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn write_mesh(mesh: &Mesh, format: MeshFormat) -> String {
    let mut out = String::new();
    match format {
        MeshFormat::Off => {
            if mesh.dim == 3 {
                out.push_str("OFF\n");
            } else {
                let _ = writeln!(out, "nOFF\n{}", mesh.dim);
            }
            let _ = writeln!(out, "{} {} 0", mesh.vertices.len(), mesh.faces.len());
            for v in &mesh.vertices {
                let _ = writeln!(out, "{}", join(v));
            }
            for f in &mesh.faces {
                let _ = writeln!(out, "3 {} {} {}", f[0], f[1], f[2]);
            }
        }
        MeshFormat::Obj => {
            let _ = writeln!(out, "# dimension {}", mesh.dim);
            for v in &mesh.vertices {
                let _ = writeln!(out, "v {}", join(v));
            }
            for f in &mesh.faces {
                let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
            }
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Corrupt(msg.into())
}

fn floats(s: &str) -> Result<Vec<f64>, CliError> {
    s.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| bad(format!("{t:?}: {e}")))).collect()
}

fn indices(s: &str, base: u32) -> Result<[u32; 3], CliError> {
    let v: Vec<u32> = s
        .split_whitespace()
        .map(|t| t.split('/').next().unwrap_or(t).parse::<u32>().map_err(|e| bad(format!("{t:?}: {e}"))))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [a, b, c] if *a >= base && *b >= base && *c >= base => Ok([a - base, b - base, c - base]),
        _ => Err(bad(format!("not a triangle: {s:?}"))),
    }
}

pub fn read_mesh(text: &str, format: MeshFormat) -> Result<Mesh, CliError> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
    match format {
        MeshFormat::Off => {
            let dim = match lines.next() {
                Some("OFF") => 3,
                Some("nOFF") => lines.next().ok_or_else(|| bad("missing dimension"))?.parse().map_err(|_| bad("dimension"))?,
                other => return Err(bad(format!("header {other:?}"))),
            };
            let counts = floats(lines.next().ok_or_else(|| bad("missing counts"))?)?;
            let (nv, nf) = match counts.as_slice() {
                [a, b, _] => (*a as usize, *b as usize),
                _ => return Err(bad("counts line")),
            };
            let vertices = (0..nv)
                .map(|_| floats(lines.next().ok_or_else(|| bad("missing vertex"))?))
                .collect::<Result<Vec<_>, _>>()?;
            if vertices.iter().any(|v| v.len() != dim) {
                return Err(bad("vertex arity"));
            }
            let faces = (0..nf)
                .map(|_| {
                    let l = lines.next().ok_or_else(|| bad("missing face"))?;
                    let rest = l.strip_prefix("3 ").ok_or_else(|| bad(format!("not a triangle: {l:?}")))?;
                    indices(rest, 0)
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(Mesh { dim, vertices, faces })
        }
        MeshFormat::Obj => {
            let mut vertices = Vec::new();
            let mut faces = Vec::new();
            for l in lines {
                if let Some(rest) = l.strip_prefix("v ") {
                    vertices.push(floats(rest)?);
                } else if let Some(rest) = l.strip_prefix("f ") {
                    faces.push(indices(rest, 1)?);
                }
            }
            let dim = vertices.first().map_or(0, Vec::len);
            if vertices.iter().any(|v| v.len() != dim) {
                return Err(bad("vertex arity"));
            }
            Ok(Mesh { dim, vertices, faces })
        }
    }
}

/// Mesh text of stage `j` of a bundle.
pub fn cmd_export(bundle: &super::Bundle, j: u32, format: MeshFormat, project: Option<[usize; 3]>) -> Result<String, CliError> {
    let rec = bundle.stage(j)?;
    Ok(write_mesh(&stage_mesh(&rec.stage, project)?, format))
}
