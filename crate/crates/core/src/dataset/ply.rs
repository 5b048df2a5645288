//! ASCII PLY subset: one `vertex` element with `x y z` and optionally
//! `nx ny nz`. Other scalar properties and other elements are skipped.
//! Values are written with 9 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::DatasetError;
use crate::cloud::PointCloud;

const SCALAR_TYPES: [&str; 16] = [
    "char", "uchar", "short", "ushort", "int", "uint", "float", "double", "int8", "uint8",
    "int16", "uint16", "int32", "uint32", "float32", "float64",
];

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
) -> Result<Vec<Element>, DatasetError> {
    let bad = |m: &str| DatasetError::BadHeader(m.to_string());
    match lines.next() {
        Some((_, l)) if l.trim_end() == "ply" => {}
        _ => return Err(bad("missing 'ply' magic line")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut format_seen = false;
    for (_, raw) in lines.by_ref() {
        let line = raw.trim();
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => {
                if !format_seen {
                    return Err(bad("missing format line"));
                }
                return Ok(elements);
            }
            ["format", "ascii", "1.0"] => format_seen = true,
            ["format", ..] => return Err(bad(&format!("unsupported format: {line}"))),
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| bad(&format!("bad element count: {line}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", ..] => {
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                if el.name == "vertex" {
                    return Err(bad("list properties on vertex are not supported"));
                }
                el.properties.push("list".to_string());
            }
            ["property", ty, name] => {
                if !SCALAR_TYPES.contains(ty) {
                    return Err(bad(&format!("unknown property type {ty}")));
                }
                let el = elements.last_mut().ok_or_else(|| bad("property before element"))?;
                el.properties.push(name.to_string());
            }
            _ => return Err(bad(&format!("unrecognized header line: {line}"))),
        }
    }
    Err(bad("missing end_header"))
}

pub fn read_ply_str(text: &str) -> Result<PointCloud, DatasetError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let elements = parse_header(&mut lines)?;
    let vertex_pos = elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| DatasetError::BadHeader("no vertex element".into()))?;
    let vertex = &elements[vertex_pos];
    let col = |n: &str| vertex.properties.iter().position(|p| p == n);
    let xyz = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => [x, y, z],
        _ => return Err(DatasetError::BadHeader("vertex lacks x, y or z".into())),
    };
    let nxyz = match (col("nx"), col("ny"), col("nz")) {
        (Some(x), Some(y), Some(z)) => Some([x, y, z]),
        (None, None, None) => None,
        _ => return Err(DatasetError::BadHeader("partial normal properties".into())),
    };

    let body: Vec<(usize, &str)> = lines.filter(|(_, l)| !l.trim().is_empty()).collect();
    let declared: usize = elements.iter().map(|e| e.count).sum();
    if body.len() != declared {
        return Err(DatasetError::CountMismatch {
            declared,
            found: body.len(),
        });
    }
    let skip: usize = elements[..vertex_pos].iter().map(|e| e.count).sum();
    let rows = &body[skip..skip + vertex.count];

    let mut points = Vec::with_capacity(rows.len());
    let mut normals = nxyz.map(|_| Vec::with_capacity(rows.len()));
    for &(line, row) in rows {
        let values: Vec<f64> = row
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| DatasetError::BadRow {
                line,
                msg: "non-numeric value".into(),
            })?;
        if values.len() != vertex.properties.len() {
            return Err(DatasetError::BadRow {
                line,
                msg: format!(
                    "expected {} values, found {}",
                    vertex.properties.len(),
                    values.len()
                ),
            });
        }
        points.push(Point3::new(values[xyz[0]], values[xyz[1]], values[xyz[2]]));
        if let (Some(n), Some(cols)) = (normals.as_mut(), nxyz) {
            n.push(Vector3::new(values[cols[0]], values[cols[1]], values[cols[2]]));
        }
    }
    Ok(match normals {
        Some(n) => PointCloud::with_normals(points, n)?,
        None => PointCloud::new(points)?,
    })
}

pub fn read_ply(path: &Path) -> Result<PointCloud, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    read_ply_str(&String::from_utf8_lossy(&bytes)).map_err(|e| e.in_file(path))
}

pub fn write_ply_string(cloud: &PointCloud) -> String {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {}", cloud.len());
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if cloud.normals().is_some() {
        out.push_str("property float nx\nproperty float ny\nproperty float nz\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{:.8e} {:.8e} {:.8e}", p.x, p.y, p.z);
        if let Some(n) = cloud.normals() {
            let n = n[i];
            let _ = write!(out, " {:.8e} {:.8e} {:.8e}", n.x, n.y, n.z);
        }
        out.push('\n');
    }
    out
}

pub fn write_ply(path: &Path, cloud: &PointCloud) -> Result<(), DatasetError> {
    fs::write(path, write_ply_string(cloud)).map_err(|e| DatasetError::io(path, e))
}
