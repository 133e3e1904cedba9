//! File formats: polygon and mesh JSON, spectrum and branch CSV, and JSON
//! reports. Every float is written with 17 significant digits.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use thiserror::Error;

use crate::deform::BranchDiagram;
use crate::eigensolve::Spectrum;
use crate::geometry::{GeometryError, Polygon, TriMesh};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: io::Error },
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, IoError>;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct FixedDigits;

impl Formatter for FixedDigits {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }
}

/// Compact JSON with fixed-precision floats and a trailing newline.
/// Non-finite values become `null`.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serializer emits UTF-8"))
}

#[derive(Serialize, Deserialize)]
struct PolygonFile {
    vertices: Vec<[f64; 2]>,
}

pub fn parse_polygon(text: &str) -> Result<Polygon> {
    let f: PolygonFile = serde_json::from_str(text)?;
    Ok(Polygon::from_coords(&f.vertices)?)
}

pub fn read_polygon(path: impl AsRef<Path>) -> Result<Polygon> {
    parse_polygon(&read_file(path)?)
}

pub fn polygon_json(p: &Polygon) -> String {
    let vertices = p.vertices().iter().map(|v| [v.x, v.y]).collect();
    to_json(&PolygonFile { vertices }).expect("plain data serializes")
}

#[derive(Serialize)]
struct MeshFile {
    points: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    /// Zero-based indices of boundary points.
    boundary: Vec<usize>,
}

pub fn mesh_json(m: &TriMesh) -> String {
    let file = MeshFile {
        points: m.points().iter().map(|p| [p.x, p.y]).collect(),
        triangles: m.triangles().to_vec(),
        boundary: (0..m.num_points()).filter(|&i| m.is_boundary(i)).collect(),
    };
    to_json(&file).expect("plain data serializes")
}

/// `index,eigenvalue,residual` with 1-based index.
pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from("index,eigenvalue,residual\n");
    for (i, (l, r)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
        writeln!(out, "{},{},{}", i + 1, fmt_f64(*l), fmt_f64(*r)).unwrap();
    }
    out
}

/// `param,branch_0,...`, one row per sample.
pub fn branch_csv(d: &BranchDiagram) -> String {
    let mut out = String::from("param");
    for b in 0..d.branches.len() {
        write!(out, ",branch_{b}").unwrap();
    }
    out.push('\n');
    for (s, p) in d.samples.iter().enumerate() {
        out.push_str(&fmt_f64(*p));
        for branch in &d.branches {
            out.push(',');
            out.push_str(&fmt_f64(branch[s]));
        }
        out.push('\n');
    }
    out
}

pub fn read_file(path: impl AsRef<Path>) -> Result<String> {
    let path = path.as_ref();
    std::fs::read_to_string(path).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, contents).map_err(|source| IoError::File {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::BoundaryCondition;
    use crate::eigensolve::SpectrumMeta;

    #[test]
    fn polygon_round_trip() {
        let p = Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [0.3, 0.7]]).unwrap();
        let text = polygon_json(&p);
        assert!(text.starts_with("{\"vertices\":[[0.0000000000000000e0,"));
        assert_eq!(parse_polygon(&text).unwrap(), p);
        let third = Polygon::from_coords(&[[0.0, 0.0], [1.0, 0.0], [1.0 / 3.0, 1.0]]).unwrap();
        assert_eq!(parse_polygon(&polygon_json(&third)).unwrap(), third);
    }

    #[test]
    fn polygon_errors() {
        assert!(matches!(
            parse_polygon("{\"vertices\": 3}"),
            Err(IoError::Json(_))
        ));
        let bowtie = "{\"vertices\": [[0,0],[1,1],[1,0],[0,1]]}";
        assert!(matches!(
            parse_polygon(bowtie),
            Err(IoError::Geometry(GeometryError::SelfIntersecting(..)))
        ));
    }

    #[test]
    fn spectrum_csv_layout() {
        let s = Spectrum {
            eigenvalues: vec![1.5, 2.0],
            eigenvectors: None,
            residuals: vec![0.125, 0.0],
            k: 2,
            meta: SpectrumMeta {
                bc: BoundaryCondition::Dirichlet,
                kappa: 0.0,
                metric_scale: 1.0,
                mesh_level: 0,
            },
        };
        let csv = spectrum_csv(&s);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "index,eigenvalue,residual");
        assert_eq!(lines[1], "1,1.5000000000000000e0,1.2500000000000000e-1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn json_nonfinite_is_null() {
        assert_eq!(
            to_json(&vec![f64::NAN, 0.25]).unwrap(),
            "[null,2.5000000000000000e-1]\n"
        );
    }

    #[test]
    fn mesh_export_lists_boundary() {
        let m = crate::geometry::criss_cross_grid(1.0, 1.0, 1, 1).unwrap();
        let v: serde_json::Value = serde_json::from_str(&mesh_json(&m)).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 5);
        assert_eq!(v["triangles"].as_array().unwrap().len(), 4);
        assert_eq!(v["boundary"].as_array().unwrap().len(), 4);
    }
}
