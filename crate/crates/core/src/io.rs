//! Legacy ASCII VTK snapshots, a reader for them, CSV time series and
//! marching-triangle contours.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::stepper::{State, StepReport};

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    f.flush().map_err(|e| Error::io(path, e))
}

fn geometry(mesh: &Mesh, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(s, "POINTS {} double", mesh.num_vertices());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} 0", num(v[0]), num(v[1]));
    }
    let nc = mesh.num_cells();
    let _ = writeln!(s, "CELLS {nc} {}", 4 * nc);
    for c in &mesh.cells {
        let _ = writeln!(s, "3 {} {} {}", c[0], c[1], c[2]);
    }
    let _ = writeln!(s, "CELL_TYPES {nc}");
    for _ in 0..nc {
        s.push_str("5\n");
    }
    s
}

fn scalars(s: &mut String, name: &str, values: &[f64]) {
    let _ = writeln!(s, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in values {
        s.push_str(&num(*v));
        s.push('\n');
    }
}

/// Snapshot with cell data `u, c1.., s1.., p` and point data `u_tilde, mu, q`.
pub fn write_vtk(path: &Path, mesh: &Mesh, state: &State) -> Result<()> {
    let mut s = geometry(mesh, &format!("biofilm state t={}", num(state.t)));
    let _ = writeln!(s, "CELL_DATA {}", mesh.num_cells());
    scalars(&mut s, "u", &state.conc.u.values);
    for (i, c) in state.conc.c.iter().enumerate() {
        scalars(&mut s, &format!("c{}", i + 1), &c.values);
    }
    for (j, f) in state.conc.s.iter().enumerate() {
        scalars(&mut s, &format!("s{}", j + 1), &f.values);
    }
    scalars(&mut s, "p", &state.p.values);
    let _ = writeln!(s, "POINT_DATA {}", mesh.num_vertices());
    scalars(&mut s, "u_tilde", &state.u_tilde.values);
    scalars(&mut s, "mu", &state.mu.values);
    s.push_str("VECTORS q double\n");
    for q in &state.q.values[..mesh.num_vertices()] {
        let _ = writeln!(s, "{} {} 0", num(q[0]), num(q[1]));
    }
    write_file(path, &s)
}

/// Mesh only, with cell areas and the boundary tag of each boundary cell
/// (0 interior, 1 wall, 2 inlet, 3 outlet; the last tag seen wins).
pub fn write_mesh_vtk(path: &Path, mesh: &Mesh) -> Result<()> {
    let mut s = geometry(mesh, "mesh");
    let _ = writeln!(s, "CELL_DATA {}", mesh.num_cells());
    scalars(&mut s, "area", &mesh.cell_areas);
    let mut tags = vec![0.0; mesh.num_cells()];
    for be in &mesh.boundary_edges {
        tags[be.cell] = match be.tag {
            crate::mesh::BoundaryTag::Wall => 1.0,
            crate::mesh::BoundaryTag::Inlet => 2.0,
            crate::mesh::BoundaryTag::Outlet => 3.0,
        };
    }
    scalars(&mut s, "boundary", &tags);
    write_file(path, &s)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VtkData {
    pub title: String,
    pub points: Vec<[f64; 3]>,
    pub cells: Vec<Vec<usize>>,
    pub cell_scalars: BTreeMap<String, Vec<f64>>,
    pub point_scalars: BTreeMap<String, Vec<f64>>,
    pub point_vectors: BTreeMap<String, Vec<[f64; 3]>>,
}

/// Reads the subset of legacy ASCII VTK written by this module.
pub fn read_vtk(path: &Path) -> Result<VtkData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: &str| Error::InvalidArgument(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let mut out = VtkData::default();
    lines.next().ok_or_else(|| bad("empty file"))?;
    out.title = lines.next().unwrap_or_default().to_string();
    let mut tokens = lines.flat_map(|l| l.split_whitespace());
    let mut next = || tokens.next().ok_or_else(|| bad("unexpected end of file"));
    let parse_f = |t: &str| t.parse::<f64>().map_err(|_| bad(&format!("bad number `{t}`")));
    let parse_u = |t: &str| t.parse::<usize>().map_err(|_| bad(&format!("bad integer `{t}`")));
    let mut section = "";
    loop {
        let Ok(tok) = next() else { break };
        match tok {
            "ASCII" | "DATASET" | "UNSTRUCTURED_GRID" => {}
            "POINTS" => {
                let n = parse_u(next()?)?;
                next()?;
                for _ in 0..n {
                    out.points.push([parse_f(next()?)?, parse_f(next()?)?, parse_f(next()?)?]);
                }
            }
            "CELLS" => {
                let n = parse_u(next()?)?;
                next()?;
                for _ in 0..n {
                    let k = parse_u(next()?)?;
                    let mut c = Vec::with_capacity(k);
                    for _ in 0..k {
                        c.push(parse_u(next()?)?);
                    }
                    out.cells.push(c);
                }
            }
            "CELL_TYPES" => {
                let n = parse_u(next()?)?;
                for _ in 0..n {
                    next()?;
                }
            }
            "CELL_DATA" => {
                next()?;
                section = "cell";
            }
            "POINT_DATA" => {
                next()?;
                section = "point";
            }
            "SCALARS" => {
                let name = next()?.to_string();
                next()?;
                let mut t = next()?;
                if t == "1" {
                    t = next()?;
                }
                if t == "LOOKUP_TABLE" {
                    next()?;
                }
                let n = if section == "cell" { out.cells.len() } else { out.points.len() };
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(parse_f(next()?)?);
                }
                if section == "cell" {
                    out.cell_scalars.insert(name, v);
                } else {
                    out.point_scalars.insert(name, v);
                }
            }
            "VECTORS" => {
                let name = next()?.to_string();
                next()?;
                let mut v = Vec::with_capacity(out.points.len());
                for _ in 0..out.points.len() {
                    v.push([parse_f(next()?)?, parse_f(next()?)?, parse_f(next()?)?]);
                }
                out.point_vectors.insert(name, v);
            }
            other => return Err(bad(&format!("unexpected token `{other}`"))),
        }
    }
    Ok(out)
}

/// Writes one CSV row per step report and flushes after each row, so a run
/// that aborts keeps everything written so far.
pub struct TimeSeriesWriter {
    writer: csv::Writer<File>,
    path: PathBuf,
    rows: usize,
}

impl TimeSeriesWriter {
    pub fn create(path: &Path, kb: usize, kf: usize) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut writer = csv::Writer::from_writer(file);
        let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
        writer.write_record(StepReport::csv_header(kb, kf)).map_err(csv_err)?;
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(Self {
            writer,
            path: path.to_path_buf(),
            rows: 0,
        })
    }

    pub fn write(&mut self, report: &StepReport) -> Result<()> {
        let path = &self.path;
        self.writer
            .write_record(report.csv_record())
            .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
        self.writer.flush().map_err(|e| Error::io(path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }
}

/// Level set `values = level` of a P1 field as line segments, one per
/// crossed triangle.
pub fn contour_segments(mesh: &Mesh, values: &[f64], level: f64) -> Vec<[[f64; 2]; 2]> {
    let mut out = Vec::new();
    for c in &mesh.cells {
        let mut pts = Vec::with_capacity(2);
        for (a, b) in [(c[0], c[1]), (c[1], c[2]), (c[2], c[0])] {
            let (fa, fb) = (values[a] - level, values[b] - level);
            if (fa < 0.0) != (fb < 0.0) {
                let t = fa / (fa - fb);
                let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
                pts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
            }
        }
        if pts.len() == 2 {
            out.push([pts[0], pts[1]]);
        }
    }
    out
}

/// Solid-liquid interface: the contour of `u_tilde` halfway between its
/// extremes.
pub fn interface_contour(mesh: &Mesh, u_tilde: &[f64]) -> Vec<[[f64; 2]; 2]> {
    let lo = u_tilde.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = u_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Vec::new();
    }
    contour_segments(mesh, u_tilde, 0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_mesh, Rect};

    #[test]
    fn contour_of_linear_field_is_a_line() {
        let m = build_structured_mesh(4, 4, Rect::unit()).unwrap();
        let v: Vec<f64> = m.vertices.iter().map(|p| p[1]).collect();
        let segs = contour_segments(&m, &v, 0.3);
        assert!(!segs.is_empty());
        let len: f64 = segs
            .iter()
            .map(|s| ((s[1][0] - s[0][0]).powi(2) + (s[1][1] - s[0][1]).powi(2)).sqrt())
            .sum();
        assert!((len - 1.0).abs() < 1e-12);
        assert!(segs.iter().flatten().all(|p| (p[1] - 0.3).abs() < 1e-12));
    }

    #[test]
    fn flat_field_has_no_interface() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        assert!(interface_contour(&m, &vec![5.0; m.num_vertices()]).is_empty());
    }
}
