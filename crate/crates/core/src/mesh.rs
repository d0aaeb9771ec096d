//! Conforming triangulations of polygonal domains.
//!
//! Interior edges are stored with their two neighbours `(k, l)`, `k < l`, and a
//! unit normal pointing from `k` into `l`. Boundary normals point out of the
//! domain. Every cell keeps its three edges ordered so that local edge `i` is
//! the one opposite local vertex `i`.

use std::collections::HashMap;

use crate::error::{Error, Result};

/// Tolerance of the coordinate predicates used for boundary tagging.
pub const TAG_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryTag {
    Wall,
    Inlet,
    Outlet,
}

impl BoundaryTag {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Wall => "wall",
            BoundaryTag::Inlet => "inlet",
            BoundaryTag::Outlet => "outlet",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InteriorEdge {
    pub edge: usize,
    pub k: usize,
    pub l: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub edge: usize,
    pub cell: usize,
    pub tag: BoundaryTag,
}

/// Position of an edge in either the interior or the boundary list.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeSlot {
    Interior(usize),
    Boundary(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 0.0, 1.0, 1.0)
    }
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    pub edges: Vec<[usize; 2]>,
    pub interior_edges: Vec<InteriorEdge>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub edge_normals: Vec<[f64; 2]>,
    pub edge_lengths: Vec<f64>,
    pub cell_areas: Vec<f64>,
    pub cell_diameters: Vec<f64>,
    pub cell_centroids: Vec<[f64; 2]>,
    /// Local edge `i` is opposite local vertex `i`.
    pub cell_edges: Vec<[usize; 3]>,
    /// Gradients of the barycentric coordinates, constant per cell.
    pub cell_grad_bary: Vec<[[f64; 2]; 3]>,
    pub edge_slots: Vec<EdgeSlot>,
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn norm(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}

fn signed_area(p: [[f64; 2]; 3]) -> f64 {
    let a = sub(p[1], p[0]);
    let b = sub(p[2], p[0]);
    0.5 * (a[0] * b[1] - a[1] * b[0])
}

impl Mesh {
    /// Builds connectivity from a raw triangle soup. Clockwise triangles are
    /// reoriented; `tagger` labels each boundary edge from its endpoints.
    pub fn from_triangles<F>(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>, tagger: F) -> Result<Mesh>
    where
        F: Fn([f64; 2], [f64; 2]) -> BoundaryTag,
    {
        if cells.is_empty() {
            return Err(Error::InvalidArgument("mesh has no cells".into()));
        }
        let nv = vertices.len();
        let mut cells = cells;
        let mut scale: f64 = 0.0;
        for v in &vertices {
            if !v[0].is_finite() || !v[1].is_finite() {
                return Err(Error::InvalidArgument("non-finite vertex coordinate".into()));
            }
            scale = scale.max(v[0].abs()).max(v[1].abs());
        }
        let scale = scale.max(1.0);

        let mut cell_areas = Vec::with_capacity(cells.len());
        let mut cell_centroids = Vec::with_capacity(cells.len());
        let mut cell_diameters = Vec::with_capacity(cells.len());
        let mut cell_grad_bary = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter_mut().enumerate() {
            if c.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidArgument(format!("cell {ci} references a missing vertex")));
            }
            let mut p = [vertices[c[0]], vertices[c[1]], vertices[c[2]]];
            let mut area = signed_area(p);
            if area.abs() <= 1e-14 * scale * scale {
                return Err(Error::DegenerateMesh(format!("cell {ci} has zero area")));
            }
            if area < 0.0 {
                c.swap(1, 2);
                p.swap(1, 2);
                area = -area;
            }
            cell_areas.push(area);
            cell_centroids.push([
                (p[0][0] + p[1][0] + p[2][0]) / 3.0,
                (p[0][1] + p[1][1] + p[2][1]) / 3.0,
            ]);
            let mut diam: f64 = 0.0;
            let mut grads = [[0.0; 2]; 3];
            for i in 0..3 {
                let pj = p[(i + 1) % 3];
                let pk = p[(i + 2) % 3];
                diam = diam.max(norm(sub(pk, pj)));
                grads[i] = [(pj[1] - pk[1]) / (2.0 * area), (pk[0] - pj[0]) / (2.0 * area)];
            }
            cell_diameters.push(diam);
            cell_grad_bary.push(grads);
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (ci, c) in cells.iter().enumerate() {
            let mut ce = [0usize; 3];
            for (i, slot) in ce.iter_mut().enumerate() {
                let a = c[(i + 1) % 3];
                let b = c[(i + 2) % 3];
                let key = (a.min(b), a.max(b));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push(Vec::new());
                    edges.len() - 1
                });
                edge_cells[id].push(ci);
                *slot = id;
            }
            cell_edges.push(ce);
        }

        let ne = edges.len();
        let mut interior_edges = Vec::new();
        let mut boundary_edges = Vec::new();
        let mut edge_normals = Vec::with_capacity(ne);
        let mut edge_lengths = Vec::with_capacity(ne);
        let mut edge_slots = Vec::with_capacity(ne);
        for (e, [a, b]) in edges.iter().copied().enumerate() {
            let pa = vertices[a];
            let pb = vertices[b];
            let t = sub(pb, pa);
            let len = norm(t);
            let mut n = [t[1] / len, -t[0] / len];
            edge_lengths.push(len);
            match edge_cells[e].as_slice() {
                &[c] => {
                    let mid = [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])];
                    if dot(n, sub(mid, cell_centroids[c])) < 0.0 {
                        n = [-n[0], -n[1]];
                    }
                    edge_slots.push(EdgeSlot::Boundary(boundary_edges.len()));
                    boundary_edges.push(BoundaryEdge {
                        edge: e,
                        cell: c,
                        tag: tagger(pa, pb),
                    });
                }
                &[c0, c1] => {
                    let (k, l) = (c0.min(c1), c0.max(c1));
                    if dot(n, sub(cell_centroids[l], cell_centroids[k])) < 0.0 {
                        n = [-n[0], -n[1]];
                    }
                    edge_slots.push(EdgeSlot::Interior(interior_edges.len()));
                    interior_edges.push(InteriorEdge { edge: e, k, l });
                }
                other => {
                    return Err(Error::DegenerateMesh(format!(
                        "edge {e} is shared by {} cells",
                        other.len()
                    )))
                }
            }
            edge_normals.push(n);
        }

        Ok(Mesh {
            vertices,
            cells,
            edges,
            interior_edges,
            boundary_edges,
            edge_normals,
            edge_lengths,
            cell_areas,
            cell_diameters,
            cell_centroids,
            cell_edges,
            cell_grad_bary,
            edge_slots,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Number of P2 nodes: vertices first, then edge midpoints.
    pub fn num_p2_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn p2_node(&self, i: usize) -> [f64; 2] {
        let nv = self.vertices.len();
        if i < nv {
            self.vertices[i]
        } else {
            self.edge_midpoint(i - nv)
        }
    }

    /// Global P2 node indices of a cell: three vertices, then the midpoints of
    /// the edges opposite each vertex.
    pub fn cell_p2_nodes(&self, k: usize) -> [usize; 6] {
        let c = self.cells[k];
        let e = self.cell_edges[k];
        let nv = self.vertices.len();
        [c[0], c[1], c[2], nv + e[0], nv + e[1], nv + e[2]]
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let pa = self.vertices[a];
        let pb = self.vertices[b];
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    pub fn total_area(&self) -> f64 {
        self.cell_areas.iter().sum()
    }

    pub fn max_diameter(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn cell_perimeter(&self, k: usize) -> f64 {
        self.cell_edges[k].iter().map(|&e| self.edge_lengths[e]).sum()
    }

    pub fn interior_slot(&self, e: usize) -> Option<usize> {
        match self.edge_slots.get(e)? {
            EdgeSlot::Interior(i) => Some(*i),
            EdgeSlot::Boundary(_) => None,
        }
    }

    pub fn boundary_tag_length(&self, tag: BoundaryTag) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|b| b.tag == tag)
            .map(|b| self.edge_lengths[b.edge])
            .sum()
    }

    /// Sign of edge `e` seen from cell `k`: +1 when the stored normal points
    /// out of `k`, -1 otherwise.
    pub fn outward_sign(&self, k: usize, e: usize) -> f64 {
        match self.edge_slots[e] {
            EdgeSlot::Interior(i) => {
                if self.interior_edges[i].k == k {
                    1.0
                } else {
                    -1.0
                }
            }
            EdgeSlot::Boundary(_) => 1.0,
        }
    }
}

/// Diagonal-split structured mesh of an axis-aligned rectangle, all boundary
/// edges tagged as walls.
pub fn build_structured_mesh(nx: usize, ny: usize, rect: Rect) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!("cell counts must be positive, got {nx}x{ny}")));
    }
    if !(rect.x1 > rect.x0) || !(rect.y1 > rect.y0) {
        return Err(Error::InvalidArgument(format!("degenerate rectangle {rect:?}")));
    }
    let xs: Vec<f64> = (0..=nx)
        .map(|i| rect.x0 + (rect.x1 - rect.x0) * i as f64 / nx as f64)
        .collect();
    let ys: Vec<f64> = (0..=ny)
        .map(|j| rect.y0 + (rect.y1 - rect.y0) * j as f64 / ny as f64)
        .collect();
    let (vertices, cells) = grid_block(&xs, &ys, |i, j| j * (nx + 1) + i);
    Mesh::from_triangles(vertices, cells, |_, _| BoundaryTag::Wall)
}

/// Vertices and diagonal-split cells of a tensor grid. `index(i, j)` maps grid
/// nodes to global vertex ids.
fn grid_block(xs: &[f64], ys: &[f64], index: impl Fn(usize, usize) -> usize) -> (Vec<[f64; 2]>, Vec<[usize; 3]>) {
    let mut vertices = vec![[0.0; 2]; xs.len() * ys.len()];
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            vertices[index(i, j)] = [x, y];
        }
    }
    let cells = quads_to_triangles(xs.len() - 1, ys.len() - 1, &index);
    (vertices, cells)
}

fn quads_to_triangles(nx: usize, ny: usize, index: &impl Fn(usize, usize) -> usize) -> Vec<[usize; 3]> {
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = index(i, j);
            let v10 = index(i + 1, j);
            let v11 = index(i + 1, j + 1);
            let v01 = index(i, j + 1);
            cells.push([v00, v10, v11]);
            cells.push([v00, v11, v01]);
        }
    }
    cells
}

fn subdivide(breaks: &[f64], h: f64) -> Vec<f64> {
    let mut nodes = vec![breaks[0]];
    for w in breaks.windows(2) {
        let len = w[1] - w[0];
        if len <= 1e-12 {
            continue;
        }
        let n = ((len / h) - 1e-9).ceil().max(1.0) as usize;
        for i in 1..=n {
            nodes.push(if i == n { w[1] } else { w[0] + len * i as f64 / n as f64 });
        }
    }
    nodes
}

/// Mesh of the filter box `[0, w] x [0, l]` with the inlet strip
/// `[x_in - w_in/2, x_in + w_in/2] x [l, l + l_in]` on top. `h` is the target
/// edge length of the structured blocks.
pub fn build_ssf_mesh(w: f64, l: f64, x_in: f64, w_in: f64, l_in: f64, h: f64) -> Result<Mesh> {
    if !(w > 0.0 && l > 0.0 && w_in > 0.0 && l_in > 0.0) {
        return Err(Error::InvalidArgument("filter and inlet extents must be positive".into()));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("resolution must be positive, got {h}")));
    }
    let xa = x_in - 0.5 * w_in;
    let xb = x_in + 0.5 * w_in;
    if xa < -TAG_TOL || xb > w + TAG_TOL {
        return Err(Error::InvalidArgument(format!(
            "inlet [{xa}, {xb}] lies outside the filter width [0, {w}]"
        )));
    }
    let xa = xa.max(0.0);
    let xb = xb.min(w);
    let xs = subdivide(&[0.0, xa, xb, w], h);
    let ny = ((l / h) - 1e-9).ceil().max(1.0) as usize;
    let ys: Vec<f64> = (0..=ny).map(|j| l * j as f64 / ny as f64).collect();
    let n_in = ((l_in / h) - 1e-9).ceil().max(1.0) as usize;

    let ia = xs.iter().position(|&x| (x - xa).abs() <= 1e-12).expect("breakpoint present");
    let ib = xs.iter().position(|&x| (x - xb).abs() <= 1e-12).expect("breakpoint present");
    let nxp = xs.len();
    let n_filter = nxp * (ny + 1);
    let inlet_width = ib - ia + 1;
    let index = |i: usize, j: usize| -> usize {
        if j <= ny {
            j * nxp + i
        } else {
            n_filter + (j - ny - 1) * inlet_width + (i - ia)
        }
    };

    let mut vertices = vec![[0.0; 2]; n_filter + n_in * inlet_width];
    for (j, &y) in ys.iter().enumerate() {
        for (i, &x) in xs.iter().enumerate() {
            vertices[index(i, j)] = [x, y];
        }
    }
    for k in 1..=n_in {
        let y = if k == n_in { l + l_in } else { l + l_in * k as f64 / n_in as f64 };
        for i in ia..=ib {
            vertices[index(i, ny + k)] = [xs[i], y];
        }
    }
    let mut cells = quads_to_triangles(nxp - 1, ny, &index);
    for c in quads_to_triangles(ib - ia, n_in, &|i, j| index(i + ia, j + ny)) {
        cells.push(c);
    }
    let top = l + l_in;
    Mesh::from_triangles(vertices, cells, move |a, b| {
        if (a[1] - top).abs() < TAG_TOL && (b[1] - top).abs() < TAG_TOL {
            BoundaryTag::Inlet
        } else if a[1].abs() < TAG_TOL && b[1].abs() < TAG_TOL {
            BoundaryTag::Outlet
        } else {
            BoundaryTag::Wall
        }
    })
}

/// Largest constant `c` with `c h_K^2 <= |K|` and `|dK| <= h_K / c` for all cells.
pub fn check_admissibility(mesh: &Mesh) -> Result<f64> {
    let mut c = f64::INFINITY;
    for k in 0..mesh.num_cells() {
        let area = mesh.cell_areas[k];
        let h = mesh.cell_diameters[k];
        if !(area > 0.0) || !(h > 0.0) {
            return Err(Error::DegenerateMesh(format!("cell {k} has zero area")));
        }
        c = c.min(area / (h * h)).min(h / mesh.cell_perimeter(k));
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_split() {
        let m = build_structured_mesh(1, 1, Rect::unit()).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_edges(), 5);
        assert_eq!(m.interior_edges.len(), 1);
        assert_eq!(m.num_vertices(), 4);
    }

    #[test]
    fn two_by_two_counts_match_enumeration() {
        let m = build_structured_mesh(2, 2, Rect::unit()).unwrap();
        // Independent count: horizontal, vertical and diagonal segments of the grid.
        let (nx, ny) = (2usize, 2usize);
        let horizontal = nx * (ny + 1);
        let vertical = (nx + 1) * ny;
        let diagonal = nx * ny;
        let boundary = 2 * (nx + ny);
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_edges(), horizontal + vertical + diagonal);
        assert_eq!(m.num_edges(), 16);
        assert_eq!(m.interior_edges.len(), 16 - boundary);
        assert_eq!(m.interior_edges.len(), 8);
        let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn area_partition() {
        let m = build_structured_mesh(4, 4, Rect::new(0.0, 0.0, 0.5, 0.5)).unwrap();
        assert!((m.total_area() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rejects_zero_counts() {
        assert!(matches!(
            build_structured_mesh(0, 3, Rect::unit()),
            Err(Error::InvalidArgument(_))
        ));
        assert!(build_structured_mesh(2, 2, Rect::new(0.0, 0.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn cells_are_counter_clockwise_and_opposite_edges_match() {
        let m = build_structured_mesh(3, 2, Rect::unit()).unwrap();
        for (k, c) in m.cells.iter().enumerate() {
            let p = [m.vertices[c[0]], m.vertices[c[1]], m.vertices[c[2]]];
            assert!(signed_area(p) > 0.0);
            for i in 0..3 {
                let e = m.edges[m.cell_edges[k][i]];
                assert!(!e.contains(&c[i]));
            }
        }
    }

    #[test]
    fn normals_point_from_k_to_l_and_outwards() {
        let m = build_structured_mesh(3, 3, Rect::unit()).unwrap();
        for ie in &m.interior_edges {
            assert!(ie.k < ie.l);
            let n = m.edge_normals[ie.edge];
            assert!(dot(n, sub(m.cell_centroids[ie.l], m.cell_centroids[ie.k])) > 0.0);
            assert!((norm(n) - 1.0).abs() < 1e-14);
        }
        for be in &m.boundary_edges {
            let n = m.edge_normals[be.edge];
            let mid = m.edge_midpoint(be.edge);
            // Outward normal on the unit square points towards the nearest side.
            let outward = if mid[0].abs() < 1e-12 {
                [-1.0, 0.0]
            } else if (mid[0] - 1.0).abs() < 1e-12 {
                [1.0, 0.0]
            } else if mid[1].abs() < 1e-12 {
                [0.0, -1.0]
            } else {
                [0.0, 1.0]
            };
            assert!((n[0] - outward[0]).abs() < 1e-14 && (n[1] - outward[1]).abs() < 1e-14);
            assert_eq!(be.tag, BoundaryTag::Wall);
        }
    }

    #[test]
    fn barycentric_gradients_reproduce_linear_functions() {
        let m = build_structured_mesh(2, 3, Rect::new(-1.0, 0.5, 2.0, 1.7)).unwrap();
        for (k, c) in m.cells.iter().enumerate() {
            let g = m.cell_grad_bary[k];
            let mut gx = [0.0; 2];
            let mut sum = [0.0; 2];
            for i in 0..3 {
                let x = m.vertices[c[i]][0];
                gx[0] += x * g[i][0];
                gx[1] += x * g[i][1];
                sum[0] += g[i][0];
                sum[1] += g[i][1];
            }
            assert!((gx[0] - 1.0).abs() < 1e-12 && gx[1].abs() < 1e-12);
            assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_halves_diameter() {
        let a = build_structured_mesh(4, 4, Rect::unit()).unwrap().max_diameter();
        let b = build_structured_mesh(8, 8, Rect::unit()).unwrap().max_diameter();
        assert!((a / 2.0 - b).abs() < 1e-12);
    }

    #[test]
    fn ssf_area_and_inlet_length() {
        let m = build_ssf_mesh(0.5, 0.5, 0.1, 0.1, 0.025, 0.05).unwrap();
        assert!((m.total_area() - 0.2525).abs() < 1e-12);
        assert!((m.boundary_tag_length(BoundaryTag::Inlet) - 0.1).abs() < 1e-12);
        assert!((m.boundary_tag_length(BoundaryTag::Outlet) - 0.5).abs() < 1e-12);
        let perimeter: f64 = m.boundary_edges.iter().map(|b| m.edge_lengths[b.edge]).sum();
        assert!((perimeter - (2.0 * 0.5 + 2.0 * 0.5 + 2.0 * 0.025)).abs() < 1e-12);
        let euler = m.num_vertices() as i64 - m.num_edges() as i64 + m.num_cells() as i64;
        assert_eq!(euler, 1);
    }

    #[test]
    fn ssf_full_width_inlet_has_no_top_wall() {
        let m = build_ssf_mesh(0.5, 0.5, 0.25, 0.5, 0.025, 0.05).unwrap();
        for b in &m.boundary_edges {
            if b.tag == BoundaryTag::Wall {
                let [a, c] = m.edges[b.edge];
                let both_top = m.vertices[a][1] > 0.5 - 1e-9 && m.vertices[c][1] > 0.5 - 1e-9;
                let vertical = (m.vertices[a][0] - m.vertices[c][0]).abs() < 1e-12;
                assert!(!both_top || vertical);
            }
        }
        assert!((m.boundary_tag_length(BoundaryTag::Inlet) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn ssf_rejects_inlet_outside() {
        assert!(matches!(
            build_ssf_mesh(0.5, 0.5, 0.48, 0.1, 0.025, 0.05),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn admissibility_is_refinement_invariant() {
        let c: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&n| check_admissibility(&build_structured_mesh(n, n, Rect::unit()).unwrap()).unwrap())
            .collect();
        assert!((c[0] - c[1]).abs() < 1e-12 && (c[1] - c[2]).abs() < 1e-12);
        assert!(c[0] > 0.0);
    }

    #[test]
    fn admissibility_of_right_triangle() {
        let m = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![[0, 1, 2]],
            |_, _| BoundaryTag::Wall,
        )
        .unwrap();
        let c = check_admissibility(&m).unwrap();
        assert!(c <= 0.25 + 1e-15);
        let perimeter_bound = 2f64.sqrt() / (2.0 + 2f64.sqrt());
        assert!((c - 0.25f64.min(perimeter_bound)).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_is_rejected() {
        let r = Mesh::from_triangles(
            vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]],
            vec![[0, 1, 2]],
            |_, _| BoundaryTag::Wall,
        );
        assert!(matches!(r, Err(Error::DegenerateMesh(_))));
    }
}
