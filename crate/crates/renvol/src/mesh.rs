//! Intrinsic triangle meshes: closed surfaces given by combinatorics and
//! positive edge lengths (no embedding), with a per-vertex conformal factor
//! `phi` acting on lengths through `l'_ij = l_ij exp((phi_i + phi_j)/2)`.
//!
//! Curvature is the angle defect `K_i = (2 pi - sum of incident angles)/A_i`
//! with `A_i` one third of the incident triangle areas; the Laplacian is the
//! cotangent-weight operator divided by vertex area, with the div-grad sign
//! (`sum_i (lap u)_i A_i = 0` on closed surfaces).

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("degenerate triangle in face {face}: lengths {lengths:?}")]
    DegenerateTriangle { face: usize, lengths: [f64; 3] },
    #[error("parse error at line {line}, column {col}: {message}")]
    Parse { line: usize, col: usize, message: String },
    #[error("bad topology: {0}")]
    Topology(String),
    #[error("invalid mesh data: {0}")]
    InvalidData(String),
}

/// Which metric the geometric quantities refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricChoice {
    /// The stored edge lengths (the background metric `h0`).
    Background,
    /// Lengths scaled by the conformal factor: `l exp((phi_i + phi_j)/2)`.
    Conformal,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    n_vertices: usize,
    faces: Vec<[usize; 3]>,
    /// Canonical (min, max) vertex pairs.
    edges: Vec<(usize, usize)>,
    edge_len: Vec<f64>,
    edge_index: HashMap<(usize, usize), usize>,
    genus: usize,
    phi: Vec<f64>,
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Numerically stable Heron formula (Kahan ordering); `None` when the strict
/// triangle inequality fails.
fn triangle_area(l: [f64; 3]) -> Option<f64> {
    let mut s = l;
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let (a, b, c) = (s[0], s[1], s[2]);
    let t = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    if t <= 0.0 {
        return None;
    }
    Some(0.25 * t.sqrt())
}

/// Interior angle opposite `l0` in a triangle with sides `(l0, l1, l2)`.
fn triangle_angle(l0: f64, l1: f64, l2: f64) -> f64 {
    (((l1 * l1 + l2 * l2 - l0 * l0) / (2.0 * l1 * l2)).clamp(-1.0, 1.0)).acos()
}

impl TriMesh {
    /// Build and validate a closed mesh. `edges` lists `(i, j, length)`;
    /// every face edge must be present.
    pub fn new(
        n_vertices: usize,
        faces: Vec<[usize; 3]>,
        edges: Vec<(usize, usize, f64)>,
        genus: usize,
    ) -> Result<Self, MeshError> {
        let mut edge_index = HashMap::new();
        let mut edge_pairs = Vec::with_capacity(edges.len());
        let mut edge_len = Vec::with_capacity(edges.len());
        for (i, j, len) in edges {
            if i >= n_vertices || j >= n_vertices {
                return Err(MeshError::InvalidData(format!("edge ({i},{j}) out of vertex range")));
            }
            if i == j {
                return Err(MeshError::InvalidData(format!("self-loop edge at vertex {i}")));
            }
            if !(len.is_finite() && len > 0.0) {
                return Err(MeshError::InvalidData(format!("edge ({i},{j}) has length {len}")));
            }
            let key = edge_key(i, j);
            if edge_index.insert(key, edge_pairs.len()).is_some() {
                return Err(MeshError::InvalidData(format!("duplicate edge ({i},{j})")));
            }
            edge_pairs.push(key);
            edge_len.push(len);
        }
        let mesh = Self {
            n_vertices,
            faces,
            edges: edge_pairs,
            edge_len,
            edge_index,
            genus,
            phi: vec![0.0; n_vertices],
        };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<(), MeshError> {
        let (v, e, f) = (self.n_vertices as i64, self.edges.len() as i64, self.faces.len() as i64);
        let chi = v - e + f;
        let expected = 2 - 2 * self.genus as i64;
        if chi != expected {
            return Err(MeshError::Topology(format!(
                "Euler characteristic {chi} does not match genus {} (expected {expected})",
                self.genus
            )));
        }
        let mut edge_face_count = vec![0usize; self.edges.len()];
        for (fi, face) in self.faces.iter().enumerate() {
            let [a, b, c] = *face;
            if a >= self.n_vertices || b >= self.n_vertices || c >= self.n_vertices {
                return Err(MeshError::InvalidData(format!("face {fi} has out-of-range vertex")));
            }
            if a == b || b == c || a == c {
                return Err(MeshError::InvalidData(format!("face {fi} repeats a vertex")));
            }
            for (p, q) in [(a, b), (b, c), (c, a)] {
                match self.edge_index.get(&edge_key(p, q)) {
                    Some(&ei) => edge_face_count[ei] += 1,
                    None => {
                        return Err(MeshError::InvalidData(format!(
                            "face {fi} uses missing edge ({p},{q})"
                        )))
                    }
                }
            }
        }
        for (ei, &count) in edge_face_count.iter().enumerate() {
            if count != 2 {
                let (i, j) = self.edges[ei];
                return Err(MeshError::Topology(format!(
                    "edge ({i},{j}) belongs to {count} faces (closed surface needs 2)"
                )));
            }
        }
        // Strict triangle inequalities for both metrics.
        for choice in [MetricChoice::Background, MetricChoice::Conformal] {
            for fi in 0..self.faces.len() {
                let l = self.face_lengths(fi, choice);
                if triangle_area(l).is_none() {
                    return Err(MeshError::DegenerateTriangle { face: fi, lengths: l });
                }
            }
        }
        Ok(())
    }

    pub fn vertex_count(&self) -> usize {
        self.n_vertices
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn genus(&self) -> usize {
        self.genus
    }

    pub fn euler_characteristic(&self) -> i64 {
        2 - 2 * self.genus as i64
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Replace the conformal factor; the scaled lengths must still satisfy
    /// the strict triangle inequalities.
    pub fn set_phi(&mut self, phi: Vec<f64>) -> Result<(), MeshError> {
        if phi.len() != self.n_vertices {
            return Err(MeshError::InvalidData(format!(
                "phi has {} entries for {} vertices",
                phi.len(),
                self.n_vertices
            )));
        }
        let old = std::mem::replace(&mut self.phi, phi);
        for fi in 0..self.faces.len() {
            let l = self.face_lengths(fi, MetricChoice::Conformal);
            if triangle_area(l).is_none() {
                let err = MeshError::DegenerateTriangle { face: fi, lengths: l };
                self.phi = old;
                return Err(err);
            }
        }
        Ok(())
    }

    /// Uniformly scale all background lengths.
    pub fn scale_lengths(&mut self, factor: f64) {
        for l in &mut self.edge_len {
            *l *= factor;
        }
    }

    pub fn edge_length(&self, ei: usize, choice: MetricChoice) -> f64 {
        let l = self.edge_len[ei];
        match choice {
            MetricChoice::Background => l,
            MetricChoice::Conformal => {
                let (i, j) = self.edges[ei];
                l * (0.5 * (self.phi[i] + self.phi[j])).exp()
            }
        }
    }

    fn face_lengths(&self, fi: usize, choice: MetricChoice) -> [f64; 3] {
        let [a, b, c] = self.faces[fi];
        // l[0] opposite vertex a, etc.
        let len = |p: usize, q: usize| self.edge_length(self.edge_index[&edge_key(p, q)], choice);
        [len(b, c), len(a, c), len(a, b)]
    }

    pub fn face_area(&self, fi: usize, choice: MetricChoice) -> Result<f64, MeshError> {
        let l = self.face_lengths(fi, choice);
        triangle_area(l).ok_or(MeshError::DegenerateTriangle { face: fi, lengths: l })
    }

    /// Barycentric-lumped vertex areas: one third of incident triangle areas.
    pub fn vertex_areas(&self, choice: MetricChoice) -> Result<Vec<f64>, MeshError> {
        let mut areas = vec![0.0; self.n_vertices];
        for fi in 0..self.faces.len() {
            let a = self.face_area(fi, choice)? / 3.0;
            for &v in &self.faces[fi] {
                areas[v] += a;
            }
        }
        Ok(areas)
    }

    pub fn total_area(&self, choice: MetricChoice) -> Result<f64, MeshError> {
        let mut total = 0.0;
        for fi in 0..self.faces.len() {
            total += self.face_area(fi, choice)?;
        }
        Ok(total)
    }

    /// Angle-defect Gaussian curvature per vertex.
    pub fn gaussian_curvature(&self, choice: MetricChoice) -> Result<Vec<f64>, MeshError> {
        let mut defect = vec![std::f64::consts::TAU; self.n_vertices];
        for fi in 0..self.faces.len() {
            let [a, b, c] = self.faces[fi];
            let l = self.face_lengths(fi, choice);
            if triangle_area(l).is_none() {
                return Err(MeshError::DegenerateTriangle { face: fi, lengths: l });
            }
            defect[a] -= triangle_angle(l[0], l[1], l[2]);
            defect[b] -= triangle_angle(l[1], l[2], l[0]);
            defect[c] -= triangle_angle(l[2], l[0], l[1]);
        }
        let areas = self.vertex_areas(choice)?;
        Ok(defect.iter().zip(&areas).map(|(d, a)| d / a).collect())
    }

    /// Cotangent weight per edge: `w_ij = (cot alpha + cot beta)/2` over the
    /// two angles opposite the edge.
    pub fn cot_edge_weights(&self, choice: MetricChoice) -> Result<Vec<f64>, MeshError> {
        let mut w = vec![0.0; self.edges.len()];
        for fi in 0..self.faces.len() {
            let [a, b, c] = self.faces[fi];
            let l = self.face_lengths(fi, choice);
            if triangle_area(l).is_none() {
                return Err(MeshError::DegenerateTriangle { face: fi, lengths: l });
            }
            let angles = [
                triangle_angle(l[0], l[1], l[2]),
                triangle_angle(l[1], l[2], l[0]),
                triangle_angle(l[2], l[0], l[1]),
            ];
            for (angle, (p, q)) in [(angles[0], (b, c)), (angles[1], (a, c)), (angles[2], (a, b))] {
                let ei = self.edge_index[&edge_key(p, q)];
                w[ei] += 0.5 / angle.tan();
            }
        }
        Ok(w)
    }

    /// Cotangent Laplacian divided by vertex area (div-grad sign):
    /// `(lap u)_i = (1/A_i) sum_j w_ij (u_j - u_i)`.
    pub fn laplacian(&self, choice: MetricChoice, u: &[f64]) -> Result<Vec<f64>, MeshError> {
        if u.len() != self.n_vertices {
            return Err(MeshError::InvalidData("laplacian input length mismatch".into()));
        }
        let w = self.cot_edge_weights(choice)?;
        let areas = self.vertex_areas(choice)?;
        let mut out = vec![0.0; self.n_vertices];
        for (ei, &(i, j)) in self.edges.iter().enumerate() {
            let flux = w[ei] * (u[j] - u[i]);
            out[i] += flux;
            out[j] -= flux;
        }
        for i in 0..self.n_vertices {
            out[i] /= areas[i];
        }
        Ok(out)
    }

    /// Vertex-lumped integral `sum_i u_i A_i`.
    pub fn integrate(&self, choice: MetricChoice, u: &[f64]) -> Result<f64, MeshError> {
        if u.len() != self.n_vertices {
            return Err(MeshError::InvalidData("integrate input length mismatch".into()));
        }
        let areas = self.vertex_areas(choice)?;
        Ok(u.iter().zip(&areas).map(|(u, a)| u * a).sum())
    }

    /// Cotangent Dirichlet energy `sum_e w_e (u_i - u_j)^2 = -<u, L u>`.
    pub fn dirichlet_energy(&self, choice: MetricChoice, u: &[f64]) -> Result<f64, MeshError> {
        let w = self.cot_edge_weights(choice)?;
        let mut total = 0.0;
        for (ei, &(i, j)) in self.edges.iter().enumerate() {
            let d = u[i] - u[j];
            total += w[ei] * d * d;
        }
        Ok(total)
    }

    // ------------------------------------------------------------------
    // Plain-text format: header "V E F genus", then `v <id>` lines,
    // `f <a> <b> <c>` lines and `e <i> <j> <length>` lines.
    // ------------------------------------------------------------------

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{} {} {} {}\n",
            self.n_vertices,
            self.edges.len(),
            self.faces.len(),
            self.genus
        ));
        for i in 0..self.n_vertices {
            out.push_str(&format!("v {i}\n"));
        }
        for f in &self.faces {
            out.push_str(&format!("f {} {} {}\n", f[0], f[1], f[2]));
        }
        for (ei, &(i, j)) in self.edges.iter().enumerate() {
            out.push_str(&format!("e {i} {j} {:.17e}\n", self.edge_len[ei]));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, MeshError> {
        // Token positions for line/column diagnostics.
        fn tokens(line: &str) -> Vec<(usize, &str)> {
            let mut out = Vec::new();
            let mut col = 1;
            for part in line.split(' ') {
                if !part.trim().is_empty() {
                    out.push((col, part.trim()));
                }
                col += part.chars().count() + 1;
            }
            out
        }
        fn parse_num<T: std::str::FromStr>(
            line_no: usize,
            tok: (usize, &str),
            what: &str,
        ) -> Result<T, MeshError> {
            tok.1.parse::<T>().map_err(|_| MeshError::Parse {
                line: line_no,
                col: tok.0,
                message: format!("expected {what}, got '{}'", tok.1),
            })
        }

        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (header_no, header) =
            lines.next().ok_or(MeshError::Parse { line: 1, col: 1, message: "empty file".into() })?;
        let toks = tokens(header);
        if toks.len() != 4 {
            return Err(MeshError::Parse {
                line: header_no,
                col: 1,
                message: format!("header must be 'V E F genus', got {} fields", toks.len()),
            });
        }
        let nv: usize = parse_num(header_no, toks[0], "vertex count")?;
        let ne: usize = parse_num(header_no, toks[1], "edge count")?;
        let nf: usize = parse_num(header_no, toks[2], "face count")?;
        let genus: usize = parse_num(header_no, toks[3], "genus")?;

        let mut seen_vertices = vec![false; nv];
        let mut faces = Vec::with_capacity(nf);
        let mut edges = Vec::with_capacity(ne);
        let mut last_line = header_no;
        for (line_no, line) in lines {
            last_line = line_no;
            let toks = tokens(line);
            if toks.is_empty() || toks[0].1.starts_with('#') {
                continue;
            }
            match toks[0].1 {
                "v" => {
                    if toks.len() != 2 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            col: toks[0].0,
                            message: "vertex line must be 'v <id>'".into(),
                        });
                    }
                    let id: usize = parse_num(line_no, toks[1], "vertex id")?;
                    if id >= nv {
                        return Err(MeshError::Parse {
                            line: line_no,
                            col: toks[1].0,
                            message: format!("vertex id {id} out of range 0..{nv}"),
                        });
                    }
                    seen_vertices[id] = true;
                }
                "f" => {
                    if toks.len() != 4 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            col: toks[0].0,
                            message: "face line must be 'f <a> <b> <c>'".into(),
                        });
                    }
                    faces.push([
                        parse_num(line_no, toks[1], "vertex id")?,
                        parse_num(line_no, toks[2], "vertex id")?,
                        parse_num(line_no, toks[3], "vertex id")?,
                    ]);
                }
                "e" => {
                    if toks.len() != 4 {
                        return Err(MeshError::Parse {
                            line: line_no,
                            col: toks[0].0,
                            message: "edge line must be 'e <i> <j> <length>'".into(),
                        });
                    }
                    let i: usize = parse_num(line_no, toks[1], "vertex id")?;
                    let j: usize = parse_num(line_no, toks[2], "vertex id")?;
                    let len: f64 = parse_num(line_no, toks[3], "edge length")?;
                    if len <= 0.0 || !len.is_finite() {
                        return Err(MeshError::Parse {
                            line: line_no,
                            col: toks[3].0,
                            message: format!("edge length must be positive, got {len}"),
                        });
                    }
                    edges.push((i, j, len));
                }
                other => {
                    return Err(MeshError::Parse {
                        line: line_no,
                        col: toks[0].0,
                        message: format!("unknown record '{other}' (expected v, f or e)"),
                    });
                }
            }
        }
        if seen_vertices.iter().any(|&s| !s) || faces.len() != nf || edges.len() != ne {
            return Err(MeshError::Parse {
                line: last_line,
                col: 1,
                message: format!(
                    "truncated mesh: header declares {nv} vertices, {ne} edges, {nf} faces; \
                     found {} vertices, {} edges, {} faces",
                    seen_vertices.iter().filter(|&&s| s).count(),
                    edges.len(),
                    faces.len()
                ),
            });
        }
        Self::new(nv, faces, edges, genus)
    }
}

// ----------------------------------------------------------------------
// Fixtures
// ----------------------------------------------------------------------

/// Regular icosahedron with unit edge lengths (genus 0).
pub fn icosahedron() -> TriMesh {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut coords: Vec<[f64; 3]> = Vec::new();
    for &a in &[-1.0, 1.0] {
        for &b in &[-p, p] {
            coords.push([0.0, a, b]);
            coords.push([a, b, 0.0]);
            coords.push([b, 0.0, a]);
        }
    }
    let dist2 = |u: &[f64; 3], v: &[f64; 3]| -> f64 {
        (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2) + (u[2] - v[2]).powi(2)
    };
    // Edges connect vertices at the minimal distance (2 in these coordinates).
    let mut faces = Vec::new();
    for i in 0..12 {
        for j in (i + 1)..12 {
            for k in (j + 1)..12 {
                if dist2(&coords[i], &coords[j]) < 4.5
                    && dist2(&coords[j], &coords[k]) < 4.5
                    && dist2(&coords[i], &coords[k]) < 4.5
                {
                    faces.push([i, j, k]);
                }
            }
        }
    }
    let mut edge_set = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for f in &faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
            if edge_set.insert(edge_key(a, b)) {
                let (a, b) = edge_key(a, b);
                edges.push((a, b, 1.0));
            }
        }
    }
    TriMesh::new(12, faces, edges, 0).expect("icosahedron is valid")
}

/// Geodesic sphere: the icosahedron subdivided `levels` times, vertices
/// projected to the unit sphere, edge lengths the great-circle distances.
/// Its piecewise-Euclidean area converges to `4 pi` at second order.
pub fn geodesic_sphere(levels: usize) -> TriMesh {
    let p = (1.0 + 5.0f64.sqrt()) / 2.0;
    let norm = (1.0 + p * p).sqrt();
    let mut coords: Vec<[f64; 3]> = Vec::new();
    for &a in &[-1.0f64, 1.0] {
        for &b in &[-p, p] {
            coords.push([0.0, a / norm, b / norm]);
            coords.push([a / norm, b / norm, 0.0]);
            coords.push([b / norm, 0.0, a / norm]);
        }
    }
    let base = icosahedron();
    let mut faces: Vec<[usize; 3]> = base.faces().to_vec();
    for _ in 0..levels {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next_faces = Vec::with_capacity(4 * faces.len());
        for f in &faces {
            let mut mid = [0usize; 3];
            for (slot, (a, b)) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])].into_iter().enumerate()
            {
                let key = edge_key(a, b);
                mid[slot] = *midpoint.entry(key).or_insert_with(|| {
                    let m = [
                        coords[a][0] + coords[b][0],
                        coords[a][1] + coords[b][1],
                        coords[a][2] + coords[b][2],
                    ];
                    let n = (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt();
                    coords.push([m[0] / n, m[1] / n, m[2] / n]);
                    coords.len() - 1
                });
            }
            next_faces.push([f[0], mid[0], mid[2]]);
            next_faces.push([mid[0], f[1], mid[1]]);
            next_faces.push([mid[2], mid[1], f[2]]);
            next_faces.push([mid[0], mid[1], mid[2]]);
        }
        faces = next_faces;
    }
    let geodesic = |a: usize, b: usize| -> f64 {
        let dot = coords[a][0] * coords[b][0] + coords[a][1] * coords[b][1]
            + coords[a][2] * coords[b][2];
        dot.clamp(-1.0, 1.0).acos()
    };
    let mut edge_set = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for f in &faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[0], f[2])] {
            let key = edge_key(a, b);
            if edge_set.insert(key) {
                edges.push((key.0, key.1, geodesic(key.0, key.1)));
            }
        }
    }
    TriMesh::new(coords.len(), faces, edges, 0).expect("geodesic sphere is valid")
}

/// Flat torus from an `n x n` identified square grid of unit spacing,
/// squares split along the (+1, +1) diagonal. Requires `n >= 3`.
pub fn flat_torus(n: usize) -> TriMesh {
    assert!(n >= 3, "flat torus needs n >= 3 to avoid duplicate edges");
    let id = |i: usize, j: usize| (i % n) * n + (j % n);
    let mut faces = Vec::new();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            edges.push((id(i, j), id(i + 1, j), 1.0));
            edges.push((id(i, j), id(i, j + 1), 1.0));
            edges.push((id(i, j), id(i + 1, j + 1), std::f64::consts::SQRT_2));
        }
    }
    let edges = edges
        .into_iter()
        .map(|(a, b, l)| {
            let (a, b) = edge_key(a, b);
            (a, b, l)
        })
        .collect();
    TriMesh::new(n * n, faces, edges, 1).expect("flat torus is valid")
}

/// Hyperboloid-model point.
#[derive(Clone, Copy)]
struct HPoint {
    x0: f64,
    x1: f64,
    x2: f64,
}

impl HPoint {
    fn from_disk(re: f64, im: f64) -> Self {
        let r2 = re * re + im * im;
        let d = 1.0 - r2;
        Self { x0: (1.0 + r2) / d, x1: 2.0 * re / d, x2: 2.0 * im / d }
    }

    fn lorentz(&self, o: &HPoint) -> f64 {
        self.x0 * o.x0 - self.x1 * o.x1 - self.x2 * o.x2
    }

    fn dist(&self, o: &HPoint) -> f64 {
        self.lorentz(o).max(1.0).acosh()
    }

    /// Point at hyperbolic fraction `t` along the geodesic to `o`.
    fn geodesic_point(&self, o: &HPoint, t: f64) -> HPoint {
        let d = self.dist(o);
        if d < 1e-15 {
            return *self;
        }
        let (wa, wb) = (((1.0 - t) * d).sinh() / d.sinh(), (t * d).sinh() / d.sinh());
        let mut p = HPoint {
            x0: wa * self.x0 + wb * o.x0,
            x1: wa * self.x1 + wb * o.x1,
            x2: wa * self.x2 + wb * o.x2,
        };
        // Renormalize onto the hyperboloid.
        let norm = (p.x0 * p.x0 - p.x1 * p.x1 - p.x2 * p.x2).sqrt();
        p.x0 /= norm;
        p.x1 /= norm;
        p.x2 /= norm;
        p
    }
}

/// Genus-2 fixture and the data needed to build smooth test functions on it.
#[derive(Debug, Clone)]
pub struct Genus2Fixture {
    pub mesh: TriMesh,
    /// Hyperbolic distance of each vertex from the octagon center. Functions
    /// of the squared distance, supported inside the octagon's inradius
    /// (about 1.5266), descend smoothly to the closed surface.
    pub center_distance: Vec<f64>,
    /// Circumradius of the octagon (distance from center to the glued vertex).
    pub circumradius: f64,
}

/// Closed genus-2 surface: a regular hyperbolic octagon with vertex angles
/// pi/4, sides glued in the pattern `a b a^-1 b^-1 c d c^-1 d^-1`, fan
/// triangulated from the center at resolution `n` (each of the 8 central
/// triangles carries an `n`-fold lattice). Edge lengths are hyperbolic
/// distances. Needs `n >= 3`: at `n = 2` the two halves of a glued side
/// collapse onto one vertex pair and the edge map degenerates.
pub fn genus2_octagon(n: usize) -> Genus2Fixture {
    assert!(n >= 3, "octagon fixture needs n >= 3");
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, PI};

    // Regular octagon with interior angle pi/4: split a central triangle
    // with apex angle pi/4 and base angles pi/8. The circumradius R obeys
    // cosh R = cos(pi/8) (1 + cos(pi/4)) / (sin(pi/8) sin(pi/4)).
    let cosh_r = (FRAC_PI_8.cos() * (1.0 + FRAC_PI_4.cos())) / (FRAC_PI_8.sin() * FRAC_PI_4.sin());
    let r_oct = cosh_r.acosh();
    let disk_radius = (r_oct / 2.0).tanh();

    let center = HPoint::from_disk(0.0, 0.0);
    let corners: Vec<HPoint> = (0..8)
        .map(|k| {
            let ang = PI / 4.0 * k as f64;
            HPoint::from_disk(disk_radius * ang.cos(), disk_radius * ang.sin())
        })
        .collect();

    // Vertex identification keys.
    #[derive(Clone, Copy, PartialEq, Eq, Hash)]
    enum Key {
        Center,
        Corner,
        Spoke(usize, usize),
        Rim(usize, usize),
        Interior(usize, usize, usize),
    }
    // Side gluings: a b a^-1 b^-1 c d c^-1 d^-1.
    let partner = |k: usize| -> usize {
        match k {
            0 => 2,
            2 => 0,
            1 => 3,
            3 => 1,
            4 => 6,
            6 => 4,
            5 => 7,
            _ => 5,
        }
    };
    let rim_key = |k: usize, m: usize| -> Key {
        let p = partner(k);
        if p < k {
            Key::Rim(p, n - m)
        } else {
            Key::Rim(k, m)
        }
    };

    let mut ids: HashMap<Key, usize> = HashMap::new();
    let mut points: Vec<HPoint> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Edge lengths come from the coordinates local to the sector whose face
    // creates the edge (glued copies see different local coordinates but the
    // gluing is an isometry, so the lengths agree). Kept in first-insertion
    // order: hash-map iteration order would leak into summation order and
    // break byte-determinism of downstream reports.
    let mut edge_lengths: HashMap<(usize, usize), f64> = HashMap::new();
    let mut edge_order: Vec<(usize, usize)> = Vec::new();
    for k in 0..8 {
        let pa = corners[k];
        let pb = corners[(k + 1) % 8];
        // Lattice point (i toward pa, j toward pb), i + j <= n.
        let mut grid: HashMap<(usize, usize), (usize, HPoint)> = HashMap::new();
        for total in 0..=n {
            for j in 0..=total {
                let i = total - j;
                let key = if total == 0 {
                    Key::Center
                } else if j == 0 {
                    if i == n {
                        Key::Corner
                    } else {
                        Key::Spoke(k, i)
                    }
                } else if i == 0 {
                    if j == n {
                        Key::Corner
                    } else {
                        Key::Spoke((k + 1) % 8, j)
                    }
                } else if total == n {
                    rim_key(k, j)
                } else {
                    Key::Interior(k, i, j)
                };
                let pt = if total == 0 {
                    center
                } else {
                    let side = pa.geodesic_point(&pb, j as f64 / total as f64);
                    center.geodesic_point(&side, total as f64 / n as f64)
                };
                let id = match ids.get(&key) {
                    Some(&id) => id,
                    None => {
                        let id = points.len();
                        ids.insert(key, id);
                        points.push(pt);
                        id
                    }
                };
                grid.insert((i, j), (id, pt));
            }
        }
        let mut add_face = |corners: [(usize, HPoint); 3]| {
            faces.push([corners[0].0, corners[1].0, corners[2].0]);
            for (a, b) in [(0, 1), (1, 2), (0, 2)] {
                let key = edge_key(corners[a].0, corners[b].0);
                let len = corners[a].1.dist(&corners[b].1);
                let prev = edge_lengths.insert(key, len);
                if prev.is_none() {
                    edge_order.push(key);
                }
                debug_assert!(
                    prev.is_none_or(|p| (p - len).abs() < 1e-9),
                    "glued edge lengths disagree: {prev:?} vs {len}"
                );
            }
        };
        for i in 0..n {
            for j in 0..n - i {
                add_face([grid[&(i, j)], grid[&(i + 1, j)], grid[&(i, j + 1)]]);
                if i + j < n - 1 {
                    add_face([grid[&(i + 1, j)], grid[&(i + 1, j + 1)], grid[&(i, j + 1)]]);
                }
            }
        }
    }

    let edges: Vec<(usize, usize, f64)> =
        edge_order.into_iter().map(|(a, b)| (a, b, edge_lengths[&(a, b)])).collect();
    let center_distance: Vec<f64> = points.iter().map(|p| center.dist(p)).collect();
    let mesh = TriMesh::new(points.len(), faces, edges, 2).expect("octagon fixture is valid");
    Genus2Fixture { mesh, center_distance, circumradius: r_oct }
}

/// Smooth radial bump `amp (1 - (d/width)^2)^4` supported inside `width`;
/// a function of the squared center distance, so it descends C^3-smoothly to
/// the closed surface when `width` stays inside the octagon's inradius.
pub fn radial_bump(fixture: &Genus2Fixture, amp: f64, width: f64) -> Vec<f64> {
    fixture
        .center_distance
        .iter()
        .map(|&d| {
            let t = (d / width).min(1.0);
            amp * (1.0 - t * t).powi(4)
        })
        .collect()
}
