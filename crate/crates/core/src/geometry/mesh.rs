//! Watertight triangle meshes with an AABB tree for closest point queries.

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};

type V3 = [f64; 3];

#[inline]
fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
#[inline]
fn axpy(a: V3, s: f64, d: V3) -> V3 {
    [a[0] + s * d[0], a[1] + s * d[1], a[2] + s * d[2]]
}
#[inline]
fn dist2(a: V3, b: V3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}

/// Exact closest point on triangle `abc` to `p`, by Voronoi region classification
/// (vertex, edge or face interior).
pub fn closest_point_on_triangle(p: V3, a: V3, b: V3, c: V3) -> V3 {
    let ab = sub(b, a);
    let ac = sub(c, a);
    let ap = sub(p, a);
    let d1 = dot(ab, ap);
    let d2 = dot(ac, ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = sub(p, b);
    let d3 = dot(ab, bp);
    let d4 = dot(ac, bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return axpy(a, d1 / (d1 - d3), ab);
    }
    let cp = sub(p, c);
    let d5 = dot(ab, cp);
    let d6 = dot(ac, cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return axpy(a, d2 / (d2 - d6), ac);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return axpy(b, w, sub(c, b));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    axpy(axpy(a, v, ab), w, ac)
}

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: V3,
    max: V3,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: [f64::INFINITY; 3],
            max: [f64::NEG_INFINITY; 3],
        }
    }
    fn grow(&mut self, p: V3) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }
    fn merge(&mut self, o: &Aabb) {
        self.grow(o.min);
        self.grow(o.max);
    }
    fn dist2(&self, p: V3) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let e = (self.min[k] - p[k]).max(0.0).max(p[k] - self.max[k]);
            d += e * e;
        }
        d
    }
}

#[derive(Clone, Debug)]
enum BvhNode {
    Leaf {
        bounds: Aabb,
        start: usize,
        end: usize,
    },
    Inner {
        bounds: Aabb,
        left: usize,
        right: usize,
    },
}

impl BvhNode {
    fn bounds(&self) -> &Aabb {
        match self {
            BvhNode::Leaf { bounds, .. } | BvhNode::Inner { bounds, .. } => bounds,
        }
    }
}

const LEAF_SIZE: usize = 4;

/// Result of a mesh closest point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshHit {
    pub point: V3,
    pub dist2: f64,
    pub face: usize,
}

/// Watertight triangle mesh. Immutable after construction.
#[derive(Clone, Debug)]
pub struct TriMesh {
    vertices: Vec<V3>,
    faces: Vec<[usize; 3]>,
    nodes: Vec<BvhNode>,
    order: Vec<usize>,
}

impl TriMesh {
    /// Validates the mesh (non-empty, no zero-area triangles, every edge shared by
    /// exactly two faces) and builds the AABB tree.
    pub fn new(vertices: Vec<V3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if faces.is_empty() {
            return Err(Error::EmptyMesh);
        }
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidParameter(format!(
                    "face {fi} references a missing vertex"
                )));
            }
            let [a, b, c] = f.map(|v| vertices[v]);
            let n = cross(sub(b, a), sub(c, a));
            let longest = dist2(a, b).max(dist2(b, c)).max(dist2(c, a));
            if dot(n, n).sqrt() <= 1e-12 * longest || longest == 0.0 {
                return Err(Error::DegenerateTriangle { face: fi });
            }
        }
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for f in &faces {
            for k in 0..3 {
                let (u, v) = (f[k], f[(k + 1) % 3]);
                *edges.entry((u.min(v), u.max(v))).or_insert(0) += 1;
            }
        }
        let mut bad: Vec<_> = edges.iter().filter(|(_, &c)| c != 2).collect();
        bad.sort();
        if let Some((&(u, v), &c)) = bad.first() {
            return Err(Error::NotWatertight(u, v, c));
        }

        let mut mesh = Self {
            vertices,
            faces,
            nodes: Vec::new(),
            order: Vec::new(),
        };
        mesh.build_tree();
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[V3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    fn face_bounds(&self, f: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &v in &self.faces[f] {
            b.grow(self.vertices[v]);
        }
        b
    }

    fn centroid(&self, f: usize) -> V3 {
        let [a, b, c] = self.faces[f].map(|v| self.vertices[v]);
        [
            (a[0] + b[0] + c[0]) / 3.0,
            (a[1] + b[1] + c[1]) / 3.0,
            (a[2] + b[2] + c[2]) / 3.0,
        ]
    }

    pub fn bounding_box(&self) -> (V3, V3) {
        let b = self.nodes[0].bounds();
        (b.min, b.max)
    }

    fn build_tree(&mut self) {
        let mut order: Vec<usize> = (0..self.faces.len()).collect();
        let centroids: Vec<V3> = (0..self.faces.len()).map(|f| self.centroid(f)).collect();
        let boxes: Vec<Aabb> = (0..self.faces.len()).map(|f| self.face_bounds(f)).collect();
        let mut nodes = Vec::new();
        build_node(&mut nodes, &mut order, 0, &centroids, &boxes);
        self.nodes = nodes;
        self.order = order;
    }

    fn face_closest(&self, p: V3, f: usize) -> (V3, f64) {
        let [a, b, c] = self.faces[f].map(|v| self.vertices[v]);
        let q = closest_point_on_triangle(p, a, b, c);
        (q, dist2(p, q))
    }

    /// Closest point via the AABB tree. Ties in distance resolve to the lowest face
    /// index, so the result is identical to [`TriMesh::closest_point_brute_force`].
    pub fn closest_point(&self, p: V3) -> MeshHit {
        let mut best = MeshHit {
            point: [f64::NAN; 3],
            dist2: f64::INFINITY,
            face: usize::MAX,
        };
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds().dist2(p) > best.dist2 {
                continue;
            }
            match *node {
                BvhNode::Leaf { start, end, .. } => {
                    for &f in &self.order[start..end] {
                        let (q, d2) = self.face_closest(p, f);
                        if d2 < best.dist2 || (d2 == best.dist2 && f < best.face) {
                            best = MeshHit {
                                point: q,
                                dist2: d2,
                                face: f,
                            };
                        }
                    }
                }
                BvhNode::Inner { left, right, .. } => {
                    let dl = self.nodes[left].bounds().dist2(p);
                    let dr = self.nodes[right].bounds().dist2(p);
                    // visit the nearer child first
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    /// Exhaustive scan over all triangles.
    pub fn closest_point_brute_force(&self, p: V3) -> MeshHit {
        let mut best = MeshHit {
            point: [f64::NAN; 3],
            dist2: f64::INFINITY,
            face: usize::MAX,
        };
        for f in 0..self.faces.len() {
            let (q, d2) = self.face_closest(p, f);
            if d2 < best.dist2 {
                best = MeshHit {
                    point: q,
                    dist2: d2,
                    face: f,
                };
            }
        }
        best
    }

    // ---- file formats ----

    /// Loads an ASCII OFF or OBJ file, chosen by extension.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("off") => Self::from_off(&text),
            Some("obj") => Self::from_obj(&text),
            _ => Err(Error::Unsupported(format!(
                "mesh format of {}",
                path.display()
            ))),
        }
    }

    pub fn from_off(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, msg: &str| Error::MeshParse {
            line,
            msg: msg.to_string(),
        };
        let (ln, header) = lines.next().ok_or_else(|| perr(0, "empty file"))?;
        let counts_line = if header == "OFF" {
            lines.next().ok_or_else(|| perr(ln, "missing counts"))?
        } else if let Some(rest) = header.strip_prefix("OFF") {
            (ln, rest.trim())
        } else {
            return Err(perr(ln, "missing OFF header"));
        };
        let counts: Vec<usize> = counts_line
            .1
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| perr(counts_line.0, "bad count")))
            .collect::<Result<_>>()?;
        if counts.len() < 2 {
            return Err(perr(counts_line.0, "expected vertex and face counts"));
        }
        let (nv, nf) = (counts[0], counts[1]);
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated vertices"))?;
            let v: Vec<f64> = l
                .split_whitespace()
                .take(3)
                .map(|t| t.parse().map_err(|_| perr(ln, "bad coordinate")))
                .collect::<Result<_>>()?;
            if v.len() != 3 {
                return Err(perr(ln, "vertex needs 3 coordinates"));
            }
            vertices.push([v[0], v[1], v[2]]);
        }
        let mut faces = Vec::with_capacity(nf);
        for _ in 0..nf {
            let (ln, l) = lines.next().ok_or_else(|| perr(0, "truncated faces"))?;
            let t: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse().map_err(|_| perr(ln, "bad index")))
                .collect::<Result<_>>()?;
            if t.first() != Some(&3) || t.len() < 4 {
                return Err(perr(ln, "only triangular faces are supported"));
            }
            faces.push([t[1], t[2], t[3]]);
        }
        Self::new(vertices, faces)
    }

    pub fn from_obj(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let ln = i + 1;
            let l = raw.split('#').next().unwrap_or("").trim();
            let mut toks = l.split_whitespace();
            match toks.next() {
                Some("v") => {
                    let v: Vec<f64> = toks
                        .take(3)
                        .map(|t| {
                            t.parse().map_err(|_| Error::MeshParse {
                                line: ln,
                                msg: "bad coordinate".into(),
                            })
                        })
                        .collect::<Result<_>>()?;
                    if v.len() != 3 {
                        return Err(Error::MeshParse {
                            line: ln,
                            msg: "vertex needs 3 coordinates".into(),
                        });
                    }
                    vertices.push([v[0], v[1], v[2]]);
                }
                Some("f") => {
                    let idx: Vec<usize> = toks
                        .map(|t| {
                            let first = t.split('/').next().unwrap_or("");
                            let k: i64 = first.parse().map_err(|_| Error::MeshParse {
                                line: ln,
                                msg: "bad face index".into(),
                            })?;
                            let n = vertices.len() as i64;
                            let zero_based = if k < 0 { n + k } else { k - 1 };
                            if zero_based < 0 {
                                return Err(Error::MeshParse {
                                    line: ln,
                                    msg: "face index out of range".into(),
                                });
                            }
                            Ok(zero_based as usize)
                        })
                        .collect::<Result<_>>()?;
                    if idx.len() != 3 {
                        return Err(Error::MeshParse {
                            line: ln,
                            msg: "only triangular faces are supported".into(),
                        });
                    }
                    faces.push([idx[0], idx[1], idx[2]]);
                }
                _ => {}
            }
        }
        Self::new(vertices, faces)
    }

    pub fn to_off(&self) -> String {
        let mut s = format!("OFF\n{} {} 0\n", self.vertices.len(), self.faces.len());
        for v in &self.vertices {
            s.push_str(&format!("{:.17e} {:.17e} {:.17e}\n", v[0], v[1], v[2]));
        }
        for f in &self.faces {
            s.push_str(&format!("3 {} {} {}\n", f[0], f[1], f[2]));
        }
        s
    }

    // ---- generators ----

    pub fn octahedron() -> Self {
        let v = vec![
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ];
        let f = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        Self::new(v, f).expect("octahedron is valid")
    }

    /// Surface of the cube `[-1/2, 1/2]^3`, two triangles per face.
    pub fn unit_cube() -> Self {
        let mut v = Vec::new();
        for i in 0..8 {
            v.push([
                if i & 1 == 0 { -0.5 } else { 0.5 },
                if i & 2 == 0 { -0.5 } else { 0.5 },
                if i & 4 == 0 { -0.5 } else { 0.5 },
            ]);
        }
        let quads = [
            [0, 2, 3, 1], // z-
            [4, 5, 7, 6], // z+
            [0, 1, 5, 4], // y-
            [2, 6, 7, 3], // y+
            [0, 4, 6, 2], // x-
            [1, 3, 7, 5], // x+
        ];
        let mut f = Vec::new();
        for q in quads {
            f.push([q[0], q[1], q[2]]);
            f.push([q[0], q[2], q[3]]);
        }
        Self::new(v, f).expect("cube is valid")
    }

    /// Subdivided icosahedron projected onto the sphere of the given radius.
    pub fn icosphere(radius: f64, subdivisions: usize) -> Self {
        let t = (1.0 + 5f64.sqrt()) / 2.0;
        let mut v: Vec<V3> = vec![
            [-1.0, t, 0.0],
            [1.0, t, 0.0],
            [-1.0, -t, 0.0],
            [1.0, -t, 0.0],
            [0.0, -1.0, t],
            [0.0, 1.0, t],
            [0.0, -1.0, -t],
            [0.0, 1.0, -t],
            [t, 0.0, -1.0],
            [t, 0.0, 1.0],
            [-t, 0.0, -1.0],
            [-t, 0.0, 1.0],
        ];
        let mut f: Vec<[usize; 3]> = vec![
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
        let normalize = |p: V3| {
            let n = dot(p, p).sqrt();
            [p[0] / n, p[1] / n, p[2] / n]
        };
        for p in v.iter_mut() {
            *p = normalize(*p);
        }
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(f.len() * 4);
            let mut midpoint = |a: usize, b: usize, v: &mut Vec<V3>| -> usize {
                *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                    let p = normalize([
                        (v[a][0] + v[b][0]) / 2.0,
                        (v[a][1] + v[b][1]) / 2.0,
                        (v[a][2] + v[b][2]) / 2.0,
                    ]);
                    v.push(p);
                    v.len() - 1
                })
            };
            for [a, b, c] in f {
                let ab = midpoint(a, b, &mut v);
                let bc = midpoint(b, c, &mut v);
                let ca = midpoint(c, a, &mut v);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            f = next;
        }
        let v = v.into_iter().map(|p| p.map(|x| x * radius)).collect();
        Self::new(v, f).expect("icosphere is valid")
    }

    /// Icosphere scaled to the ellipsoid with semi-axes `(a, b, c)`.
    pub fn ellipsoid(a: f64, b: f64, c: f64, subdivisions: usize) -> Self {
        let s = Self::icosphere(1.0, subdivisions);
        let v = s
            .vertices
            .iter()
            .map(|p| [p[0] * a, p[1] * b, p[2] * c])
            .collect();
        Self::new(v, s.faces).expect("ellipsoid is valid")
    }

    /// Torus with major radius `major` and tube radius `minor` about the z axis.
    pub fn torus(major: f64, minor: f64, n_major: usize, n_minor: usize) -> Self {
        let mut v = Vec::with_capacity(n_major * n_minor);
        for i in 0..n_major {
            let u = std::f64::consts::TAU * i as f64 / n_major as f64;
            for j in 0..n_minor {
                let w = std::f64::consts::TAU * j as f64 / n_minor as f64;
                let r = major + minor * w.cos();
                v.push([r * u.cos(), r * u.sin(), minor * w.sin()]);
            }
        }
        let id = |i: usize, j: usize| (i % n_major) * n_minor + (j % n_minor);
        let mut f = Vec::with_capacity(2 * n_major * n_minor);
        for i in 0..n_major {
            for j in 0..n_minor {
                let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
                f.push([a, b, c]);
                f.push([a, c, d]);
            }
        }
        Self::new(v, f).expect("torus is valid")
    }
}

fn build_node(
    nodes: &mut Vec<BvhNode>,
    order: &mut [usize],
    offset: usize,
    centroids: &[V3],
    boxes: &[Aabb],
) -> usize {
    let mut bounds = Aabb::empty();
    for &f in order.iter() {
        bounds.merge(&boxes[f]);
    }
    let me = nodes.len();
    if order.len() <= LEAF_SIZE {
        nodes.push(BvhNode::Leaf {
            bounds,
            start: offset,
            end: offset + order.len(),
        });
        return me;
    }
    let mut cb = Aabb::empty();
    for &f in order.iter() {
        cb.grow(centroids[f]);
    }
    let ext = sub(cb.max, cb.min);
    let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
        0
    } else if ext[1] >= ext[2] {
        1
    } else {
        2
    };
    order.sort_by(|&a, &b| {
        centroids[a][axis]
            .total_cmp(&centroids[b][axis])
            .then(a.cmp(&b))
    });
    let mid = order.len() / 2;
    nodes.push(BvhNode::Leaf {
        bounds,
        start: 0,
        end: 0,
    });
    let (lo, hi) = order.split_at_mut(mid);
    let left = build_node(nodes, lo, offset, centroids, boxes);
    let right = build_node(nodes, hi, offset + mid, centroids, boxes);
    nodes[me] = BvhNode::Inner {
        bounds,
        left,
        right,
    };
    me
}
