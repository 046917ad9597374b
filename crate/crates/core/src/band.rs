//! The computational band: Cartesian grid nodes near the surface.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::{CpResult, Point, Surface};

/// Multi-index of a grid node; unused trailing axes are zero.
pub type NodeIndex = [i32; 3];

/// Stencil sizes the band has to accommodate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StencilSpec {
    /// Per-axis reach of the finite-difference stencil (1 for the 5/7-point Laplacian).
    pub diff_radius: usize,
    /// Degree p of the tensor-product interpolation, (p+1)^d nodes.
    pub interp_degree: usize,
}

impl StencilSpec {
    pub fn new(diff_radius: usize, interp_degree: usize) -> Result<Self> {
        if diff_radius == 0 || interp_degree == 0 {
            return Err(Error::InvalidParameter(
                "diff_radius and interp_degree must be at least 1".into(),
            ));
        }
        Ok(Self {
            diff_radius,
            interp_degree,
        })
    }

    /// 5-point (2D) / 7-point (3D) Laplacian with degree-`p` interpolation.
    pub fn laplacian(p: usize) -> Self {
        Self {
            diff_radius: 1,
            interp_degree: p.max(1),
        }
    }
}

/// Discrete tubular neighbourhood of a surface on a uniform grid with spacing `dx`.
///
/// Nodes come in two kinds. *Inner* nodes lie within the interpolation reach of the
/// surface, so every interpolation stencil consists of inner nodes and every inner
/// node has its full finite-difference stencil in the band. *Ghost* nodes are the
/// remaining finite-difference neighbours of inner nodes; their values are needed by
/// the difference operators but they never feed an interpolation.
#[derive(Clone, Debug)]
pub struct BandedGrid {
    dx: f64,
    dim: usize,
    origin: Point,
    nodes: Vec<NodeIndex>,
    index: HashMap<NodeIndex, usize>,
    cps: Vec<CpResult>,
    inner: Vec<bool>,
    bandwidth: f64,
    interp_reach: f64,
    spec: StencilSpec,
}

/// Distance from the surface within which all degree-`p` interpolation stencils lie.
pub fn interp_reach(dim: usize, p: usize, dx: f64) -> f64 {
    (dim as f64).sqrt() * (p as f64 + 1.0) / 2.0 * dx
}

fn add(a: NodeIndex, axis: usize, k: i32) -> NodeIndex {
    let mut b = a;
    b[axis] += k;
    b
}

impl BandedGrid {
    /// Builds the band around `surface` by flood fill from seeds on the surface.
    pub fn build(surface: &Surface, dx: f64, spec: StencilSpec) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dx must be positive, got {dx}"
            )));
        }
        let dim = surface.dim();
        let origin = Point::origin(dim);
        let p = spec.interp_degree;
        let r = spec.diff_radius as i32;
        let reach = interp_reach(dim, p, dx);
        let bandwidth = reach + spec.diff_radius as f64 * dx;

        let coords = |idx: &NodeIndex| -> Point {
            let mut c = [0.0; 3];
            for k in 0..dim {
                c[k] = origin[k] + idx[k] as f64 * dx;
            }
            Point::new(&c[..dim])
        };

        // node -> (closest point, inner?)
        let mut seen: HashMap<NodeIndex, (CpResult, bool)> = HashMap::new();
        let mut queue = VecDeque::new();
        for s in surface.seed_points(dx) {
            let mut idx = [0i32; 3];
            for k in 0..dim {
                idx[k] = ((s[k] - origin[k]) / dx).round() as i32;
            }
            queue.push_back(idx);
        }
        while let Some(idx) = queue.pop_front() {
            if seen.contains_key(&idx) {
                continue;
            }
            let cp = surface.closest_point(&coords(&idx))?;
            let inner = cp.dist <= reach;
            seen.insert(idx, (cp, inner));
            if inner {
                for axis in 0..dim {
                    for k in [-1, 1] {
                        let nb = add(idx, axis, k);
                        if !seen.contains_key(&nb) {
                            queue.push_back(nb);
                        }
                    }
                }
            }
        }
        if r > 1 {
            let inner_nodes: Vec<NodeIndex> =
                seen.iter().filter(|(_, v)| v.1).map(|(k, _)| *k).collect();
            for idx in inner_nodes {
                for axis in 0..dim {
                    for k in (-r..=r).filter(|&k| k != 0) {
                        let nb = add(idx, axis, k);
                        if let std::collections::hash_map::Entry::Vacant(e) = seen.entry(nb) {
                            let cp = surface.closest_point(&coords(&nb))?;
                            let inner = cp.dist <= reach;
                            e.insert((cp, inner));
                        }
                    }
                }
            }
        }

        let mut nodes: Vec<NodeIndex> = seen.keys().copied().collect();
        nodes.sort_unstable();
        let index = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let cps = nodes.iter().map(|n| seen[n].0).collect();
        let inner = nodes.iter().map(|n| seen[n].1).collect();
        let grid = Self {
            dx,
            dim,
            origin,
            nodes,
            index,
            cps,
            inner,
            bandwidth,
            interp_reach: reach,
            spec,
        };
        grid.check_closure()?;
        Ok(grid)
    }

    /// Full rectangular block of nodes `lo..=hi` with every node its own closest
    /// point. Useful for exercising finite-difference operators without a surface.
    pub fn cartesian_box(dim: usize, dx: f64, lo: NodeIndex, hi: NodeIndex) -> Self {
        let mut nodes = Vec::new();
        let rng = |k: usize| {
            if k < dim {
                lo[k]..=hi[k]
            } else {
                0..=0
            }
        };
        for i in rng(0) {
            for j in rng(1) {
                for l in rng(2) {
                    nodes.push([i, j, l]);
                }
            }
        }
        let index: HashMap<_, _> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let origin = Point::origin(dim);
        let cps = nodes
            .iter()
            .map(|n| {
                let c: Vec<f64> = (0..dim).map(|k| n[k] as f64 * dx).collect();
                CpResult {
                    cp: Point::new(&c),
                    dist: 0.0,
                    param: None,
                }
            })
            .collect();
        let inner = nodes
            .iter()
            .map(|n| (0..dim).all(|k| n[k] > lo[k] && n[k] < hi[k]))
            .collect();
        Self {
            dx,
            dim,
            origin,
            nodes,
            index,
            cps,
            inner,
            bandwidth: 0.0,
            interp_reach: 0.0,
            spec: StencilSpec::laplacian(1),
        }
    }

    /// Verifies that every interpolation stencil and every inner-node difference
    /// stencil stays inside the band.
    pub fn check_closure(&self) -> Result<()> {
        let r = self.spec.diff_radius as i32;
        for (n, idx) in self.nodes.iter().enumerate() {
            let cp = &self.cps[n];
            if cp.dist > self.bandwidth * (1.0 + 1e-12) {
                return Err(Error::BandNotClosed(format!(
                    "node {idx:?} is {} from the surface, beyond the bandwidth {}",
                    cp.dist, self.bandwidth
                )));
            }
            self.stencil_base_for(&cp.cp, self.spec.interp_degree)
                .map_err(|e| Error::BandNotClosed(format!("node {idx:?}: {e}")))?;
            if self.inner[n] {
                for axis in 0..self.dim {
                    for k in (-r..=r).filter(|&k| k != 0) {
                        let nb = add(*idx, axis, k);
                        if !self.index.contains_key(&nb) {
                            return Err(Error::BandNotClosed(format!(
                                "inner node {idx:?} lacks neighbour {nb:?}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn interp_reach(&self) -> f64 {
        self.interp_reach
    }

    pub fn spec(&self) -> StencilSpec {
        self.spec
    }

    pub fn degree(&self) -> usize {
        self.spec.interp_degree
    }

    pub fn nodes(&self) -> &[NodeIndex] {
        &self.nodes
    }

    pub fn cps(&self) -> &[CpResult] {
        &self.cps
    }

    pub fn is_inner(&self, n: usize) -> bool {
        self.inner[n]
    }

    pub fn inner_count(&self) -> usize {
        self.inner.iter().filter(|&&b| b).count()
    }

    pub fn find(&self, idx: &NodeIndex) -> Option<usize> {
        self.index.get(idx).copied()
    }

    pub fn neighbour(&self, n: usize, axis: usize, k: i32) -> Option<usize> {
        self.find(&add(self.nodes[n], axis, k))
    }

    pub fn coords(&self, n: usize) -> Point {
        let idx = &self.nodes[n];
        let mut c = [0.0; 3];
        for k in 0..self.dim {
            c[k] = self.origin[k] + idx[k] as f64 * self.dx;
        }
        Point::new(&c[..self.dim])
    }

    /// Closest point coordinates as one vector per axis.
    pub fn cp_components(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|k| self.cps.iter().map(|c| c.cp[k]).collect())
            .collect()
    }

    /// Lower corner of the degree-`p` interpolation cube around `q`, using the grid's
    /// own degree. See [`BandedGrid::stencil_base_for`].
    pub fn interp_stencil_base(&self, q: &Point) -> Result<NodeIndex> {
        self.stencil_base_for(q, self.spec.interp_degree)
    }

    /// Lower corner of the `(p+1)^d` node cube used to interpolate at `q`.
    ///
    /// For odd `p`, `q` lies in the central cell of the cube; for even `p`, the cube is
    /// centred on the node nearest to `q`. Fails if any cube node is not in the band.
    pub fn stencil_base_for(&self, q: &Point, p: usize) -> Result<NodeIndex> {
        let base = self.stencil_base_unchecked(q, p);
        let span = p as i32;
        let (sy, sz) = (
            if self.dim > 1 { span } else { 0 },
            if self.dim > 2 { span } else { 0 },
        );
        for i in 0..=span {
            for j in 0..=sy {
                for k in 0..=sz {
                    let idx = [base[0] + i, base[1] + j, base[2] + k];
                    if !self.index.contains_key(&idx) {
                        return Err(Error::OutOfBand { index: idx });
                    }
                }
            }
        }
        Ok(base)
    }

    pub(crate) fn stencil_base_unchecked(&self, q: &Point, p: usize) -> NodeIndex {
        let shift = (p as f64 - 1.0) / 2.0;
        let mut base = [0i32; 3];
        for k in 0..self.dim {
            let x = (q[k] - self.origin[k]) / self.dx;
            base[k] = (x - shift).floor() as i32;
        }
        base
    }

    /// Writes the band as CSV:
    /// `linear_index,i,j[,k],x,y[,z],cpx,cpy[,cpz],dist`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let axes = ["i", "j", "k"];
        let xs = ["x", "y", "z"];
        let mut header = vec!["linear_index".to_string()];
        header.extend(axes[..self.dim].iter().map(|s| s.to_string()));
        header.extend(xs[..self.dim].iter().map(|s| s.to_string()));
        header.extend(xs[..self.dim].iter().map(|s| format!("cp{s}")));
        header.push("dist".into());
        writeln!(w, "{}", header.join(","))?;
        for n in 0..self.len() {
            let x = self.coords(n);
            let mut row = vec![n.to_string()];
            row.extend(self.nodes[n][..self.dim].iter().map(|v| v.to_string()));
            row.extend(x.coords().iter().map(|v| format!("{v:.16e}")));
            row.extend(self.cps[n].cp.coords().iter().map(|v| format!("{v:.16e}")));
            row.push(format!("{:.16e}", self.cps[n].dist));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}
