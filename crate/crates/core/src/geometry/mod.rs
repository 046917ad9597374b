//! Closest point functions for analytic surfaces and triangle meshes.

mod curve;
pub mod mesh;
mod point;

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

pub use curve::{CurveMap, Ellipse, ParametricCurve, RadialCurve, BRACKET_SAMPLES};
pub use mesh::TriMesh;
pub use point::Point;

use crate::error::{Error, Result};

/// Surface parameter of a closest point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Param {
    /// Curve parameter (angle θ for circles).
    Curve(f64),
    /// Longitude θ ∈ (−π, π] and latitude φ ∈ [−π/2, π/2].
    Sphere { theta: f64, phi: f64 },
}

impl Param {
    pub fn curve(&self) -> f64 {
        match *self {
            Param::Curve(s) => s,
            Param::Sphere { theta, .. } => theta,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CpResult {
    pub cp: Point,
    pub dist: f64,
    pub param: Option<Param>,
}

/// A closed surface (or curve) queryable for closest points.
#[derive(Clone, Debug)]
pub enum Surface {
    Circle { center: Point, radius: f64 },
    Sphere { center: Point, radius: f64 },
    Curve(ParametricCurve),
    Mesh(Arc<TriMesh>),
}

const CENTER_TOL: f64 = 1e-9;

impl Surface {
    pub fn unit_circle() -> Self {
        Self::circle(Point::new2(0.0, 0.0), 1.0)
    }

    pub fn circle(center: Point, radius: f64) -> Self {
        Surface::Circle {
            center: Point::new2(center[0], center[1]),
            radius,
        }
    }

    pub fn unit_sphere() -> Self {
        Self::sphere(Point::new3(0.0, 0.0, 0.0), 1.0)
    }

    pub fn sphere(center: Point, radius: f64) -> Self {
        Surface::Sphere {
            center: Point::new3(center[0], center[1], center[2]),
            radius,
        }
    }

    pub fn ellipse(a: f64, b: f64) -> Self {
        Surface::Curve(ParametricCurve::new(Ellipse { a, b }))
    }

    pub fn snowflake() -> Self {
        Surface::Curve(ParametricCurve::new(RadialCurve::snowflake()))
    }

    pub fn mesh(mesh: TriMesh) -> Self {
        Surface::Mesh(Arc::new(mesh))
    }

    /// Embedding dimension d.
    pub fn dim(&self) -> usize {
        match self {
            Surface::Circle { .. } | Surface::Curve(_) => 2,
            Surface::Sphere { .. } | Surface::Mesh(_) => 3,
        }
    }

    /// Intrinsic dimension k of the surface.
    pub fn surface_dim(&self) -> usize {
        self.dim() - 1
    }

    pub fn is_parameterized(&self) -> bool {
        !matches!(self, Surface::Mesh(_))
    }

    /// Euclidean closest point. Fails with [`Error::AmbiguousClosestPoint`] when `x`
    /// lies (numerically) on the medial axis.
    pub fn closest_point(&self, x: &Point) -> Result<CpResult> {
        let d = self.dim();
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.dim(),
            });
        }
        match self {
            Surface::Circle { center, radius } | Surface::Sphere { center, radius } => {
                let v = *x - *center;
                let r = v.norm();
                if r <= CENTER_TOL * (1.0 + radius) {
                    return Err(Error::AmbiguousClosestPoint {
                        point: x.xyz(),
                        dist: *radius,
                    });
                }
                let cp = *center + v * (radius / r);
                let param = if d == 2 {
                    Param::Curve(v[1].atan2(v[0]))
                } else {
                    Param::Sphere {
                        theta: v[1].atan2(v[0]),
                        phi: (v[2] / r).clamp(-1.0, 1.0).asin(),
                    }
                };
                Ok(CpResult {
                    cp,
                    dist: (r - radius).abs(),
                    param: Some(param),
                })
            }
            Surface::Curve(c) => {
                let pr = c.project([x[0], x[1]]);
                if pr.ambiguous {
                    return Err(Error::AmbiguousClosestPoint {
                        point: x.xyz(),
                        dist: pr.dist,
                    });
                }
                Ok(CpResult {
                    cp: Point::new2(pr.point[0], pr.point[1]),
                    dist: pr.dist,
                    param: Some(Param::Curve(pr.s)),
                })
            }
            Surface::Mesh(m) => Ok(mesh_cp(m, x)),
        }
    }

    /// Mesh-only query; same as [`Surface::closest_point`] for meshes.
    pub fn closest_point_mesh(&self, x: &Point) -> Result<CpResult> {
        match self {
            Surface::Mesh(m) => {
                if x.dim() != 3 {
                    return Err(Error::DimensionMismatch {
                        expected: 3,
                        found: x.dim(),
                    });
                }
                Ok(mesh_cp(m, x))
            }
            _ => Err(Error::Unsupported(
                "closest_point_mesh on an analytic surface".into(),
            )),
        }
    }

    /// Points on the surface with their parameters.
    ///
    /// Curves: `n` points uniform in the parameter. Sphere: `m×m` longitude/latitude
    /// grid with `m = ⌈√n⌉`, latitudes cell-centred so the poles are never repeated.
    /// Meshes: the vertices (`n` is ignored).
    pub fn sample(&self, n: usize) -> Vec<(Point, Option<Param>)> {
        let n = n.max(1);
        match self {
            Surface::Circle { center, radius } => (0..n)
                .map(|i| {
                    let t = TAU * i as f64 / n as f64;
                    (
                        *center + Point::new2(t.cos(), t.sin()) * *radius,
                        Some(Param::Curve(t)),
                    )
                })
                .collect(),
            Surface::Sphere { center, radius } => {
                let m = (n as f64).sqrt().ceil() as usize;
                let mut out = Vec::with_capacity(m * m);
                for j in 0..m {
                    let phi = -PI / 2.0 + (j as f64 + 0.5) * PI / m as f64;
                    for i in 0..m {
                        let theta = -PI + (i + 1) as f64 * TAU / m as f64;
                        let p = Point::new3(
                            theta.cos() * phi.cos(),
                            theta.sin() * phi.cos(),
                            phi.sin(),
                        );
                        out.push((*center + p * *radius, Some(Param::Sphere { theta, phi })));
                    }
                }
                out
            }
            Surface::Curve(c) => (0..n)
                .map(|i| {
                    let s = c.period() * i as f64 / n as f64;
                    (c.point_at(s), Some(Param::Curve(s)))
                })
                .collect(),
            Surface::Mesh(m) => m
                .vertices()
                .iter()
                .map(|v| (Point::new3(v[0], v[1], v[2]), None))
                .collect(),
        }
    }

    /// Exact mean curvature (sum of principal curvatures) at a surface point.
    pub fn exact_mean_curvature(&self, y: &Point) -> Result<f64> {
        match self {
            Surface::Circle { radius, .. } => Ok(1.0 / radius),
            Surface::Sphere { radius, .. } => Ok(2.0 / radius),
            Surface::Curve(c) => {
                let pr = c.project([y[0], y[1]]);
                Ok(c.curvature(pr.s))
            }
            Surface::Mesh(_) => Err(Error::Unsupported(
                "exact curvature of a triangle mesh".into(),
            )),
        }
    }

    /// Axis-aligned bounds of the surface.
    pub fn bounding_box(&self) -> (Point, Point) {
        match self {
            Surface::Circle { center, radius } | Surface::Sphere { center, radius } => {
                let d = self.dim();
                let r = Point::new(&[*radius; 3][..d]);
                (*center - r, *center + r)
            }
            Surface::Curve(c) => {
                let mut lo = [f64::INFINITY; 2];
                let mut hi = [f64::NEG_INFINITY; 2];
                for i in 0..4096 {
                    let p = c.map().position(c.period() * i as f64 / 4096.0);
                    for k in 0..2 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
                (Point::new2(lo[0], lo[1]), Point::new2(hi[0], hi[1]))
            }
            Surface::Mesh(m) => {
                let (lo, hi) = m.bounding_box();
                (
                    Point::new3(lo[0], lo[1], lo[2]),
                    Point::new3(hi[0], hi[1], hi[2]),
                )
            }
        }
    }

    /// Points spread over the surface at spacing no larger than `h`, used to seed
    /// band discovery.
    pub(crate) fn seed_points(&self, h: f64) -> Vec<Point> {
        match self {
            Surface::Circle { radius, .. } => {
                let n = ((TAU * radius / h).ceil() as usize).max(8);
                self.sample(n).into_iter().map(|s| s.0).collect()
            }
            Surface::Sphere { radius, .. } => {
                let m = ((PI * radius / h).ceil() as usize * 2).max(8);
                self.sample(m * m).into_iter().map(|s| s.0).collect()
            }
            Surface::Curve(c) => {
                let n = ((c.length() / h).ceil() as usize * 2).max(16);
                self.sample(n).into_iter().map(|s| s.0).collect()
            }
            Surface::Mesh(m) => {
                let mut out = Vec::new();
                for f in m.faces() {
                    let [a, b, c] = f.map(|v| m.vertices()[v]);
                    let edge = |p: [f64; 3], q: [f64; 3]| {
                        ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2))
                            .sqrt()
                    };
                    let l = edge(a, b).max(edge(b, c)).max(edge(c, a));
                    let k = ((l / h).ceil() as usize).max(1);
                    for i in 0..=k {
                        for j in 0..=(k - i) {
                            let u = i as f64 / k as f64;
                            let v = j as f64 / k as f64;
                            let w = 1.0 - u - v;
                            out.push(Point::new3(
                                w * a[0] + u * b[0] + v * c[0],
                                w * a[1] + u * b[1] + v * c[1],
                                w * a[2] + u * b[2] + v * c[2],
                            ));
                        }
                    }
                }
                out
            }
        }
    }
}

fn mesh_cp(m: &TriMesh, x: &Point) -> CpResult {
    let hit = m.closest_point(x.xyz());
    CpResult {
        cp: Point::from_array(hit.point, 3),
        dist: hit.dist2.sqrt(),
        param: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_radial_projection() {
        let c = Surface::unit_circle();
        let r = c.closest_point(&Point::new2(2.0, 0.0)).unwrap();
        assert_eq!(r.cp, Point::new2(1.0, 0.0));
        assert_eq!(r.dist, 1.0);
    }

    #[test]
    fn sphere_point_on_surface_is_fixed() {
        let s = Surface::unit_sphere();
        let r = s.closest_point(&Point::new3(0.0, 0.0, 1.0)).unwrap();
        assert_eq!(r.cp, Point::new3(0.0, 0.0, 1.0));
        assert_eq!(r.dist, 0.0);
        match r.param {
            Some(Param::Sphere { phi, .. }) => assert!((phi - PI / 2.0).abs() < 1e-15),
            _ => panic!("sphere parameter expected"),
        }
    }

    #[test]
    fn center_is_ambiguous() {
        let c = Surface::unit_circle();
        assert!(matches!(
            c.closest_point(&Point::new2(0.0, 0.0)),
            Err(Error::AmbiguousClosestPoint { .. })
        ));
        let e = Surface::ellipse(2.0, 1.0);
        assert!(matches!(
            e.closest_point(&Point::new2(0.0, 0.0)),
            Err(Error::AmbiguousClosestPoint { .. })
        ));
    }

    #[test]
    fn circle_samples_at_quarter_turns() {
        let s = Surface::unit_circle().sample(4);
        let angles: Vec<f64> = s.iter().map(|(_, p)| p.unwrap().curve()).collect();
        for (a, e) in angles.iter().zip([0.0, PI / 2.0, PI, 1.5 * PI]) {
            assert!((a - e).abs() < 1e-15);
        }
    }

    #[test]
    fn sphere_sample_grid_shape() {
        let s = Surface::unit_sphere().sample(36);
        assert_eq!(s.len(), 36);
        for (p, par) in &s {
            let Some(Param::Sphere { theta, phi }) = par else {
                panic!()
            };
            assert!(*theta > -PI && *theta <= PI);
            assert!(phi.abs() < PI / 2.0);
            assert!((p.norm() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn samples_lie_on_surface() {
        for s in [
            Surface::unit_circle(),
            Surface::unit_sphere(),
            Surface::ellipse(2.0, 1.0),
            Surface::snowflake(),
            Surface::mesh(TriMesh::octahedron()),
        ] {
            for (p, _) in s.sample(50) {
                let r = s.closest_point(&p).unwrap();
                assert!(r.dist <= 1e-12, "{:?}", r);
            }
        }
    }

    #[test]
    fn exact_curvatures() {
        assert_eq!(
            Surface::unit_circle()
                .exact_mean_curvature(&Point::new2(1.0, 0.0))
                .unwrap(),
            1.0
        );
        assert_eq!(
            Surface::unit_sphere()
                .exact_mean_curvature(&Point::new3(1.0, 0.0, 0.0))
                .unwrap(),
            2.0
        );
        let e = Surface::ellipse(2.0, 1.0);
        let k = e.exact_mean_curvature(&Point::new2(2.0, 0.0)).unwrap();
        assert!((k - 2.0).abs() < 1e-12);
        assert!(Surface::mesh(TriMesh::octahedron())
            .exact_mean_curvature(&Point::new3(1.0, 0.0, 0.0))
            .is_err());
    }

    #[test]
    fn ellipse_curvature_matches_finite_differences() {
        // κ = |x'y'' − y'x''| / |σ'|³ with derivatives from central differences of σ
        let c = ParametricCurve::new(Ellipse { a: 2.0, b: 1.0 });
        let h = 1e-4;
        for s in [0.0, 0.3, 1.1, 2.0] {
            let p = |t: f64| c.map().position(t);
            let (pm, p0, pp) = (p(s - h), p(s), p(s + h));
            let d1 = [(pp[0] - pm[0]) / (2.0 * h), (pp[1] - pm[1]) / (2.0 * h)];
            let d2 = [
                (pp[0] - 2.0 * p0[0] + pm[0]) / (h * h),
                (pp[1] - 2.0 * p0[1] + pm[1]) / (h * h),
            ];
            let k = (d1[0] * d2[1] - d1[1] * d2[0]).abs() / d1[0].hypot(d1[1]).powi(3);
            assert!((k - c.curvature(s)).abs() < 1e-6);
        }
    }

    #[test]
    fn dimension_mismatch() {
        assert!(matches!(
            Surface::unit_sphere().closest_point(&Point::new2(1.0, 0.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
