//! Closed parametric curves in the plane and their closest point functions.

use std::f64::consts::TAU;
use std::fmt::Debug;
use std::sync::Arc;

use super::Point;

/// A smooth closed planar curve `s ↦ σ(s)` with period [`CurveMap::period`].
pub trait CurveMap: Send + Sync + Debug {
    fn position(&self, s: f64) -> [f64; 2];
    fn tangent(&self, s: f64) -> [f64; 2];
    fn second_derivative(&self, s: f64) -> [f64; 2];

    fn period(&self) -> f64 {
        TAU
    }
}

/// Axis-aligned ellipse centred at the origin, `σ(s) = (a cos s, b sin s)`.
#[derive(Clone, Copy, Debug)]
pub struct Ellipse {
    pub a: f64,
    pub b: f64,
}

impl CurveMap for Ellipse {
    fn position(&self, s: f64) -> [f64; 2] {
        [self.a * s.cos(), self.b * s.sin()]
    }
    fn tangent(&self, s: f64) -> [f64; 2] {
        [-self.a * s.sin(), self.b * s.cos()]
    }
    fn second_derivative(&self, s: f64) -> [f64; 2] {
        [-self.a * s.cos(), -self.b * s.sin()]
    }
}

/// Star-shaped curve with radius `r(s) = 1 + amplitude·cos(lobes·s)`.
///
/// With `amplitude = 1/3` and `lobes = 6` this is the six-petal "snowflake".
#[derive(Clone, Copy, Debug)]
pub struct RadialCurve {
    pub amplitude: f64,
    pub lobes: f64,
}

impl RadialCurve {
    pub fn snowflake() -> Self {
        Self {
            amplitude: 1.0 / 3.0,
            lobes: 6.0,
        }
    }

    fn radius(&self, s: f64) -> (f64, f64, f64) {
        let (a, k) = (self.amplitude, self.lobes);
        let r = 1.0 + a * (k * s).cos();
        let dr = -a * k * (k * s).sin();
        let ddr = -a * k * k * (k * s).cos();
        (r, dr, ddr)
    }
}

impl CurveMap for RadialCurve {
    fn position(&self, s: f64) -> [f64; 2] {
        let (r, _, _) = self.radius(s);
        [r * s.cos(), r * s.sin()]
    }
    fn tangent(&self, s: f64) -> [f64; 2] {
        let (r, dr, _) = self.radius(s);
        let (c, sn) = (s.cos(), s.sin());
        [dr * c - r * sn, dr * sn + r * c]
    }
    fn second_derivative(&self, s: f64) -> [f64; 2] {
        let (r, dr, ddr) = self.radius(s);
        let (c, sn) = (s.cos(), s.sin());
        [
            ddr * c - 2.0 * dr * sn - r * c,
            ddr * sn + 2.0 * dr * c - r * sn,
        ]
    }
}

/// Shared handle to a curve map plus the closest point search.
#[derive(Clone, Debug)]
pub struct ParametricCurve {
    map: Arc<dyn CurveMap>,
}

/// Number of coarse samples used to bracket local minima of the distance.
pub const BRACKET_SAMPLES: usize = 1024;
const NEWTON_TOL: f64 = 1e-12;
const AMBIGUITY_TOL: f64 = 1e-9;

pub(crate) struct CurveProjection {
    pub s: f64,
    pub point: [f64; 2],
    pub dist: f64,
    pub ambiguous: bool,
}

impl ParametricCurve {
    pub fn new(map: impl CurveMap + 'static) -> Self {
        Self { map: Arc::new(map) }
    }

    pub fn map(&self) -> &dyn CurveMap {
        &*self.map
    }

    pub fn period(&self) -> f64 {
        self.map.period()
    }

    pub fn point_at(&self, s: f64) -> Point {
        let p = self.map.position(s);
        Point::new2(p[0], p[1])
    }

    /// Unsigned curvature `|σ'×σ''| / |σ'|³`.
    pub fn curvature(&self, s: f64) -> f64 {
        let d1 = self.map.tangent(s);
        let d2 = self.map.second_derivative(s);
        let cross = d1[0] * d2[1] - d1[1] * d2[0];
        let speed = d1[0].hypot(d1[1]);
        cross.abs() / speed.powi(3)
    }

    /// Speed `|σ'(s)|`.
    pub fn speed(&self, s: f64) -> f64 {
        let d1 = self.map.tangent(s);
        d1[0].hypot(d1[1])
    }

    /// Arc length by composite trapezoid on the periodic samples (spectrally accurate).
    pub fn length(&self) -> f64 {
        let n = 4096;
        let h = self.period() / n as f64;
        (0..n).map(|i| self.speed(i as f64 * h)).sum::<f64>() * h
    }

    pub(crate) fn project(&self, x: [f64; 2]) -> CurveProjection {
        let period = self.period();
        let h = period / BRACKET_SAMPLES as f64;
        let d2: Vec<f64> = (0..BRACKET_SAMPLES)
            .map(|i| {
                let p = self.map.position(i as f64 * h);
                (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2)
            })
            .collect();
        let n = BRACKET_SAMPLES;
        let mut minima: Vec<usize> = (0..n)
            .filter(|&i| {
                let prev = d2[(i + n - 1) % n];
                let next = d2[(i + 1) % n];
                d2[i] <= prev && d2[i] <= next
            })
            .collect();
        minima.sort_by(|&a, &b| d2[a].total_cmp(&d2[b]));
        minima.truncate(16);

        let mut cands: Vec<(f64, [f64; 2], f64)> = minima
            .iter()
            .map(|&i| {
                let s0 = i as f64 * h;
                let s = self.refine(x, s0 - h, s0 + h, s0);
                let p = self.map.position(s);
                let dist = (p[0] - x[0]).hypot(p[1] - x[1]);
                (s.rem_euclid(period), p, dist)
            })
            .collect();
        cands.sort_by(|a, b| a.2.total_cmp(&b.2));
        let (s, point, dist) = cands[0];
        let scale = 1e-6 * (1.0 + dist);
        let ambiguous = cands[1..].iter().any(|c| {
            (c.2 - dist).abs() < AMBIGUITY_TOL * (1.0 + dist)
                && (c.1[0] - point[0]).hypot(c.1[1] - point[1]) > scale
        });
        CurveProjection {
            s,
            point,
            dist,
            ambiguous,
        }
    }

    /// Safeguarded Newton on g(s) = (σ(s) − x)·σ'(s) inside `[lo, hi]`.
    fn refine(&self, x: [f64; 2], mut lo: f64, mut hi: f64, s0: f64) -> f64 {
        let g = |s: f64| -> (f64, f64) {
            let p = self.map.position(s);
            let d1 = self.map.tangent(s);
            let d2 = self.map.second_derivative(s);
            let r = [p[0] - x[0], p[1] - x[1]];
            (
                r[0] * d1[0] + r[1] * d1[1],
                d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1],
            )
        };
        let (glo, _) = g(lo);
        let (ghi, _) = g(hi);
        let bracketed = glo <= 0.0 && ghi >= 0.0;
        let mut s = s0;
        for _ in 0..100 {
            let (gs, dg) = g(s);
            if gs == 0.0 {
                break;
            }
            if bracketed {
                if gs < 0.0 {
                    lo = s;
                } else {
                    hi = s;
                }
            }
            let mut next = if dg > 0.0 { s - gs / dg } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = if bracketed {
                    0.5 * (lo + hi)
                } else {
                    s.clamp(lo, hi)
                };
            }
            let step = (next - s).abs();
            s = next;
            if step < NEWTON_TOL || (bracketed && hi - lo < NEWTON_TOL) {
                break;
            }
        }
        s
    }
}
