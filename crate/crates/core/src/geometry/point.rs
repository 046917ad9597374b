use std::ops::{Add, Index, Mul, Sub};

/// A point in R^d, d ∈ {1, 2, 3}. Unused trailing components are zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    c: [f64; 3],
    dim: usize,
}

impl Point {
    pub fn new(coords: &[f64]) -> Self {
        assert!(
            (1..=3).contains(&coords.len()),
            "dimension must be 1, 2 or 3"
        );
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Self {
            c,
            dim: coords.len(),
        }
    }

    pub fn new2(x: f64, y: f64) -> Self {
        Self {
            c: [x, y, 0.0],
            dim: 2,
        }
    }

    pub fn new3(x: f64, y: f64, z: f64) -> Self {
        Self {
            c: [x, y, z],
            dim: 3,
        }
    }

    pub fn origin(dim: usize) -> Self {
        Self::new(&[0.0; 3][..dim])
    }

    pub(crate) fn from_array(c: [f64; 3], dim: usize) -> Self {
        Self { c, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &[f64] {
        &self.c[..self.dim]
    }

    /// Always three components, zero-padded.
    pub fn xyz(&self) -> [f64; 3] {
        self.c
    }

    pub fn dot(&self, o: &Point) -> f64 {
        self.c[0] * o.c[0] + self.c[1] * o.c[1] + self.c[2] * o.c[2]
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(&self, o: &Point) -> f64 {
        (*self - *o).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|v| v.is_finite())
    }
}

impl Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.c[..self.dim][i]
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point {
            c: [self.c[0] + o.c[0], self.c[1] + o.c[1], self.c[2] + o.c[2]],
            dim: self.dim.max(o.dim),
        }
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point {
            c: [self.c[0] - o.c[0], self.c[1] - o.c[1], self.c[2] - o.c[2]],
            dim: self.dim.max(o.dim),
        }
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point {
            c: [self.c[0] * s, self.c[1] * s, self.c[2] * s],
            dim: self.dim,
        }
    }
}
