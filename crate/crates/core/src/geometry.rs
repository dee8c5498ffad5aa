//! Planar points, affine hat functions on triangles and convex clipping.

use core::ops::{Add, Mul, Neg, Sub};
#[allow(unused_imports)]
use num_traits::Float;

/// A point (or vector) in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 2D cross product.
    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Rotate by +90 degrees.
    pub fn perp(self) -> Point {
        Point::new(-self.y, self.x)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, s: f64) -> Point {
        Point::new(self.x * s, self.y * s)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Signed area of the triangle (a, b, c); positive when counter-clockwise.
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * (b - a).cross(c - a)
}

pub fn centroid(t: &[Point; 3]) -> Point {
    Point::new((t[0].x + t[1].x + t[2].x) / 3.0, (t[0].y + t[1].y + t[2].y) / 3.0)
}

/// The three nodal (hat) functions of a triangle, stored as `c + g . (p - origin)`.
#[derive(Clone, Copy, Debug)]
pub struct AffineBasis {
    origin: Point,
    c: [f64; 3],
    g: [Point; 3],
}

impl AffineBasis {
    pub fn new(t: &[Point; 3]) -> Self {
        let origin = t[0];
        let two_area = (t[1] - t[0]).cross(t[2] - t[0]);
        let mut c = [0.0; 3];
        let mut g = [Point::default(); 3];
        for a in 0..3 {
            let p = t[(a + 1) % 3] - origin;
            let q = t[(a + 2) % 3] - origin;
            // psi_a(x) = cross(q - p, x - p) / two_area
            let e = q - p;
            g[a] = Point::new(-e.y, e.x) * (1.0 / two_area);
            c[a] = -(e.cross(p)) / two_area;
            // e x (x - p) = e.x*(x.y-p.y) - e.y*(x.x-p.x)
        }
        Self { origin, c, g }
    }

    #[inline]
    pub fn eval(&self, p: Point) -> [f64; 3] {
        let d = p - self.origin;
        [self.c[0] + self.g[0].dot(d), self.c[1] + self.g[1].dot(d), self.c[2] + self.g[2].dot(d)]
    }

    pub fn gradient(&self, a: usize) -> Point {
        self.g[a]
    }
}

/// Small fixed-capacity convex polygon used for clipping.
#[derive(Clone, Copy, Debug)]
pub struct Polygon {
    pts: [Point; 10],
    len: usize,
}

impl Polygon {
    pub fn from_triangle(t: &[Point; 3]) -> Self {
        let mut pts = [Point::default(); 10];
        pts[..3].copy_from_slice(t);
        Self { pts, len: 3 }
    }

    pub fn points(&self) -> &[Point] {
        &self.pts[..self.len]
    }

    pub fn is_empty(&self) -> bool {
        self.len < 3
    }

    /// Keep the part where `n . (p - a) >= 0`.
    pub fn clip(&mut self, a: Point, n: Point) {
        if self.len == 0 {
            return;
        }
        let mut out = [Point::default(); 10];
        let mut m = 0;
        for i in 0..self.len {
            let p = self.pts[i];
            let q = self.pts[(i + 1) % self.len];
            let dp = n.dot(p - a);
            let dq = n.dot(q - a);
            if dp >= 0.0 {
                out[m] = p;
                m += 1;
            }
            if (dp >= 0.0) != (dq >= 0.0) {
                let t = dp / (dp - dq);
                out[m] = p + (q - p) * t;
                m += 1;
            }
            if m >= 9 {
                break;
            }
        }
        self.pts = out;
        self.len = m;
    }

    /// Clip against a counter-clockwise triangle.
    pub fn clip_triangle(&mut self, t: &[Point; 3]) {
        for i in 0..3 {
            let a = t[i];
            let b = t[(i + 1) % 3];
            self.clip(a, (b - a).perp());
            if self.is_empty() {
                return;
            }
        }
    }

    pub fn area(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let p0 = self.pts[0];
        let mut s = 0.0;
        for i in 1..self.len - 1 {
            s += signed_area(p0, self.pts[i], self.pts[i + 1]);
        }
        s
    }

    /// Quadrature points exact for quadratics: edge midpoints of a fan triangulation.
    pub fn for_each_quadratic_point(&self, mut f: impl FnMut(Point, f64)) {
        if self.is_empty() {
            return;
        }
        let p0 = self.pts[0];
        for i in 1..self.len - 1 {
            let p1 = self.pts[i];
            let p2 = self.pts[i + 1];
            let w = signed_area(p0, p1, p2) / 3.0;
            if w <= 0.0 {
                continue;
            }
            f((p0 + p1) * 0.5, w);
            f((p1 + p2) * 0.5, w);
            f((p2 + p0) * 0.5, w);
        }
    }
}

/// Euclidean distance between two triangles (0 when they intersect).
pub fn triangle_distance(a: &[Point; 3], b: &[Point; 3]) -> f64 {
    let mut poly = Polygon::from_triangle(a);
    poly.clip_triangle(b);
    if poly.area() > 0.0 {
        return 0.0;
    }
    let mut d = f64::INFINITY;
    for i in 0..3 {
        for j in 0..3 {
            d = d.min(point_segment_distance(a[i], b[j], b[(j + 1) % 3]));
            d = d.min(point_segment_distance(b[j], a[i], a[(i + 1) % 3]));
        }
    }
    d
}

pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let e = b - a;
    let l2 = e.dot(e);
    let t = if l2 > 0.0 { ((p - a).dot(e) / l2).clamp(0.0, 1.0) } else { 0.0 };
    (p - (a + e * t)).norm()
}

/// Whether `p` lies in the closed counter-clockwise triangle, with tolerance `tol`.
pub fn contains(t: &[Point; 3], p: Point, tol: f64) -> bool {
    (0..3).all(|i| {
        let a = t[i];
        let b = t[(i + 1) % 3];
        (b - a).cross(p - a) >= -tol
    })
}
