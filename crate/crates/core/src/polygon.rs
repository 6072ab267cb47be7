//! Convex polygons in the plane and exact splitting by lines.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type Point<T> = [T; 2];

/// Affine function `t -> <grad, t> + constant` on the plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFn<T> {
    pub grad: [T; 2],
    pub constant: T,
}

impl<T: Scalar> LineFn<T> {
    pub fn new(grad: [T; 2], constant: T) -> Self {
        Self { grad, constant }
    }

    #[inline]
    pub fn eval(&self, p: &Point<T>) -> T {
        self.grad[0] * p[0] + self.grad[1] * p[1] + self.constant
    }

    pub fn grad_norm(&self) -> T {
        (self.grad[0] * self.grad[0] + self.grad[1] * self.grad[1]).sqrt()
    }

    pub fn negate(&self) -> Self {
        Self {
            grad: [-self.grad[0], -self.grad[1]],
            constant: -self.constant,
        }
    }
}

/// Counterclockwise convex polygon without repeated vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexPolygon<T> {
    vertices: Vec<Point<T>>,
}

/// Result of cutting a polygon with a line `f = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Split<T> {
    /// The line does not meet the interior; the polygon lies on `f <= 0`.
    Negative,
    /// The line does not meet the interior; the polygon lies on `f >= 0`.
    Positive,
    /// Pieces on `f <= 0` and `f >= 0`.
    Both(ConvexPolygon<T>, ConvexPolygon<T>),
}

fn cross<T: Scalar>(o: &Point<T>, a: &Point<T>, b: &Point<T>) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn dedup<T: Scalar>(pts: Vec<Point<T>>, tol: T) -> Vec<Point<T>> {
    let mut out: Vec<Point<T>> = Vec::with_capacity(pts.len());
    for p in pts {
        if let Some(last) = out.last() {
            if (last[0] - p[0]).abs() <= tol && (last[1] - p[1]).abs() <= tol {
                continue;
            }
        }
        out.push(p);
    }
    while out.len() > 1 {
        let (first, last) = (out[0], out[out.len() - 1]);
        if (last[0] - first[0]).abs() <= tol && (last[1] - first[1]).abs() <= tol {
            out.pop();
        } else {
            break;
        }
    }
    out
}

fn signed_area<T: Scalar>(v: &[Point<T>]) -> T {
    let n = v.len();
    let mut s = T::zero();
    for i in 0..n {
        let (p, q) = (v[i], v[(i + 1) % n]);
        s = s + (p[0] * q[1] - q[0] * p[1]);
    }
    s / T::lit(2.0)
}

impl<T: Scalar> ConvexPolygon<T> {
    /// Builds a polygon from vertices in either orientation. Near-duplicate
    /// vertices are dropped; fewer than three distinct vertices or zero area
    /// is an error.
    pub fn new(vertices: Vec<Point<T>>) -> Result<Self> {
        let mut v = dedup(vertices, T::lit(1e-12));
        if v.len() < 3 {
            return Err(Error::InvalidParameter("polygon needs three distinct vertices".into()));
        }
        let a = signed_area(&v);
        if a == T::zero() || !a.is_finite() {
            return Err(Error::InvalidParameter("polygon has zero area".into()));
        }
        if a < T::zero() {
            v.reverse();
        }
        Ok(Self { vertices: v })
    }

    /// Axis-aligned square `[cx - r, cx + r] x [cy - r, cy + r]`.
    pub fn square(center: Point<T>, r: T) -> Self {
        Self::rect([center[0] - r, center[1] - r], [center[0] + r, center[1] + r])
    }

    pub fn rect(lo: Point<T>, hi: Point<T>) -> Self {
        Self {
            vertices: vec![lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]],
        }
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn area(&self) -> T {
        signed_area(&self.vertices)
    }

    /// Area centroid.
    pub fn centroid(&self) -> Point<T> {
        let n = self.vertices.len();
        let o = self.vertices[0];
        let (mut cx, mut cy, mut a2) = (T::zero(), T::zero(), T::zero());
        for i in 1..n - 1 {
            let (p, q) = (self.vertices[i], self.vertices[i + 1]);
            let w = cross(&o, &p, &q);
            cx = cx + w * (o[0] + p[0] + q[0]);
            cy = cy + w * (o[1] + p[1] + q[1]);
            a2 = a2 + w;
        }
        let three = T::lit(3.0);
        if a2 == T::zero() {
            return o;
        }
        [cx / (three * a2), cy / (three * a2)]
    }

    /// Point `(1 - lambda) * centroid + lambda * sum_i w_i v_i` with
    /// normalized nonnegative weights; interior for `lambda < 1`.
    pub fn interior_point(&self, weights: &[T], lambda: T) -> Point<T> {
        let c = self.centroid();
        let total: T = weights.iter().copied().sum();
        let (mut x, mut y) = (T::zero(), T::zero());
        for (v, &w) in self.vertices.iter().zip(weights) {
            x = x + v[0] * w / total;
            y = y + v[1] * w / total;
        }
        [
            (T::one() - lambda) * c[0] + lambda * x,
            (T::one() - lambda) * c[1] + lambda * y,
        ]
    }

    /// Lexicographically smallest vertex.
    pub fn min_vertex(&self) -> Point<T> {
        *self
            .vertices
            .iter()
            .min_by(|a, b| {
                a[0].as_f64()
                    .total_cmp(&b[0].as_f64())
                    .then(a[1].as_f64().total_cmp(&b[1].as_f64()))
            })
            .expect("polygon has vertices")
    }

    pub fn bbox(&self) -> (Point<T>, Point<T>) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = [lo[0].min(v[0]), lo[1].min(v[1])];
            hi = [hi[0].max(v[0]), hi[1].max(v[1])];
        }
        (lo, hi)
    }

    /// Closed containment with slack `tol` along edge normals.
    pub fn contains(&self, p: &Point<T>, tol: T) -> bool {
        let n = self.vertices.len();
        (0..n).all(|i| {
            let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
            let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
            cross(&a, &b, p) >= -tol * len
        })
    }

    /// Consecutive vertex pairs.
    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Image under `t -> M t + o`. The orientation is restored if `M` flips it.
    pub fn map_affine(&self, m: [[T; 2]; 2], o: Point<T>) -> Result<Self> {
        let pts = self
            .vertices
            .iter()
            .map(|v| {
                [
                    m[0][0] * v[0] + m[0][1] * v[1] + o[0],
                    m[1][0] * v[0] + m[1][1] * v[1] + o[1],
                ]
            })
            .collect();
        Self::new(pts)
    }

    /// Cuts with the line `f = 0`. Vertices within signed distance `snap`
    /// of the line are treated as lying on it, so a line that only grazes
    /// the boundary does not split.
    pub fn split(&self, f: &LineFn<T>, snap: T) -> Split<T> {
        let norm = f.grad_norm();
        if norm == T::zero() {
            return if f.constant <= T::zero() {
                Split::Negative
            } else {
                Split::Positive
            };
        }
        let dist: Vec<T> = self
            .vertices
            .iter()
            .map(|v| {
                let d = f.eval(v) / norm;
                if d.abs() <= snap {
                    T::zero()
                } else {
                    d
                }
            })
            .collect();
        let any_neg = dist.iter().any(|&d| d < T::zero());
        let any_pos = dist.iter().any(|&d| d > T::zero());
        if !any_pos {
            return Split::Negative;
        }
        if !any_neg {
            return Split::Positive;
        }
        let n = self.vertices.len();
        let mut neg = Vec::with_capacity(n + 2);
        let mut pos = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (self.vertices[i], self.vertices[j]);
            let (dp, dq) = (dist[i], dist[j]);
            if dp <= T::zero() {
                neg.push(p);
            }
            if dp >= T::zero() {
                pos.push(p);
            }
            if (dp < T::zero() && dq > T::zero()) || (dp > T::zero() && dq < T::zero()) {
                let s = dp / (dp - dq);
                let x = [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])];
                neg.push(x);
                pos.push(x);
            }
        }
        let tol = T::lit(1e-12);
        match (
            Self::from_ccw(dedup(neg, tol)),
            Self::from_ccw(dedup(pos, tol)),
        ) {
            (Some(a), Some(b)) => Split::Both(a, b),
            // Numerically a sliver on one side: keep the polygon whole.
            (Some(_), None) => Split::Negative,
            (None, Some(_)) => Split::Positive,
            (None, None) => Split::Negative,
        }
    }

    fn from_ccw(v: Vec<Point<T>>) -> Option<Self> {
        if v.len() < 3 {
            return None;
        }
        let a = signed_area(&v);
        if a > T::zero() {
            Some(Self { vertices: v })
        } else {
            None
        }
    }

    /// Part of the polygon on `f <= 0`, if it has positive area.
    pub fn clip(&self, f: &LineFn<T>, snap: T) -> Option<Self> {
        match self.split(f, snap) {
            Split::Negative => Some(self.clone()),
            Split::Positive => None,
            Split::Both(neg, _) => Some(neg),
        }
    }

    /// Intersection with another convex polygon.
    pub fn intersect(&self, other: &ConvexPolygon<T>) -> Option<Self> {
        let mut cur = self.clone();
        for (a, b) in other.edges() {
            // interior of a CCW polygon is to the left: cross(a, b, p) >= 0
            let f = LineFn::new([b[1] - a[1], a[0] - b[0]], -((b[1] - a[1]) * a[0] + (a[0] - b[0]) * a[1]));
            cur = cur.clip(&f, T::zero())?;
        }
        Some(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_area_and_centroid() {
        let sq = ConvexPolygon::<f64>::square([1.0, -2.0], 0.5);
        assert!((sq.area() - 1.0).abs() < 1e-15);
        let c = sq.centroid();
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] + 2.0).abs() < 1e-15);
        assert_eq!(sq.min_vertex(), [0.5, -2.5]);
    }

    #[test]
    fn orientation_is_normalized() {
        let p = ConvexPolygon::<f64>::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(p.area() > 0.0);
        assert!(ConvexPolygon::<f64>::new(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_err());
        assert!(ConvexPolygon::<f64>::new(vec![[0.0, 0.0], [1.0, 1.0]]).is_err());
    }

    #[test]
    fn split_through_middle() {
        let sq = ConvexPolygon::<f64>::square([0.0, 0.0], 1.0);
        let f = LineFn::new([1.0, 0.0], -0.25);
        match sq.split(&f, 1e-10) {
            Split::Both(neg, pos) => {
                assert!((neg.area() - 2.5).abs() < 1e-14);
                assert!((pos.area() - 1.5).abs() < 1e-14);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn grazing_lines_do_not_split() {
        let sq = ConvexPolygon::<f64>::square([0.0, 0.0], 1.0);
        // touches the right edge only
        assert_eq!(sq.split(&LineFn::new([1.0, 0.0], -1.0), 1e-10), Split::Negative);
        // touches a corner only
        assert_eq!(sq.split(&LineFn::new([1.0, 1.0], -2.0), 1e-10), Split::Negative);
        // misses
        assert_eq!(sq.split(&LineFn::new([1.0, 0.0], 3.0), 1e-10), Split::Positive);
    }

    #[test]
    fn split_through_vertices() {
        let sq = ConvexPolygon::<f64>::square([0.0, 0.0], 1.0);
        match sq.split(&LineFn::new([1.0, -1.0], 0.0), 1e-10) {
            Split::Both(a, b) => {
                assert_eq!(a.len(), 3);
                assert_eq!(b.len(), 3);
                assert!((a.area() - 2.0).abs() < 1e-14);
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn containment_and_intersection() {
        let a = ConvexPolygon::<f64>::square([0.0, 0.0], 1.0);
        let b = ConvexPolygon::<f64>::square([1.0, 1.0], 1.0);
        assert!(a.contains(&[0.5, 0.5], 0.0));
        assert!(!a.contains(&[1.5, 0.5], 0.0));
        let i = a.intersect(&b).unwrap();
        assert!((i.area() - 1.0).abs() < 1e-14);
        let far = ConvexPolygon::<f64>::square([5.0, 5.0], 1.0);
        assert!(a.intersect(&far).is_none());
    }

    #[test]
    fn interior_points_stay_inside() {
        let tri = ConvexPolygon::<f64>::new(vec![[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]).unwrap();
        let p = tri.interior_point(&[0.1, 0.7, 0.2], 0.9);
        assert!(tri.contains(&p, 0.0));
    }
}
