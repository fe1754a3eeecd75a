//! Small fixed-size geometry: vectors, axis-aligned and yaw-oriented boxes,
//! polygons, and the intersection predicates used by rendering, mapping and
//! completion checks.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2<T> {
    pub x: T,
    pub y: T,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> Vec2<T> {
    #[inline]
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Unit vector at heading `angle`.
    #[inline]
    pub fn from_angle(angle: T) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y
    }

    /// z component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> T {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> T {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> T {
        self.norm_sq().sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    #[inline]
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    #[inline]
    pub fn rotate(self, yaw: T) -> Self {
        let (s, c) = yaw.sin_cos();
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    #[inline]
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::epsilon() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    #[inline]
    pub fn with_z(self, z: T) -> Vec3<T> {
        Vec3::new(self.x, self.y, z)
    }
}

impl<T: Scalar> Vec3<T> {
    #[inline]
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    #[inline]
    pub fn splat(v: T) -> Self {
        Self::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    #[inline]
    pub fn distance(self, o: Self) -> T {
        (self - o).norm()
    }

    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::epsilon() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    #[inline]
    pub fn xy(self) -> Vec2<T> {
        Vec2::new(self.x, self.y)
    }

    #[inline]
    pub fn component_min(self) -> T {
        self.x.min(self.y).min(self.z)
    }

    #[inline]
    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    #[inline]
    pub fn zip(self, o: Self, f: impl Fn(T, T) -> T) -> Self {
        Self::new(f(self.x, o.x), f(self.y, o.y), f(self.z, o.z))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

macro_rules! impl_vec_ops {
    ($ty:ident, $($f:ident),+) => {
        impl<T: Scalar> Add for $ty<T> {
            type Output = Self;
            #[inline]
            fn add(self, o: Self) -> Self { $ty { $($f: self.$f + o.$f),+ } }
        }
        impl<T: Scalar> AddAssign for $ty<T> {
            #[inline]
            fn add_assign(&mut self, o: Self) { $(self.$f = self.$f + o.$f;)+ }
        }
        impl<T: Scalar> Sub for $ty<T> {
            type Output = Self;
            #[inline]
            fn sub(self, o: Self) -> Self { $ty { $($f: self.$f - o.$f),+ } }
        }
        impl<T: Scalar> Mul<T> for $ty<T> {
            type Output = Self;
            #[inline]
            fn mul(self, s: T) -> Self { $ty { $($f: self.$f * s),+ } }
        }
        impl<T: Scalar> Neg for $ty<T> {
            type Output = Self;
            #[inline]
            fn neg(self) -> Self { $ty { $($f: -self.$f),+ } }
        }
    };
}

impl_vec_ops!(Vec2, x, y);
impl_vec_ops!(Vec3, x, y, z);

impl<T: Serialize + Copy> Serialize for Vec2<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Vec2<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y] = <[T; 2]>::deserialize(d)?;
        Ok(Vec2 { x, y })
    }
}

impl<T: Serialize + Copy> Serialize for Vec3<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y, self.z].serialize(s)
    }
}

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Vec3<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x, y, z] = <[T; 3]>::deserialize(d)?;
        Ok(Vec3 { x, y, z })
    }
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle<T: Scalar>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r > T::PI() {
        r = r - two_pi;
    } else if r <= -T::PI() {
        r = r + two_pi;
    }
    r
}

/// Axis-aligned box given by its min and max corners.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de>"))]
pub struct Aabb3<T> {
    pub min: Vec3<T>,
    pub max: Vec3<T>,
}

impl<T: Scalar> Aabb3<T> {
    pub fn new(min: Vec3<T>, max: Vec3<T>) -> Self {
        Self { min, max }
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x.max(T::zero()) * e.y.max(T::zero()) * e.z.max(T::zero())
    }

    pub fn is_valid(&self) -> bool {
        self.min.is_finite()
            && self.max.is_finite()
            && self.min.x <= self.max.x
            && self.min.y <= self.max.y
            && self.min.z <= self.max.z
    }

    pub fn contains_point(&self, p: Vec3<T>) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn intersection(&self, o: &Self) -> Option<Self> {
        let min = self.min.zip(o.min, T::max);
        let max = self.max.zip(o.max, T::min);
        if min.x < max.x && min.y < max.y && min.z < max.z {
            Some(Self { min, max })
        } else {
            None
        }
    }

    /// Volume of the intersection, zero when the boxes only touch.
    pub fn overlap_volume(&self, o: &Self) -> T {
        self.intersection(o).map(|b| b.volume()).unwrap_or_else(T::zero)
    }

    pub fn footprint(&self) -> [Vec2<T>; 4] {
        [
            Vec2::new(self.min.x, self.min.y),
            Vec2::new(self.max.x, self.min.y),
            Vec2::new(self.max.x, self.max.y),
            Vec2::new(self.min.x, self.max.y),
        ]
    }
}

/// Box with a yaw rotation about its vertical axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize + Copy", deserialize = "T: Deserialize<'de>"))]
pub struct OrientedBox<T> {
    pub center: Vec3<T>,
    pub half_extents: Vec3<T>,
    pub yaw: T,
}

impl<T: Scalar> OrientedBox<T> {
    pub fn new(center: Vec3<T>, half_extents: Vec3<T>, yaw: T) -> Self {
        Self { center, half_extents, yaw }
    }

    pub fn from_aabb(b: &Aabb3<T>) -> Self {
        Self::new(b.center(), b.extent() * T::lit(0.5), T::zero())
    }

    pub fn z_range(&self) -> (T, T) {
        (self.center.z - self.half_extents.z, self.center.z + self.half_extents.z)
    }

    /// Transform a world point into the box frame (origin at the center,
    /// axes aligned with the half extents).
    #[inline]
    pub fn to_local(&self, p: Vec3<T>) -> Vec3<T> {
        let d = (p - self.center).xy().rotate(-self.yaw);
        Vec3::new(d.x, d.y, p.z - self.center.z)
    }

    pub fn contains_point(&self, p: Vec3<T>) -> bool {
        let l = self.to_local(p);
        let h = self.half_extents;
        l.x.abs() <= h.x && l.y.abs() <= h.y && l.z.abs() <= h.z
    }

    pub fn contains_point_2d(&self, p: Vec2<T>) -> bool {
        let l = (p - self.center.xy()).rotate(-self.yaw);
        l.x.abs() <= self.half_extents.x && l.y.abs() <= self.half_extents.y
    }

    /// Footprint corners, counter-clockwise.
    pub fn footprint(&self) -> [Vec2<T>; 4] {
        let c = self.center.xy();
        let h = self.half_extents;
        [
            c + Vec2::new(-h.x, -h.y).rotate(self.yaw),
            c + Vec2::new(h.x, -h.y).rotate(self.yaw),
            c + Vec2::new(h.x, h.y).rotate(self.yaw),
            c + Vec2::new(-h.x, h.y).rotate(self.yaw),
        ]
    }

    /// Tight axis-aligned bound.
    pub fn aabb(&self) -> Aabb3<T> {
        let fp = self.footprint();
        let mut min = fp[0];
        let mut max = fp[0];
        for p in &fp[1..] {
            min = Vec2::new(min.x.min(p.x), min.y.min(p.y));
            max = Vec2::new(max.x.max(p.x), max.y.max(p.y));
        }
        let (z0, z1) = self.z_range();
        Aabb3::new(min.with_z(z0), max.with_z(z1))
    }

    pub fn volume(&self) -> T {
        let h = self.half_extents;
        T::lit(8.0) * h.x * h.y * h.z
    }

    /// Whether the closed segment `a -> b` touches the box (slab test in the
    /// box frame).
    pub fn intersects_segment(&self, a: Vec3<T>, b: Vec3<T>) -> bool {
        let la = self.to_local(a);
        let lb = self.to_local(b);
        let d = lb - la;
        let h = self.half_extents;
        let mut t0 = T::zero();
        let mut t1 = T::one();
        for (o, dir, half) in [(la.x, d.x, h.x), (la.y, d.y, h.y), (la.z, d.z, h.z)] {
            if dir.abs() <= T::epsilon() {
                if o < -half || o > half {
                    return false;
                }
            } else {
                let inv = T::one() / dir;
                let mut ta = (-half - o) * inv;
                let mut tb = (half - o) * inv;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return false;
                }
            }
        }
        true
    }

    /// Parameter of the first entry of the ray `origin + t*dir` into the
    /// box footprint (2D), if any, with `t >= 0`.
    pub fn ray_entry_2d(&self, origin: Vec2<T>, dir: Vec2<T>) -> Option<T> {
        let lo = (origin - self.center.xy()).rotate(-self.yaw);
        let ld = dir.rotate(-self.yaw);
        let h = self.half_extents;
        let mut t0 = T::zero();
        let mut t1 = T::infinity();
        for (o, d, half) in [(lo.x, ld.x, h.x), (lo.y, ld.y, h.y)] {
            if d.abs() <= T::epsilon() {
                if o < -half || o > half {
                    return None;
                }
            } else {
                let inv = T::one() / d;
                let mut ta = (-half - o) * inv;
                let mut tb = (half - o) * inv;
                if ta > tb {
                    std::mem::swap(&mut ta, &mut tb);
                }
                t0 = t0.max(ta);
                t1 = t1.min(tb);
                if t0 > t1 {
                    return None;
                }
            }
        }
        Some(t0)
    }
}

/// Axis-aligned rectangle in the plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub min: Vec2<T>,
    pub max: Vec2<T>,
}

impl<T: Scalar> Rect<T> {
    pub fn new(min: Vec2<T>, max: Vec2<T>) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> T {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> T {
        self.max.y - self.min.y
    }

    pub fn area(&self) -> T {
        self.width().max(T::zero()) * self.height().max(T::zero())
    }

    pub fn center(&self) -> Vec2<T> {
        (self.min + self.max) * T::lit(0.5)
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn shrink(&self, d: T) -> Self {
        Self::new(self.min + Vec2::new(d, d), self.max - Vec2::new(d, d))
    }

    pub fn overlap_area(&self, o: &Self) -> T {
        let w = self.max.x.min(o.max.x) - self.min.x.max(o.min.x);
        let h = self.max.y.min(o.max.y) - self.min.y.max(o.min.y);
        if w > T::zero() && h > T::zero() {
            w * h
        } else {
            T::zero()
        }
    }

    pub fn corners(&self) -> Vec<Vec2<T>> {
        vec![
            self.min,
            Vec2::new(self.max.x, self.min.y),
            self.max,
            Vec2::new(self.min.x, self.max.y),
        ]
    }

    pub fn bounding(points: &[Vec2<T>]) -> Option<Self> {
        let first = *points.first()?;
        let mut r = Self::new(first, first);
        for p in points {
            r.min = Vec2::new(r.min.x.min(p.x), r.min.y.min(p.y));
            r.max = Vec2::new(r.max.x.max(p.x), r.max.y.max(p.y));
        }
        Some(r)
    }
}

pub fn polygon_area<T: Scalar>(poly: &[Vec2<T>]) -> T {
    let n = poly.len();
    if n < 3 {
        return T::zero();
    }
    let mut acc = T::zero();
    for i in 0..n {
        acc = acc + poly[i].cross(poly[(i + 1) % n]);
    }
    acc * T::lit(0.5)
}

/// Even-odd point-in-polygon test; boundary points count as inside.
pub fn point_in_polygon<T: Scalar>(p: Vec2<T>, poly: &[Vec2<T>]) -> bool {
    let n = poly.len();
    if n < 3 {
        return false;
    }
    if distance_to_polygon_boundary(p, poly) <= T::lit(1e-12) {
        return true;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn distance_point_segment<T: Scalar>(p: Vec2<T>, a: Vec2<T>, b: Vec2<T>) -> T {
    let ab = b - a;
    let len2 = ab.norm_sq();
    if len2 <= T::zero() {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).max(T::zero()).min(T::one());
    p.distance(a + ab * t)
}

pub fn distance_to_polygon_boundary<T: Scalar>(p: Vec2<T>, poly: &[Vec2<T>]) -> T {
    let n = poly.len();
    (0..n)
        .map(|i| distance_point_segment(p, poly[i], poly[(i + 1) % n]))
        .fold(T::infinity(), T::min)
}

/// Whether `p` lies in the polygon grown outward by `margin`.
pub fn point_in_expanded_polygon<T: Scalar>(p: Vec2<T>, poly: &[Vec2<T>], margin: T) -> bool {
    point_in_polygon(p, poly) || distance_to_polygon_boundary(p, poly) <= margin
}

/// Closed segment intersection test.
pub fn segments_intersect<T: Scalar>(a: Vec2<T>, b: Vec2<T>, c: Vec2<T>, d: Vec2<T>) -> bool {
    let eps = T::lit(1e-12);
    let o1 = (b - a).cross(c - a);
    let o2 = (b - a).cross(d - a);
    let o3 = (d - c).cross(a - c);
    let o4 = (d - c).cross(b - c);
    let on_seg = |p: Vec2<T>, q: Vec2<T>, r: Vec2<T>| {
        r.x >= p.x.min(q.x) - eps
            && r.x <= p.x.max(q.x) + eps
            && r.y >= p.y.min(q.y) - eps
            && r.y <= p.y.max(q.y) + eps
    };
    if ((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps))
        && ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps))
    {
        return true;
    }
    (o1.abs() <= eps && on_seg(a, b, c))
        || (o2.abs() <= eps && on_seg(a, b, d))
        || (o3.abs() <= eps && on_seg(c, d, a))
        || (o4.abs() <= eps && on_seg(c, d, b))
}

/// Simple-polygon check: at least three vertices, non-zero area, and no two
/// non-adjacent edges touching.
pub fn polygon_is_simple<T: Scalar>(poly: &[Vec2<T>]) -> bool {
    let n = poly.len();
    if n < 3 || polygon_area(poly).abs() <= T::lit(1e-12) {
        return false;
    }
    if poly.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
        return false;
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                continue;
            }
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segments_intersect(a, b, c, d) {
                return false;
            }
        }
    }
    true
}

/// Separating-axis overlap test for two convex polygons (closed).
pub fn convex_polygons_intersect<T: Scalar>(a: &[Vec2<T>], b: &[Vec2<T>]) -> bool {
    for poly in [a, b] {
        let n = poly.len();
        for i in 0..n {
            let axis = (poly[(i + 1) % n] - poly[i]).perp();
            let proj = |ps: &[Vec2<T>]| {
                ps.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), p| {
                    let v = p.dot(axis);
                    (lo.min(v), hi.max(v))
                })
            };
            let (a0, a1) = proj(a);
            let (b0, b1) = proj(b);
            if a1 < b0 || b1 < a0 {
                return false;
            }
        }
    }
    true
}

/// Circular sector: apex, radius, heading and half opening angle. A half
/// angle of at least pi describes the full disc.
#[derive(Clone, Copy, Debug)]
pub struct Sector<T> {
    pub apex: Vec2<T>,
    pub radius: T,
    pub heading: T,
    pub half_angle: T,
}

impl<T: Scalar> Sector<T> {
    pub fn new(apex: Vec2<T>, radius: T, heading: T, fov: T) -> Self {
        Self { apex, radius, heading, half_angle: fov * T::lit(0.5) }
    }

    pub fn is_full(&self) -> bool {
        self.half_angle >= T::PI()
    }

    fn angle_ok(&self, p: Vec2<T>) -> bool {
        if self.is_full() {
            return true;
        }
        let d = p - self.apex;
        if d.norm_sq() <= T::zero() {
            return true;
        }
        wrap_angle(d.angle() - self.heading).abs() <= self.half_angle
    }

    pub fn contains(&self, p: Vec2<T>) -> bool {
        p.distance(self.apex) <= self.radius && self.angle_ok(p)
    }

    /// Exact overlap test against a closed convex polygon.
    pub fn intersects_polygon(&self, poly: &[Vec2<T>]) -> bool {
        if self.is_full() {
            return point_in_polygon(self.apex, poly)
                || distance_to_polygon_boundary(self.apex, poly) <= self.radius;
        }
        if poly.iter().any(|&v| self.contains(v)) || point_in_polygon(self.apex, poly) {
            return true;
        }
        let n = poly.len();
        let edges: Vec<_> = (0..n).map(|i| (poly[i], poly[(i + 1) % n])).collect();
        for side in [-T::one(), T::one()] {
            let end = self.apex + Vec2::from_angle(self.heading + side * self.half_angle) * self.radius;
            if edges.iter().any(|&(a, b)| segments_intersect(self.apex, end, a, b)) {
                return true;
            }
        }
        // Arc against each edge: solve |a + t (b - a) - apex| = r.
        for &(a, b) in &edges {
            let d = b - a;
            let f = a - self.apex;
            let qa = d.dot(d);
            if qa <= T::zero() {
                continue;
            }
            let qb = T::lit(2.0) * f.dot(d);
            let qc = f.dot(f) - self.radius * self.radius;
            let disc = qb * qb - T::lit(4.0) * qa * qc;
            if disc < T::zero() {
                continue;
            }
            let s = disc.sqrt();
            for t in [(-qb - s) / (T::lit(2.0) * qa), (-qb + s) / (T::lit(2.0) * qa)] {
                if t >= T::zero() && t <= T::one() && self.angle_ok(a + d * t) {
                    return true;
                }
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type V2 = Vec2<f64>;
    type V3 = Vec3<f64>;

    #[test]
    fn segment_box_slab() {
        let b = OrientedBox::new(V3::new(2.0, 0.0, 1.0), V3::new(0.05, 1.0, 1.0), 0.0);
        assert!(b.intersects_segment(V3::new(0.0, 0.0, 1.0), V3::new(4.0, 0.0, 1.0)));
        assert!(!b.intersects_segment(V3::new(0.0, 0.0, 1.0), V3::new(1.9, 0.0, 1.0)));
        assert!(!b.intersects_segment(V3::new(0.0, 2.0, 1.0), V3::new(4.0, 2.0, 1.0)));
        let r = OrientedBox::new(V3::new(0.0, 0.0, 0.5), V3::new(1.0, 0.1, 0.5), std::f64::consts::FRAC_PI_2);
        assert!(r.contains_point(V3::new(0.05, 0.9, 0.5)));
        assert!(!r.contains_point(V3::new(0.9, 0.05, 0.5)));
    }

    #[test]
    fn polygon_predicates() {
        let sq = vec![V2::new(0.0, 0.0), V2::new(2.0, 0.0), V2::new(2.0, 2.0), V2::new(0.0, 2.0)];
        assert!(polygon_is_simple(&sq));
        assert!(point_in_polygon(V2::new(1.0, 1.0), &sq));
        assert!(point_in_polygon(V2::new(2.0, 1.0), &sq));
        assert!(!point_in_polygon(V2::new(2.1, 1.0), &sq));
        assert!(point_in_expanded_polygon(V2::new(2.2, 1.0), &sq, 0.25));
        let bow = vec![V2::new(0.0, 0.0), V2::new(2.0, 2.0), V2::new(2.0, 0.0), V2::new(0.0, 2.0)];
        assert!(!polygon_is_simple(&bow));
    }

    #[test]
    fn sector_overlap() {
        let sq = [V2::new(2.0, -0.5), V2::new(3.0, -0.5), V2::new(3.0, 0.5), V2::new(2.0, 0.5)];
        let ahead = Sector::new(V2::zero(), 5.0, 0.0, std::f64::consts::FRAC_PI_2);
        assert!(ahead.intersects_polygon(&sq));
        let behind = Sector::new(V2::zero(), 5.0, std::f64::consts::PI, std::f64::consts::FRAC_PI_2);
        assert!(!behind.intersects_polygon(&sq));
        let short = Sector::new(V2::zero(), 1.9, 0.0, std::f64::consts::FRAC_PI_2);
        assert!(!short.intersects_polygon(&sq));
        // Box straddling the wedge edge with no vertex inside: hit via the arc.
        let wide = [V2::new(3.9, -3.0), V2::new(4.1, -3.0), V2::new(4.1, 3.0), V2::new(3.9, 3.0)];
        let narrow = Sector::new(V2::zero(), 4.0, 0.0, 0.2);
        assert!(narrow.intersects_polygon(&wide));
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * std::f64::consts::PI) - std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(-0.5f64) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn generic_over_f32() {
        let b = OrientedBox::new(Vec3::<f32>::new(1.0, 0.0, 0.0), Vec3::splat(0.5), 0.3);
        assert!(b.contains_point(Vec3::new(1.0, 0.1, 0.0)));
        assert!((b.volume() - 1.0f32).abs() < 1e-6);
    }
}
