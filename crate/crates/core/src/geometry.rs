//! Planar primitives: polylines, disks, argument increments, winding
//! integrals, circle clipping and the hyperbolic pseudo-distance.
//!
//! Points are `Complex64`. All tolerances derive from one scale-relative
//! knob, [`Tolerance`], applied to the bounding-box diameter of the curve
//! under consideration.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::f64::consts::PI;

use crate::error::{LabError, Result};

pub type Point = Complex64;

/// Relative geometric tolerance. `eps_geom = rel * bbox diameter`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { rel: 1e-12 }
    }
}

impl Tolerance {
    pub fn eps_for(&self, diameter: f64) -> f64 {
        self.rel * diameter.max(f64::MIN_POSITIVE)
    }
}

#[inline]
pub fn cross(a: Point, b: Point) -> f64 {
    a.re * b.im - a.im * b.re
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Signed angle from `a - pole` to `b - pole`, in (-pi, pi].
#[inline]
pub fn angle_increment(a: Point, b: Point, pole: Point) -> f64 {
    let u = a - pole;
    let v = b - pole;
    cross(u, v).atan2(dot(u, v))
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(x: f64) -> f64 {
    let mut y = x % (2.0 * PI);
    if y <= -PI {
        y += 2.0 * PI;
    } else if y > PI {
        y -= 2.0 * PI;
    }
    y
}

/// Squared distance from `p` to segment `[a, b]` and the closest parameter.
#[inline]
pub fn segment_distance_sq(p: Point, a: Point, b: Point) -> (f64, f64) {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        (dot(p - a, d) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = a + d * t;
    ((p - q).norm_sqr(), t)
}

/// Closed disk `B(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: Point,
    pub radius: f64,
}

impl Disk {
    pub fn new(center: Point, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !is_finite(center) {
            return Err(LabError::InvalidParameter(format!(
                "disk radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Disk { center, radius })
    }

    /// Concentric disk scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Disk {
        Disk {
            center: self.center,
            radius: self.radius * factor,
        }
    }

    pub fn contains(&self, p: Point) -> bool {
        (p - self.center).norm() < self.radius
    }

    pub fn point_at_angle(&self, angle: f64) -> Point {
        self.center + Complex64::from_polar(self.radius, angle)
    }
}

pub fn is_finite(p: Point) -> bool {
    p.re.is_finite() && p.im.is_finite()
}

/// Position on a polyline: segment index plus parameter in [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyPos {
    pub seg: usize,
    pub t: f64,
}

impl PolyPos {
    pub fn new(seg: usize, t: f64) -> Self {
        PolyPos { seg, t }
    }

    /// Linear key `seg + t` used for ordering along the curve.
    pub fn key(&self) -> f64 {
        self.seg as f64 + self.t
    }
}

impl PartialOrd for PolyPos {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(
            self.seg
                .cmp(&other.seg)
                .then(self.t.partial_cmp(&other.t).unwrap_or(Ordering::Equal)),
        )
    }
}

/// Ordered vertex list, open or closed. A closed polyline does not repeat
/// its first vertex; the closing segment is implicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    vertices: Vec<Point>,
    closed: bool,
}

impl Polyline {
    pub fn new(mut vertices: Vec<Point>, closed: bool) -> Result<Self> {
        if closed && vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let min = if closed { 3 } else { 2 };
        if vertices.len() < min {
            return Err(LabError::InvalidPolyline(format!(
                "need at least {min} vertices, got {}",
                vertices.len()
            )));
        }
        if let Some(i) = vertices.iter().position(|v| !is_finite(*v)) {
            return Err(LabError::InvalidPolyline(format!("vertex {i} is not finite")));
        }
        let n = vertices.len();
        let pairs = if closed { n } else { n - 1 };
        for i in 0..pairs {
            if vertices[i] == vertices[(i + 1) % n] {
                return Err(LabError::InvalidPolyline(format!(
                    "vertices {i} and {} coincide",
                    (i + 1) % n
                )));
            }
        }
        Ok(Polyline { vertices, closed })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        if self.closed {
            self.vertices.len()
        } else {
            self.vertices.len() - 1
        }
    }

    /// Endpoints of segment `i`.
    #[inline]
    pub fn segment(&self, i: usize) -> (Point, Point) {
        let n = self.vertices.len();
        (self.vertices[i], self.vertices[(i + 1) % n])
    }

    /// Vertex at index `i` taken cyclically for closed curves.
    #[inline]
    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % self.vertices.len()]
    }

    pub fn point_at(&self, pos: PolyPos) -> Point {
        let (a, b) = self.segment(pos.seg);
        a + (b - a) * pos.t
    }

    pub fn length(&self) -> f64 {
        (0..self.segment_count())
            .map(|i| {
                let (a, b) = self.segment(i);
                (b - a).norm()
            })
            .sum()
    }

    pub fn bbox(&self) -> (Point, Point) {
        bbox_of(&self.vertices)
    }

    pub fn bbox_diameter(&self) -> f64 {
        let (lo, hi) = self.bbox();
        (hi - lo).norm()
    }

    pub fn eps_geom(&self, tol: Tolerance) -> f64 {
        tol.eps_for(self.bbox_diameter())
    }

    /// Shoelace area; positive for counterclockwise closed curves.
    pub fn signed_area(&self) -> f64 {
        let n = self.vertices.len();
        let o = self.vertices[0];
        let mut s = 0.0;
        for i in 0..n {
            s += cross(self.vertices[i] - o, self.vertices[(i + 1) % n] - o);
        }
        0.5 * s
    }

    pub fn reversed(&self) -> Polyline {
        let mut v = self.vertices.clone();
        v.reverse();
        Polyline {
            vertices: v,
            closed: self.closed,
        }
    }

    pub fn conj(&self) -> Polyline {
        Polyline {
            vertices: self.vertices.iter().map(|v| v.conj()).collect(),
            closed: self.closed,
        }
    }

    /// Concatenates `other` after `self`, dropping a duplicated junction vertex.
    pub fn concat(&self, other: &Polyline) -> Result<Polyline> {
        let mut v = self.vertices.clone();
        let skip = usize::from(v.last() == other.vertices.first());
        v.extend_from_slice(&other.vertices[skip..]);
        Polyline::new(v, false)
    }

    /// Diameter of the vertex set (exact for polylines).
    pub fn diameter(&self) -> f64 {
        diameter(&self.vertices)
    }

    /// Open sub-polyline between two positions taken forward along the curve.
    pub fn sub_arc(&self, from: PolyPos, to: PolyPos) -> Result<Polyline> {
        Polyline::new(self.sub_arc_points(from, to), false)
    }

    /// Points of the forward sub-arc from `from` to `to` (wrapping if closed).
    pub fn sub_arc_points(&self, from: PolyPos, to: PolyPos) -> Vec<Point> {
        let n = self.vertices.len();
        let mut out = vec![self.point_at(from)];
        let forward = from <= to;
        if !forward && !self.closed {
            return out;
        }
        let mut seg = from.seg;
        if forward && seg == to.seg {
            out.push(self.point_at(to));
            dedup(&mut out);
            return out;
        }
        loop {
            seg = (seg + 1) % n.max(1);
            out.push(self.vertices[seg]);
            if seg == to.seg {
                break;
            }
        }
        out.push(self.point_at(to));
        dedup(&mut out);
        out
    }

    /// Midpoint by arclength.
    pub fn arclength_midpoint(&self) -> Point {
        let half = 0.5 * self.length();
        let mut acc = 0.0;
        for i in 0..self.segment_count() {
            let (a, b) = self.segment(i);
            let l = (b - a).norm();
            if acc + l >= half {
                let t = if l > 0.0 { (half - acc) / l } else { 0.0 };
                return a + (b - a) * t;
            }
            acc += l;
        }
        *self.vertices.last().unwrap()
    }

    /// Checks simplicity up to `eps`. Returns the first offending pair.
    pub fn find_self_intersection(&self, eps: f64) -> Option<(usize, usize)> {
        let index = crate::spatial::SegmentIndex::build(self);
        let m = self.segment_count();
        let mut cand = Vec::new();
        for i in 0..m {
            let (a, b) = self.segment(i);
            let lo = Complex64::new(a.re.min(b.re) - eps, a.im.min(b.im) - eps);
            let hi = Complex64::new(a.re.max(b.re) + eps, a.im.max(b.im) + eps);
            cand.clear();
            index.query_box(lo, hi, &mut cand);
            for &j in &cand {
                if j <= i {
                    continue;
                }
                let adjacent = j == i + 1 || (self.closed && i == 0 && j == m - 1);
                let (c, d) = self.segment(j);
                if adjacent {
                    // Shared vertex: only a fold back onto the previous segment counts.
                    let (p, q, r) = if j == i + 1 { (a, b, d) } else { (c, a, b) };
                    let u = q - p;
                    let v = r - q;
                    if cross(u, v).abs() <= eps * (u.norm() + v.norm()) && dot(u, v) < 0.0 {
                        return Some((i, j));
                    }
                    continue;
                }
                if segments_touch(a, b, c, d, eps) {
                    return Some((i, j));
                }
            }
        }
        None
    }

    pub fn is_simple(&self, eps: f64) -> bool {
        self.find_self_intersection(eps).is_none()
    }
}

fn dedup(points: &mut Vec<Point>) {
    points.dedup();
}

pub fn bbox_of(points: &[Point]) -> (Point, Point) {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo.re = lo.re.min(p.re);
        lo.im = lo.im.min(p.im);
        hi.re = hi.re.max(p.re);
        hi.im = hi.im.max(p.im);
    }
    (lo, hi)
}

/// True if closed segments `[a,b]` and `[c,d]` come within `eps` of each other.
pub fn segments_touch(a: Point, b: Point, c: Point, d: Point, eps: f64) -> bool {
    let o1 = cross(b - a, c - a);
    let o2 = cross(b - a, d - a);
    let o3 = cross(d - c, a - c);
    let o4 = cross(d - c, b - c);
    if ((o1 > 0.0 && o2 < 0.0) || (o1 < 0.0 && o2 > 0.0))
        && ((o3 > 0.0 && o4 < 0.0) || (o3 < 0.0 && o4 > 0.0))
    {
        return true;
    }
    let e2 = eps * eps;
    segment_distance_sq(c, a, b).0 <= e2
        || segment_distance_sq(d, a, b).0 <= e2
        || segment_distance_sq(a, c, d).0 <= e2
        || segment_distance_sq(b, c, d).0 <= e2
}

/// `Im ∫ dξ/(ξ - pole)` along `path`, summed from per-segment increments.
/// Closed paths include the closing segment.
pub fn winding_integral(path: &Polyline, pole: Point) -> Result<f64> {
    winding_integral_tol(path, pole, Tolerance::default())
}

pub fn winding_integral_tol(path: &Polyline, pole: Point, tol: Tolerance) -> Result<f64> {
    let eps = path.eps_geom(tol).max(tol.eps_for((pole).norm()));
    let mut total = 0.0;
    let mut min_d2 = f64::INFINITY;
    for i in 0..path.segment_count() {
        let (a, b) = path.segment(i);
        min_d2 = min_d2.min(segment_distance_sq(pole, a, b).0);
        total += angle_increment(a, b, pole);
    }
    if min_d2.sqrt() <= eps {
        return Err(LabError::PoleOnPath {
            distance: min_d2.sqrt(),
        });
    }
    Ok(total)
}

/// A path together with its pole and continuously tracked argument change.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PathArgument {
    pub path: Polyline,
    pub pole: Point,
    pub total_imag: f64,
}

impl PathArgument {
    pub fn new(path: Polyline, pole: Point) -> Result<Self> {
        let total_imag = winding_integral(&path, pole)?;
        Ok(PathArgument {
            path,
            pole,
            total_imag,
        })
    }
}

/// `|(z - w) / (1 - conj(z) w)|` for points of the open unit disk.
pub fn hyperbolic_rho(z: Point, w: Point) -> Result<f64> {
    for p in [z, w] {
        if !(p.norm() < 1.0) {
            return Err(LabError::OutsideDisk { re: p.re, im: p.im });
        }
    }
    Ok(((z - w) / (Complex64::new(1.0, 0.0) - z.conj() * w)).norm())
}

/// One intersection of a circle with a polyline segment.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircleCrossing {
    pub point: Point,
    pub pos: PolyPos,
    /// True when the curve passes from outside to inside the open disk.
    pub entering: bool,
    /// Tangential contact within tolerance; not a transversal crossing.
    pub degenerate: bool,
}

/// Intersections of segment `seg` with the circle. Vertices within `eps` of
/// the circle are classified as outside, which perturbs tangencies outward.
pub fn circle_segment_crossings(
    a: Point,
    b: Point,
    seg: usize,
    circle: &Disk,
    eps: f64,
    out: &mut Vec<CircleCrossing>,
) {
    let c = circle.center;
    let r = circle.radius;
    let inside_a = (a - c).norm() < r - eps;
    let inside_b = (b - c).norm() < r - eps;
    let d = b - a;
    let f = a - c;
    let qa = d.norm_sqr();
    let qb = 2.0 * dot(f, d);
    let qc = f.norm_sqr() - r * r;
    let disc = qb * qb - 4.0 * qa * qc;
    let root = |s: f64| -> Option<f64> {
        if qa == 0.0 {
            return None;
        }
        let sq = disc.max(0.0).sqrt();
        // Numerically stable pair of roots.
        let q = -0.5 * (qb + qb.signum() * sq);
        let (t1, t2) = if q != 0.0 { (q / qa, qc / q) } else { (0.0, 0.0) };
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        Some(if s < 0.0 { lo } else { hi })
    };
    match (inside_a, inside_b) {
        (false, true) => {
            let t = root(-1.0).unwrap_or(0.0).clamp(0.0, 1.0);
            out.push(CircleCrossing {
                point: a + d * t,
                pos: PolyPos::new(seg, t),
                entering: true,
                degenerate: false,
            });
        }
        (true, false) => {
            let t = root(1.0).unwrap_or(1.0).clamp(0.0, 1.0);
            out.push(CircleCrossing {
                point: a + d * t,
                pos: PolyPos::new(seg, t),
                entering: false,
                degenerate: false,
            });
        }
        (true, true) => {}
        (false, false) => {
            // Both ends outside: the segment may dip into the disk.
            let (dist2, tm) = segment_distance_sq(c, a, b);
            let dist = dist2.sqrt();
            if dist < r - eps && tm > 0.0 && tm < 1.0 {
                let t1 = root(-1.0).unwrap_or(tm).clamp(0.0, tm);
                let t2 = root(1.0).unwrap_or(tm).clamp(tm, 1.0);
                out.push(CircleCrossing {
                    point: a + d * t1,
                    pos: PolyPos::new(seg, t1),
                    entering: true,
                    degenerate: false,
                });
                out.push(CircleCrossing {
                    point: a + d * t2,
                    pos: PolyPos::new(seg, t2),
                    entering: false,
                    degenerate: false,
                });
            } else if dist <= r + eps && tm > 0.0 && tm < 1.0 {
                out.push(CircleCrossing {
                    point: a + d * tm,
                    pos: PolyPos::new(seg, tm),
                    entering: false,
                    degenerate: true,
                });
            }
        }
    }
}

/// All intersections of the circle `∂B` with `curve`, in curve order.
pub fn circle_polyline_intersections(circle: &Disk, curve: &Polyline) -> Vec<CircleCrossing> {
    let eps = curve.eps_geom(Tolerance::default());
    let mut out = Vec::new();
    for i in 0..curve.segment_count() {
        let (a, b) = curve.segment(i);
        circle_segment_crossings(a, b, i, circle, eps, &mut out);
    }
    out
}

/// Inside test for a closed polyline via the winding number.
/// Points within `eps_geom` of the boundary yield [`LabError::Boundary`].
pub fn point_in_jordan(boundary: &Polyline, z: Point) -> Result<bool> {
    if !boundary.is_closed() {
        return Err(LabError::InvalidPolyline("boundary must be closed".into()));
    }
    match winding_integral(boundary, z) {
        Ok(w) => Ok(w.abs() > PI),
        Err(LabError::PoleOnPath { .. }) => Err(LabError::Boundary),
        Err(e) => Err(e),
    }
}

/// Convex hull (counterclockwise, no collinear points).
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(Ordering::Equal))
    });
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 {
                let q = hull[hull.len() - 1];
                let o = hull[hull.len() - 2];
                if cross(q - o, p - o) <= 0.0 {
                    hull.pop();
                } else {
                    break;
                }
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Diameter of a finite point set.
pub fn diameter(points: &[Point]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let hull = convex_hull(points);
    let h = hull.len();
    if h < 2 {
        return 0.0;
    }
    if h <= 3 {
        let mut best: f64 = 0.0;
        for i in 0..h {
            for j in i + 1..h {
                best = best.max((hull[i] - hull[j]).norm());
            }
        }
        return best;
    }
    // Rotating calipers over antipodal pairs.
    let mut best: f64 = 0.0;
    let mut j = 1;
    for i in 0..h {
        let a = hull[i];
        let b = hull[(i + 1) % h];
        while cross(b - a, hull[(j + 1) % h] - a).abs() > cross(b - a, hull[j] - a).abs() {
            j = (j + 1) % h;
        }
        best = best.max((a - hull[j]).norm()).max((b - hull[j]).norm());
    }
    best
}
