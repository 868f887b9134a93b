//! Logarithmic-time argument increments along a fixed polyline.
//!
//! Every node of the tree covers a contiguous run of segments and stores a
//! bounding disk. If a pole lies outside that disk, the continuous change of
//! `arg(ξ - pole)` along the run equals the principal difference of the
//! endpoint arguments, so the run is summarized by one `atan2`.

use crate::geometry::{angle_increment, Point, PolyPos, Polyline};

const LEAF: usize = 8;

#[derive(Clone, Debug)]
struct Node {
    lo: u32,
    hi: u32,
    center: Point,
    radius: f64,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug)]
pub struct WindingTree {
    nodes: Vec<Node>,
    segments: usize,
}

impl WindingTree {
    pub fn build(curve: &Polyline) -> WindingTree {
        let m = curve.segment_count();
        let mut nodes = Vec::with_capacity(2 * m / LEAF + 2);
        build_rec(curve, 0, m, &mut nodes);
        WindingTree { nodes, segments: m }
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Continuous argument change along segments `lo..hi` (no wrap).
    pub fn range_increment(&self, curve: &Polyline, lo: usize, hi: usize, pole: Point) -> f64 {
        if lo >= hi {
            return 0.0;
        }
        self.rec(0, curve, lo, hi, pole)
    }

    fn rec(&self, ni: usize, curve: &Polyline, lo: usize, hi: usize, pole: Point) -> f64 {
        let n = &self.nodes[ni];
        let (nlo, nhi) = (n.lo as usize, n.hi as usize);
        if nhi <= lo || nlo >= hi {
            return 0.0;
        }
        let full = lo <= nlo && nhi <= hi;
        if full && (n.center - pole).norm() > 1.01 * n.radius {
            return angle_increment(curve.vertex(nlo), curve.vertex(nhi), pole);
        }
        if n.left == u32::MAX {
            let mut s = 0.0;
            for i in lo.max(nlo)..hi.min(nhi) {
                let (a, b) = curve.segment(i);
                s += angle_increment(a, b, pole);
            }
            return s;
        }
        self.rec(n.left as usize, curve, lo, hi, pole) + self.rec(n.right as usize, curve, lo, hi, pole)
    }

    /// Continuous argument change travelling forward from `from` to `to`,
    /// wrapping through the closing segment on closed curves.
    pub fn arc_increment(&self, curve: &Polyline, from: PolyPos, to: PolyPos, pole: Point) -> f64 {
        let pa = curve.point_at(from);
        let pb = curve.point_at(to);
        if from.seg == to.seg && from.t <= to.t {
            return angle_increment(pa, pb, pole);
        }
        let m = self.segments;
        let mut s = angle_increment(pa, curve.vertex(from.seg + 1), pole);
        if from.seg < to.seg {
            s += self.range_increment(curve, from.seg + 1, to.seg, pole);
        } else {
            s += self.range_increment(curve, from.seg + 1, m, pole);
            s += self.range_increment(curve, 0, to.seg, pole);
        }
        s + angle_increment(curve.vertex(to.seg), pb, pole)
    }

    /// Total winding of a closed curve around `pole`.
    pub fn total(&self, curve: &Polyline, pole: Point) -> f64 {
        self.range_increment(curve, 0, self.segments, pole)
    }
}

fn build_rec(curve: &Polyline, lo: usize, hi: usize, nodes: &mut Vec<Node>) -> usize {
    let pts: Vec<Point> = (lo..=hi).map(|i| curve.vertex(i)).collect();
    let (blo, bhi) = crate::geometry::bbox_of(&pts);
    let center = (blo + bhi) * 0.5;
    let radius = pts.iter().map(|p| (p - center).norm()).fold(0.0, f64::max);
    let me = nodes.len();
    nodes.push(Node {
        lo: lo as u32,
        hi: hi as u32,
        center,
        radius,
        left: u32::MAX,
        right: u32::MAX,
    });
    if hi - lo > LEAF {
        let mid = (lo + hi) / 2;
        let l = build_rec(curve, lo, mid, nodes);
        let r = build_rec(curve, mid, hi, nodes);
        nodes[me].left = l as u32;
        nodes[me].right = r as u32;
    }
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn spiral_curve(n: usize) -> Polyline {
        let v = (0..n)
            .map(|k| {
                let t = k as f64 / n as f64 * 6.0 * std::f64::consts::PI;
                Complex64::from_polar(0.2 + t * 0.1, t)
            })
            .collect();
        Polyline::new(v, false).unwrap()
    }

    proptest! {
        #[test]
        fn tree_matches_segment_sum(lo in 0usize..900, len in 0usize..900, px in -2.0f64..2.0, py in -2.0f64..2.0) {
            let curve = spiral_curve(1000);
            let tree = WindingTree::build(&curve);
            let hi = (lo + len).min(curve.segment_count());
            let pole = Complex64::new(px, py);
            let direct: f64 = (lo..hi).map(|i| { let (a, b) = curve.segment(i); angle_increment(a, b, pole) }).sum();
            prop_assert!((tree.range_increment(&curve, lo, hi, pole) - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn wrapped_arc_on_closed_curve() {
        let v: Vec<Point> = (0..64)
            .map(|k| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / 64.0))
            .collect();
        let curve = Polyline::new(v, true).unwrap();
        let tree = WindingTree::build(&curve);
        let o = Complex64::new(0.0, 0.0);
        assert!((tree.total(&curve, o) - 2.0 * std::f64::consts::PI).abs() < 1e-12);
        let from = PolyPos::new(48, 0.0);
        let to = PolyPos::new(16, 0.0);
        let w = tree.arc_increment(&curve, from, to, o);
        assert!((w - std::f64::consts::PI).abs() < 1e-12);
    }
}
