//! Bounding-volume hierarchy over polyline segments.
//!
//! Serves exact nearest-segment queries (the inner loop of walk-on-spheres),
//! box and disk range queries, and candidate segments for circle clipping.

use num_complex::Complex64;

use crate::geometry::{segment_distance_sq, Point, Polyline};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    lo: Point,
    hi: Point,
    /// Leaf: first item. Internal: index of the right child (left is next).
    a: u32,
    /// Leaf: item count. Internal: 0.
    count: u32,
}

/// Result of a nearest-segment query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Nearest {
    pub dist: f64,
    /// Position of the segment inside the tree, reusable as a hint.
    pub slot: usize,
    pub seg: usize,
    pub t: f64,
    pub point: Point,
}

#[derive(Clone, Debug)]
pub struct SegmentIndex {
    nodes: Vec<Node>,
    /// Segment endpoints in tree order.
    a: Vec<Point>,
    b: Vec<Point>,
    ids: Vec<u32>,
}

#[inline]
fn box_dist2(p: Point, lo: Point, hi: Point) -> f64 {
    let dx = (lo.re - p.re).max(0.0).max(p.re - hi.re);
    let dy = (lo.im - p.im).max(0.0).max(p.im - hi.im);
    dx * dx + dy * dy
}

#[inline]
fn box_far2(p: Point, lo: Point, hi: Point) -> f64 {
    let dx = (p.re - lo.re).abs().max((p.re - hi.re).abs());
    let dy = (p.im - lo.im).abs().max((p.im - hi.im).abs());
    dx * dx + dy * dy
}

impl SegmentIndex {
    pub fn build(curve: &Polyline) -> SegmentIndex {
        let m = curve.segment_count();
        let mut items: Vec<(u32, Point, Point, Point)> = (0..m)
            .map(|i| {
                let (a, b) = curve.segment(i);
                (i as u32, a, b, (a + b) * 0.5)
            })
            .collect();
        let mut nodes = Vec::with_capacity(2 * m / LEAF_SIZE + 2);
        build_rec(&mut items, 0, &mut nodes);
        SegmentIndex {
            nodes,
            a: items.iter().map(|x| x.1).collect(),
            b: items.iter().map(|x| x.2).collect(),
            ids: items.iter().map(|x| x.0).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Exact nearest segment. `hint` is the `slot` of an earlier result and
    /// only seeds the search bound.
    pub fn nearest(&self, p: Point, hint: Option<usize>) -> Nearest {
        let mut best = f64::INFINITY;
        let mut best_k = 0usize;
        let mut best_t = 0.0;
        if let Some(h) = hint {
            if h < self.a.len() {
                let (d2, t) = segment_distance_sq(p, self.a[h], self.b[h]);
                best = d2;
                best_k = h;
                best_t = t;
            }
        }
        let mut stack: [u32; 64] = [0; 64];
        let mut sp = 1usize;
        stack[0] = 0;
        while sp > 0 {
            sp -= 1;
            let ni = stack[sp] as usize;
            let node = &self.nodes[ni];
            if box_dist2(p, node.lo, node.hi) >= best {
                continue;
            }
            if node.count > 0 {
                let s = node.a as usize;
                for k in s..s + node.count as usize {
                    let (d2, t) = segment_distance_sq(p, self.a[k], self.b[k]);
                    if d2 < best {
                        best = d2;
                        best_k = k;
                        best_t = t;
                    }
                }
            } else {
                let l = ni + 1;
                let r = node.a as usize;
                let dl = box_dist2(p, self.nodes[l].lo, self.nodes[l].hi);
                let dr = box_dist2(p, self.nodes[r].lo, self.nodes[r].hi);
                if dl <= dr {
                    stack[sp] = r as u32;
                    stack[sp + 1] = l as u32;
                } else {
                    stack[sp] = l as u32;
                    stack[sp + 1] = r as u32;
                }
                sp += 2;
            }
        }
        let a = self.a[best_k];
        let b = self.b[best_k];
        Nearest {
            dist: best.sqrt(),
            slot: best_k,
            seg: self.ids[best_k] as usize,
            t: best_t,
            point: a + (b - a) * best_t,
        }
    }

    /// Segment ids whose bounding boxes overlap `[lo, hi]`.
    pub fn query_box(&self, lo: Point, hi: Point, out: &mut Vec<usize>) {
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.hi.re < lo.re || node.lo.re > hi.re || node.hi.im < lo.im || node.lo.im > hi.im {
                continue;
            }
            if node.count > 0 {
                let s = node.a as usize;
                for k in s..s + node.count as usize {
                    let (a, b) = (self.a[k], self.b[k]);
                    if a.re.max(b.re) >= lo.re
                        && a.re.min(b.re) <= hi.re
                        && a.im.max(b.im) >= lo.im
                        && a.im.min(b.im) <= hi.im
                    {
                        out.push(self.ids[k] as usize);
                    }
                }
            } else {
                stack.push(ni + 1);
                stack.push(node.a);
            }
        }
    }

    /// Segment ids within distance `r` of `c`.
    pub fn query_disk(&self, c: Point, r: f64, out: &mut Vec<usize>) {
        let r2 = r * r;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if box_dist2(c, node.lo, node.hi) > r2 {
                continue;
            }
            if node.count > 0 {
                let s = node.a as usize;
                for k in s..s + node.count as usize {
                    if segment_distance_sq(c, self.a[k], self.b[k]).0 <= r2 {
                        out.push(self.ids[k] as usize);
                    }
                }
            } else {
                stack.push(ni + 1);
                stack.push(node.a);
            }
        }
    }

    /// Segment ids that may meet the circle `|z - c| = r` (band of width `eps`).
    pub fn query_circle(&self, c: Point, r: f64, eps: f64, out: &mut Vec<usize>) {
        let outer = (r + eps) * (r + eps);
        let inner = (r - eps).max(0.0);
        let inner2 = inner * inner;
        let mut stack = vec![0u32];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if box_dist2(c, node.lo, node.hi) > outer || box_far2(c, node.lo, node.hi) < inner2 {
                continue;
            }
            if node.count > 0 {
                let s = node.a as usize;
                for k in s..s + node.count as usize {
                    let (a, b) = (self.a[k], self.b[k]);
                    let far = (a - c).norm_sqr().max((b - c).norm_sqr());
                    if segment_distance_sq(c, a, b).0 <= outer && far >= inner2 {
                        out.push(self.ids[k] as usize);
                    }
                }
            } else {
                stack.push(ni + 1);
                stack.push(node.a);
            }
        }
    }
}

fn build_rec(items: &mut [(u32, Point, Point, Point)], offset: usize, nodes: &mut Vec<Node>) -> usize {
    let mut lo = Complex64::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut clo = lo;
    let mut chi = hi;
    for it in items.iter() {
        for p in [it.1, it.2] {
            lo.re = lo.re.min(p.re);
            lo.im = lo.im.min(p.im);
            hi.re = hi.re.max(p.re);
            hi.im = hi.im.max(p.im);
        }
        clo.re = clo.re.min(it.3.re);
        clo.im = clo.im.min(it.3.im);
        chi.re = chi.re.max(it.3.re);
        chi.im = chi.im.max(it.3.im);
    }
    let me = nodes.len();
    nodes.push(Node { lo, hi, a: offset as u32, count: items.len() as u32 });
    if items.len() <= LEAF_SIZE {
        return me;
    }
    let mid = items.len() / 2;
    if chi.re - clo.re >= chi.im - clo.im {
        items.select_nth_unstable_by(mid, |x, y| x.3.re.total_cmp(&y.3.re));
    } else {
        items.select_nth_unstable_by(mid, |x, y| x.3.im.total_cmp(&y.3.im));
    }
    let (left, right) = items.split_at_mut(mid);
    build_rec(left, offset, nodes);
    let r = build_rec(right, offset + mid, nodes);
    nodes[me].a = r as u32;
    nodes[me].count = 0;
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wiggly(n: usize) -> Polyline {
        let v = (0..n)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                Complex64::from_polar(1.0 + 0.3 * (7.0 * t).sin(), t)
            })
            .collect();
        Polyline::new(v, true).unwrap()
    }

    #[test]
    fn nearest_matches_linear_scan() {
        let curve = wiggly(1000);
        let idx = SegmentIndex::build(&curve);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let p = Complex64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5));
            let n = idx.nearest(p, None);
            let brute = (0..curve.segment_count())
                .map(|i| {
                    let (a, b) = curve.segment(i);
                    segment_distance_sq(p, a, b).0
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            assert!((n.dist - brute).abs() < 1e-14);
            let m = idx.nearest(p + Complex64::new(0.01, 0.0), None);
            let m = idx.nearest(p, Some(m.slot));
            assert!((m.dist - brute).abs() < 1e-14);
        }
    }

    #[test]
    fn disk_query_matches_scan() {
        let curve = wiggly(500);
        let idx = SegmentIndex::build(&curve);
        let c = Complex64::new(0.9, 0.2);
        let mut got = Vec::new();
        idx.query_disk(c, 0.3, &mut got);
        got.sort();
        let want: Vec<usize> = (0..curve.segment_count())
            .filter(|&i| {
                let (a, b) = curve.segment(i);
                segment_distance_sq(c, a, b).0 <= 0.09
            })
            .collect();
        assert_eq!(got, want);
    }
}
