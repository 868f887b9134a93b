//! Harmonic measure by walk-on-spheres.
//!
//! Each walk jumps to a uniform point on the largest boundary-free circle
//! until it is within `ε_hit` of `∂Ω`, then reports the nearest segment.
//! Walk `i` draws from RNG stream `i`, so a batch is reproducible whatever
//! the thread count.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

use crate::domain::JordanDomain;
use crate::error::{LabError, Result};
use crate::geometry::{self, Disk, Point, PolyPos};
use crate::repeller::{RepellerDomain, Word};
use crate::rng::{StreamFactory, AUX_STREAM_BASE};

pub const DEFAULT_MAX_STEPS: usize = 100_000;
const CHUNK: usize = 1024;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WosOptions {
    pub eps_hit: f64,
    pub max_steps: usize,
}

impl WosOptions {
    pub fn new(eps_hit: f64) -> Self {
        WosOptions { eps_hit, max_steps: DEFAULT_MAX_STEPS }
    }

    /// `10⁻³` times the shortest segment, floored well above `ε_geom`.
    pub fn for_domain(domain: &JordanDomain) -> Self {
        let b = domain.boundary();
        let min_seg = (0..b.segment_count())
            .map(|i| {
                let (p, q) = b.segment(i);
                (p - q).norm()
            })
            .fold(f64::INFINITY, f64::min);
        Self::new((1e-3 * min_seg).max(1e3 * domain.eps()))
    }

    /// `10⁻³` times the smallest cylinder diameter at the working depth.
    pub fn for_repeller(rd: &RepellerDomain) -> Self {
        let b = rd.domain.boundary();
        let (lo, hi) = rd.repeller_segments();
        let min_seg = (lo..hi)
            .map(|i| {
                let (p, q) = b.segment(i);
                (p - q).norm()
            })
            .fold(f64::INFINITY, f64::min);
        Self::new((1e-3 * min_seg).max(1e3 * rd.domain.eps()))
    }
}

/// Where one walk stopped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub seg: usize,
    pub t: f64,
    pub point: Point,
    pub steps: usize,
}

/// One walk from `z0`.
pub fn wos_walk<R: Rng + ?Sized>(domain: &JordanDomain, z0: Point, opt: &WosOptions, rng: &mut R) -> Result<Hit> {
    let index = domain.index();
    let mut z = z0;
    let mut hint = None;
    for steps in 0..opt.max_steps {
        let near = index.nearest(z, hint);
        if near.dist < opt.eps_hit {
            return Ok(Hit { seg: near.seg, t: near.t, point: near.point, steps });
        }
        hint = Some(near.slot);
        let th: f64 = rng.random::<f64>() * 2.0 * PI;
        let (s, c) = th.sin_cos();
        z += Complex64::new(c, s) * near.dist;
    }
    Err(LabError::MaxStepsExceeded { steps: opt.max_steps })
}

/// Hit positions of a walk batch, indexed by walk.
#[derive(Clone, Debug)]
pub struct HitSample {
    pub seed: u64,
    pub eps_hit: f64,
    pub segments: usize,
    /// Hit segment per walk.
    pub seg: Vec<u32>,
    /// Parameter along the hit segment per walk.
    pub t: Vec<f64>,
    histogram: Vec<u64>,
    prefix: Vec<u64>,
}

impl HitSample {
    pub fn walks(&self) -> usize {
        self.seg.len()
    }

    pub fn histogram(&self) -> &[u64] {
        &self.histogram
    }

    /// Hits on segments `[lo, hi)`.
    pub fn range_hits(&self, lo: usize, hi: usize) -> u64 {
        self.prefix[hi] - self.prefix[lo]
    }

    /// Hits on the forward boundary range `[from, to)` at vertex resolution,
    /// wrapping past the last segment.
    pub fn cyclic_hits(&self, from: usize, to: usize) -> u64 {
        if from <= to {
            self.range_hits(from, to)
        } else {
            self.range_hits(from, self.segments) + self.range_hits(0, to)
        }
    }

    pub fn pos(&self, i: usize) -> PolyPos {
        PolyPos::new(self.seg[i] as usize, self.t[i])
    }

    pub fn point(&self, domain: &JordanDomain, i: usize) -> Point {
        domain.point_at(self.pos(i))
    }

    pub fn estimate(&self, hits: u64) -> MeasureEstimate {
        MeasureEstimate::from_hits(hits, self.walks() as u64, self.seed)
    }
}

/// Runs `walks` walks from the basepoint on the rayon pool.
pub fn sample_hits(domain: &JordanDomain, walks: usize, seed: u64, opt: &WosOptions) -> Result<HitSample> {
    sample_hits_from(domain, domain.basepoint(), walks, seed, opt)
}

pub fn sample_hits_from(domain: &JordanDomain, z0: Point, walks: usize, seed: u64, opt: &WosOptions) -> Result<HitSample> {
    if domain.dist_to_boundary(z0) <= opt.eps_hit {
        return Err(LabError::InvalidParameter("start point within eps_hit of the boundary".into()));
    }
    let streams = StreamFactory::new(seed);
    let chunks: Vec<Result<Vec<(u32, f64)>>> = (0..walks.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(walks);
            let mut out = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let mut rng = streams.stream(i as u64);
                let h = wos_walk(domain, z0, opt, &mut rng)?;
                out.push((h.seg as u32, h.t));
            }
            Ok(out)
        })
        .collect();
    let n = domain.segment_count();
    let mut seg = Vec::with_capacity(walks);
    let mut t = Vec::with_capacity(walks);
    for chunk in chunks {
        for (s, u) in chunk? {
            seg.push(s);
            t.push(u);
        }
    }
    let mut histogram = vec![0u64; n];
    for &s in &seg {
        histogram[s as usize] += 1;
    }
    let mut prefix = vec![0u64; n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + histogram[i];
    }
    Ok(HitSample { seed, eps_hit: opt.eps_hit, segments: n, seg, t, histogram, prefix })
}

/// Monte-Carlo harmonic measure with its binomial standard error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureEstimate {
    pub value: f64,
    pub std_error: f64,
    pub hits: u64,
    pub walks: u64,
    pub rng_seed: u64,
    /// Nonzero per-segment counts inside the measured set.
    pub hit_histogram: Vec<(usize, u64)>,
}

impl MeasureEstimate {
    pub fn from_hits(hits: u64, walks: u64, seed: u64) -> Self {
        let v = hits as f64 / walks as f64;
        MeasureEstimate {
            value: v,
            std_error: (v * (1.0 - v) / walks as f64).sqrt(),
            hits,
            walks,
            rng_seed: seed,
            hit_histogram: Vec::new(),
        }
    }

    /// Relative standard error; infinite with no hits.
    pub fn relative_error(&self) -> f64 {
        if self.hits == 0 {
            f64::INFINITY
        } else {
            self.std_error / self.value
        }
    }
}

/// Measure of a set of segments.
pub fn measure_of_set(sample: &HitSample, segments: &[usize]) -> MeasureEstimate {
    let mut segs = segments.to_vec();
    segs.sort_unstable();
    segs.dedup();
    let h = sample.histogram();
    let hist: Vec<(usize, u64)> = segs.iter().filter(|&&s| h[s] > 0).map(|&s| (s, h[s])).collect();
    let hits = hist.iter().map(|&(_, c)| c).sum();
    let mut e = sample.estimate(hits);
    e.hit_histogram = hist;
    e
}

/// Measure of the boundary sub-arc between two positions, going forward.
pub fn measure_of_arc(sample: &HitSample, from: PolyPos, to: PolyPos) -> MeasureEstimate {
    let wraps = to < from;
    let hits = (0..sample.walks())
        .filter(|&i| {
            let p = sample.pos(i);
            if wraps {
                p >= from || p < to
            } else {
                p >= from && p < to
            }
        })
        .count() as u64;
    sample.estimate(hits)
}

/// Measure of a contiguous segment range `[lo, hi)`, e.g. a cylinder.
pub fn measure_of_range(sample: &HitSample, lo: usize, hi: usize) -> MeasureEstimate {
    sample.estimate(sample.range_hits(lo, hi))
}

/// `ω(B ∩ ∂Ω)`: hits landing inside `B`, which splits partial segments at the circle.
pub fn measure_of_disk(domain: &JordanDomain, sample: &HitSample, b: &Disk) -> Result<MeasureEstimate> {
    let mut segs = Vec::new();
    domain.index().query_disk(b.center, b.radius, &mut segs);
    if segs.is_empty() {
        return Err(LabError::EmptyIntersection);
    }
    let r2 = b.radius * b.radius;
    let hits = (0..sample.walks())
        .filter(|&i| (sample.point(domain, i) - b.center).norm_sqr() <= r2)
        .count() as u64;
    Ok(sample.estimate(hits))
}

/// Boundary sub-arc representing a disk.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RepresentativeArc {
    pub from: PolyPos,
    pub to: PolyPos,
    pub measure: f64,
    pub disk_measure: f64,
}

/// Maximal forward runs `[from, to)` of `∂Ω` inside `disk`, as positions.
pub fn components_inside(domain: &JordanDomain, disk: &Disk) -> Vec<(PolyPos, PolyPos)> {
    let curve = domain.boundary();
    let mut segs = Vec::new();
    domain.index().query_circle(disk.center, disk.radius, domain.eps(), &mut segs);
    segs.sort_unstable();
    let mut cr = Vec::new();
    for &s in &segs {
        let (a, b) = curve.segment(s);
        geometry::circle_segment_crossings(a, b, s, disk, domain.eps(), &mut cr);
    }
    cr.retain(|c| !c.degenerate);
    if cr.is_empty() {
        return if disk.contains(curve.vertex(0)) {
            vec![(PolyPos::new(0, 0.0), PolyPos::new(curve.segment_count() - 1, 1.0))]
        } else {
            Vec::new()
        };
    }
    let m = cr.len();
    (0..m)
        .filter(|&i| cr[i].entering)
        .map(|i| (cr[i].pos, cr[(i + 1) % m].pos))
        .collect()
}

/// Carleson's representing arc: a connected piece of `∂Ω ∩ 2B` with
/// `ω(β) ∈ (ω(B)/log²(1/ω(B)), ω(B))`.
pub fn representative_arc(domain: &JordanDomain, sample: &HitSample, b: &Disk) -> Result<RepresentativeArc> {
    let wb = measure_of_disk(domain, sample, b)?;
    let needed = (100.0 * (1.0 - wb.value)).ceil() as u64 + 1;
    if wb.hits < needed {
        return Err(LabError::InsufficientHits { needed: needed as usize, have: wb.hits as usize });
    }
    let lower = wb.value / (1.0 / wb.value).ln().powi(2);
    let upper = wb.value;
    let n = sample.walks() as f64;
    let comps = components_inside(domain, &b.scaled(2.0));
    // Hit indices sorted along the curve, once.
    let mut order: Vec<usize> = (0..sample.walks()).collect();
    order.sort_by(|&i, &j| sample.pos(i).partial_cmp(&sample.pos(j)).unwrap());
    let sorted: Vec<PolyPos> = order.iter().map(|&i| sample.pos(i)).collect();
    let mut best: Option<RepresentativeArc> = None;
    for (from, to) in comps {
        let idx: Vec<usize> = if from <= to {
            let a = sorted.partition_point(|p| *p < from);
            let b = sorted.partition_point(|p| *p < to);
            (a..b).collect()
        } else {
            let a = sorted.partition_point(|p| *p < from);
            let b = sorted.partition_point(|p| *p < to);
            (a..sorted.len()).chain(0..b).collect()
        };
        let m = idx.len() as f64 / n;
        if m > lower && m < upper {
            let cand = RepresentativeArc { from, to, measure: m, disk_measure: wb.value };
            if best.is_none_or(|b| cand.measure > b.measure) {
                best = Some(cand);
            }
        } else if m >= upper {
            // Trim to a sub-run of hits centred on the hit nearest the disk centre.
            let target = ((lower * upper).sqrt() * n).round().max(1.0) as usize;
            if target >= idx.len() {
                continue;
            }
            let centre = (0..idx.len())
                .min_by(|&i, &j| {
                    let di = (domain.point_at(sorted[idx[i]]) - b.center).norm();
                    let dj = (domain.point_at(sorted[idx[j]]) - b.center).norm();
                    di.total_cmp(&dj)
                })
                .unwrap_or(0);
            let lo = centre.saturating_sub(target / 2).min(idx.len() - target);
            let hi = lo + target;
            let end = if hi < idx.len() { sorted[idx[hi]] } else { to };
            let cand = RepresentativeArc {
                from: sorted[idx[lo]],
                to: end,
                measure: target as f64 / n,
                disk_measure: wb.value,
            };
            if cand.measure > lower && cand.measure < upper && best.is_none_or(|b| cand.measure > b.measure) {
                best = Some(cand);
            }
        }
    }
    best.ok_or(LabError::NotFound)
}

/// Empirical doubling constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoublingReport {
    /// `max ω(2B)/ω(B)` over sampled boundary-centred disks.
    pub c_disk: f64,
    /// `max ω(I)/ω(J)` over sampled adjacent arcs of comparable diameter.
    pub c_arc: f64,
    pub disks_used: usize,
    pub arcs_used: usize,
}

/// Minimum hits for a measure to enter a doubling ratio.
pub const DOUBLING_MIN_HITS: u64 = 400;

/// Forward vertex index after `start` at which the arc first reaches diameter `d`.
fn arc_of_diameter(domain: &JordanDomain, start: usize, d: f64) -> Option<usize> {
    let v = domain.boundary().vertices();
    let n = v.len();
    let p = v[start];
    let mut hull_far = 0.0f64;
    for k in 1..n {
        let q = v[(start + k) % n];
        hull_far = hull_far.max((q - p).norm());
        if hull_far >= d {
            return Some((start + k) % n);
        }
    }
    None
}

/// Empirical doubling constants over `trials` disks and arc pairs with
/// radii log-uniform between `min_radius` and a quarter of the diameter.
pub fn doubling_check(domain: &JordanDomain, sample: &HitSample, trials: usize, min_radius: f64, seed: u64) -> Result<DoublingReport> {
    if trials < 50 {
        return Err(LabError::InvalidParameter(format!("doubling needs at least 50 trials, got {trials}")));
    }
    let streams = StreamFactory::new(seed);
    let v = domain.boundary().vertices();
    let n = v.len();
    let max_r = domain.diameter() / 4.0;
    let (ln_lo, ln_hi) = (min_radius.ln(), max_r.ln());
    let mut rep = DoublingReport { c_disk: 1.0, c_arc: 1.0, disks_used: 0, arcs_used: 0 };
    for k in 0..trials {
        let mut rng = streams.stream(AUX_STREAM_BASE + k as u64);
        let i = rng.random_range(0..n);
        let r = (ln_lo + (ln_hi - ln_lo) * rng.random::<f64>()).exp();
        let b = Disk::new(v[i], r)?;
        let w1 = measure_of_disk(domain, sample, &b)?;
        let w2 = measure_of_disk(domain, sample, &b.scaled(2.0))?;
        if w1.hits >= DOUBLING_MIN_HITS {
            rep.c_disk = rep.c_disk.max(w2.value / w1.value);
            rep.disks_used += 1;
        }
        // Adjacent arcs: I from i to j of diameter r, J from j onward, no larger.
        if let Some(j) = arc_of_diameter(domain, i, r) {
            if let Some(k2) = arc_of_diameter(domain, j, r) {
                let hi = sample.cyclic_hits(i, j);
                let hj = sample.cyclic_hits(j, k2);
                if hi >= DOUBLING_MIN_HITS && hj >= DOUBLING_MIN_HITS {
                    let ratio = hi as f64 / hj as f64;
                    rep.c_arc = rep.c_arc.max(ratio.max(1.0 / ratio));
                    rep.arcs_used += 1;
                }
            }
        }
    }
    Ok(rep)
}

/// Writes `segment,word,hits` rows; the word column is empty off the repeller arc.
pub fn write_histogram_csv<W: Write>(out: W, sample: &HitSample, owners: Option<(&RepellerDomain, usize)>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| LabError::Output(format!("csv: {e}"));
    w.write_record(["segment", "word", "hits"]).map_err(io)?;
    for (s, &h) in sample.histogram().iter().enumerate() {
        let word = owners
            .and_then(|(rd, d)| rd.owner(s, d))
            .map(|w: Word| w.to_string())
            .unwrap_or_default();
        w.write_record([s.to_string(), word, h.to_string()]).map_err(io)?;
    }
    w.flush().map_err(|e| LabError::Output(format!("csv: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Provenance;
    use crate::geometry::Polyline;

    fn c(a: f64, b: f64) -> Point {
        Complex64::new(a, b)
    }

    fn square() -> JordanDomain {
        let v = vec![c(-1., -1.), c(1., -1.), c(1., 1.), c(-1., 1.)];
        JordanDomain::new(Polyline::new(v, true).unwrap(), c(0., 0.), Provenance::Custom("square".into())).unwrap()
    }

    #[test]
    fn walks_are_deterministic_per_stream() {
        let d = square();
        let opt = WosOptions::new(1e-6);
        let f = StreamFactory::new(3);
        let a = wos_walk(&d, c(0., 0.), &opt, &mut f.stream(11)).unwrap();
        let b = wos_walk(&d, c(0., 0.), &opt, &mut f.stream(11)).unwrap();
        assert_eq!(a, b);
        assert!(a.steps > 0);
    }

    #[test]
    fn square_sides_quarter_each() {
        let d = square();
        let s = sample_hits(&d, 20_000, 5, &WosOptions::new(1e-6)).unwrap();
        assert_eq!(s.histogram().iter().sum::<u64>(), 20_000);
        for k in 0..4 {
            let e = measure_of_set(&s, &[k]);
            assert!((e.value - 0.25).abs() < 3.0 * e.std_error + 1e-3, "side {k}: {}", e.value);
        }
        let all = measure_of_set(&s, &[0, 1, 2, 3]);
        assert_eq!(all.value, 1.0);
    }

    #[test]
    fn additivity_on_shared_histogram() {
        let d = square();
        let s = sample_hits(&d, 5000, 9, &WosOptions::new(1e-6)).unwrap();
        let a = measure_of_set(&s, &[0]);
        let b = measure_of_set(&s, &[2, 3]);
        let ab = measure_of_set(&s, &[0, 2, 3]);
        assert_eq!(a.hits + b.hits, ab.hits);
    }

    #[test]
    fn max_steps_reported() {
        let d = square();
        let opt = WosOptions { eps_hit: 1e-300, max_steps: 3 };
        let e = wos_walk(&d, c(0., 0.), &opt, &mut StreamFactory::new(1).stream(0)).unwrap_err();
        assert_eq!(e, LabError::MaxStepsExceeded { steps: 3 });
    }

    #[test]
    fn disk_containing_domain_has_full_measure() {
        let d = square();
        let s = sample_hits(&d, 1000, 1, &WosOptions::new(1e-6)).unwrap();
        let e = measure_of_disk(&d, &s, &Disk::new(c(0., 0.), 2.0).unwrap()).unwrap();
        assert_eq!(e.value, 1.0);
        let far = Disk::new(c(5., 5.), 0.5).unwrap();
        assert_eq!(measure_of_disk(&d, &s, &far).unwrap_err(), LabError::EmptyIntersection);
    }

    #[test]
    fn flat_representative_arc() {
        let d = square();
        let s = sample_hits(&d, 50_000, 2, &WosOptions::new(1e-6)).unwrap();
        let b = Disk::new(c(0.0, -1.0), 0.2).unwrap();
        let arc = representative_arc(&d, &s, &b).unwrap();
        assert!(arc.measure < arc.disk_measure);
        assert!(arc.measure > arc.disk_measure / (1.0 / arc.disk_measure).ln().powi(2));
    }

    #[test]
    fn histogram_csv_has_all_segments() {
        let d = square();
        let s = sample_hits(&d, 100, 1, &WosOptions::new(1e-6)).unwrap();
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &s, None).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("segment,word,hits"));
    }
}
