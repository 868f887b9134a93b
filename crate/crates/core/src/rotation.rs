//! Boundary rotation `rot(z, δ)`.
//!
//! The truncated domain `Ω_{z,δ}` is the component of `Ω \ B̄(z, δ)` that
//! contains the basepoint. Its boundary alternates between pieces of `∂Ω`
//! and gate arcs of the circle `∂B(z, δ)`. Walking that cycle while tracking
//! `arg(y - z)` continuously gives the branch of the argument on every gate;
//! the log-rotation is the infimum over gate points.
//!
//! Two routes are provided:
//!
//! * [`RotationMethod::BoundaryTracking`] follows the component boundary
//!   exactly, using the winding tree for the `∂Ω` pieces. Along a gate the
//!   argument is monotone, so the infimum sits at a gate endpoint.
//! * [`RotationMethod::PathIntegral`] rasterises the component, joins the
//!   basepoint to sampled gate points by grid paths and integrates
//!   `Im dξ/(ξ - z)` along them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::f64::consts::PI;

use crate::domain::JordanDomain;
use crate::error::{LabError, Result};
use crate::geometry::{self, angle_increment, CircleCrossing, Disk, Point, PolyPos, Polyline};
use crate::repeller::{RepellerSpec, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationMethod {
    BoundaryTracking,
    PathIntegral,
    Symbolic,
}

/// Log-rotation with the additive error it is known to carry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotationValue {
    pub log_rot: f64,
    pub method: RotationMethod,
    pub additive_error_bound: f64,
}

/// Error bound attached to the exact tracking route: the polyline is only a
/// discretisation of the curve, worth at most one straight-line turn.
pub const TRACKING_BOUND: f64 = PI;
/// Path-integral route: three half-turns of path freedom plus one of raster slack.
pub const PATH_INTEGRAL_BOUND: f64 = 3.0 * PI + PI;
/// Extra slack for replacing a crosscut by a disk at its support.
pub const CROSSCUT_SLACK: f64 = 10.0 * PI;

/// One circular arc of `∂B(z, δ)` on the boundary of the truncated domain,
/// traversed clockwise from `start` to `end`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Gate {
    pub start: Point,
    pub end: Point,
    /// Polar angle of `start - z` in (-π, π].
    pub start_angle: f64,
    /// Clockwise angular length in (0, 2π].
    pub sweep: f64,
    /// Continuous `arg(y - z)` at the two endpoints.
    pub arg_start: f64,
    pub arg_end: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Anchor {
    /// Anchored on the circle along the straight ray from the basepoint.
    Gate { point: Point },
    /// Anchored at the boundary point nearest to the basepoint.
    Boundary { pos: PolyPos },
}

/// Truncated domain, described by its boundary cycle.
#[derive(Clone, Debug)]
pub struct TruncatedComponent {
    pub center: Point,
    pub radius: f64,
    pub gates: Vec<Gate>,
    /// Boundary pieces `(from, to)`, forward along `∂Ω`, in cycle order;
    /// piece `i` ends where gate `i` starts.
    pub pieces: Vec<(PolyPos, PolyPos)>,
    pub anchor: Anchor,
    /// Tangential contacts that were perturbed away.
    pub degenerate_contacts: usize,
    /// Number of transversal crossings of `∂Ω` with the circle.
    pub crossings: usize,
}

impl TruncatedComponent {
    /// Infimum of the tracked argument over all gate points.
    pub fn log_rot(&self) -> f64 {
        self.gates.iter().map(|g| g.arg_end).fold(f64::INFINITY, f64::min)
    }

    /// Closed outer boundary with gate arcs sampled every `arc_step` radians.
    pub fn outer_boundary(&self, domain: &JordanDomain, arc_step: f64) -> Result<Polyline> {
        let mut pts: Vec<Point> = Vec::new();
        for (piece, gate) in self.pieces.iter().zip(&self.gates) {
            pts.extend(domain.boundary().sub_arc_points(piece.0, piece.1));
            let k = ((gate.sweep / arc_step).ceil() as usize).max(1);
            for i in 1..k {
                let th = gate.start_angle - gate.sweep * i as f64 / k as f64;
                pts.push(self.center + Complex64::from_polar(self.radius, th));
            }
        }
        pts.dedup();
        Polyline::new(pts, true)
    }
}

fn polar(p: Point, z: Point) -> f64 {
    (p - z).arg()
}

/// Clockwise angle from `from` to `to`, in (0, 2π].
fn cw_sweep(from: f64, to: f64) -> f64 {
    let s = (from - to).rem_euclid(2.0 * PI);
    if s == 0.0 {
        2.0 * PI
    } else {
        s
    }
}

/// Clips `Ω` by `B̄(z, δ)` and tracks the argument around the component of
/// the basepoint.
pub fn truncated_component(domain: &JordanDomain, z: Point, delta: f64) -> Result<TruncatedComponent> {
    if !(delta > 0.0) {
        return Err(LabError::InvalidParameter(format!("radius must be positive, got {delta}")));
    }
    let z0 = domain.basepoint();
    if (z0 - z).norm() <= delta {
        return Err(LabError::BasepointSwallowed);
    }
    let curve = domain.boundary();
    let eps = domain.eps();
    let circle = Disk::new(z, delta)?;
    let mut cand = Vec::new();
    domain.index().query_circle(z, delta, eps, &mut cand);
    cand.sort_unstable();
    let mut raw: Vec<CircleCrossing> = Vec::new();
    for &s in &cand {
        let (a, b) = curve.segment(s);
        geometry::circle_segment_crossings(a, b, s, &circle, eps, &mut raw);
    }
    let degenerate_contacts = raw.iter().filter(|c| c.degenerate).count();
    raw.retain(|c| !c.degenerate);
    let cr = raw;
    let m = cr.len();
    if m == 0 {
        return Err(LabError::NoPath("circle does not cross the boundary".into()));
    }
    for i in 0..m {
        if cr[i].entering == cr[(i + 1) % m].entering {
            return Err(LabError::NoPath("crossings do not alternate".into()));
        }
    }
    // Circle order: sort by polar angle; the clockwise successor of an
    // entering crossing is the previous one in counterclockwise order.
    let angles: Vec<f64> = cr.iter().map(|c| polar(c.point, z)).collect();
    let mut by_angle: Vec<usize> = (0..m).collect();
    by_angle.sort_by(|&a, &b| angles[a].total_cmp(&angles[b]));
    let mut rank = vec![0usize; m];
    for (r, &i) in by_angle.iter().enumerate() {
        rank[i] = r;
    }
    let cw_next = |i: usize| by_angle[(rank[i] + m - 1) % m];

    let tree = domain.winding();
    let a0 = (z0 - z).arg();
    let near = domain.nearest(z0);
    let r1 = near.dist;
    let r2 = (z0 - z).norm() - delta;

    let mut gates = Vec::new();
    let mut pieces = Vec::new();

    // Walks the cycle starting from the exit crossing `x0` whose argument is
    // `arg_x0`, returning to it; emits pieces and gates in order.
    let walk = |x0: usize, arg_x0: f64, gates: &mut Vec<Gate>, pieces: &mut Vec<(PolyPos, PolyPos)>| -> Result<f64> {
        let mut x = x0;
        let mut arg_x = arg_x0;
        for _ in 0..=m {
            let e = (x + 1) % m;
            if !cr[e].entering {
                return Err(LabError::NoPath("exit not followed by entry".into()));
            }
            let arg_e = arg_x + tree.arc_increment(curve, cr[x].pos, cr[e].pos, z);
            pieces.push((cr[x].pos, cr[e].pos));
            let nx = cw_next(e);
            if cr[nx].entering {
                return Err(LabError::NoPath("gate does not end at an exit".into()));
            }
            let sweep = cw_sweep(angles[e], angles[nx]);
            let arg_nx = arg_e - sweep;
            gates.push(Gate {
                start: cr[e].point,
                end: cr[nx].point,
                start_angle: angles[e],
                sweep,
                arg_start: arg_e,
                arg_end: arg_nx,
            });
            x = nx;
            arg_x = arg_nx;
            if x == x0 {
                return Ok(arg_x);
            }
        }
        Err(LabError::NoPath("boundary cycle does not close".into()))
    };

    let anchor;
    if r2 < r1 {
        // The straight segment from z0 to the circle stays inside Ω.
        let q = z + (z0 - z) / (z0 - z).norm() * delta;
        anchor = Anchor::Gate { point: q };
        let phi_q = a0;
        // Gate containing the angle of q: from an entry, clockwise to its exit.
        let x0 = (0..m)
            .filter(|&i| cr[i].entering)
            .map(|e| (e, cw_next(e)))
            .find(|&(e, x)| (angles[e] - phi_q).rem_euclid(2.0 * PI) <= cw_sweep(angles[e], angles[x]))
            .map(|(_, x)| x)
            .ok_or_else(|| LabError::NoPath("anchor ray misses every gate".into()))?;
        let arg_x0 = a0 - (phi_q - angles[x0]).rem_euclid(2.0 * PI);
        let back = walk(x0, arg_x0, &mut gates, &mut pieces)?;
        if (back - arg_x0).abs() > 1e-6 {
            return Err(LabError::NoPath(format!("argument fails to close by {}", back - arg_x0)));
        }
    } else {
        let pos = PolyPos::new(near.seg, near.t);
        anchor = Anchor::Boundary { pos };
        let arg_p = a0 + angle_increment(z0, near.point, z);
        // Last crossing at or before pos, cyclically.
        let idx = cr.partition_point(|c| c.pos <= pos);
        let x0 = (idx + m - 1) % m;
        if cr[x0].entering {
            return Err(LabError::NoPath("nearest boundary point lies inside the disk".into()));
        }
        // Argument at x0 obtained by walking backwards from p.
        let inc = tree.arc_increment(curve, cr[x0].pos, pos, z);
        let arg_x0 = arg_p - inc;
        let back = walk(x0, arg_x0, &mut gates, &mut pieces)?;
        if (back - arg_x0).abs() > 1e-6 {
            return Err(LabError::NoPath(format!("argument fails to close by {}", back - arg_x0)));
        }
    }
    Ok(TruncatedComponent {
        center: z,
        radius: delta,
        gates,
        pieces,
        anchor,
        degenerate_contacts,
        crossings: m,
    })
}

/// `log rot(z, δ)` by the requested route.
pub fn rot_point(domain: &JordanDomain, z: Point, delta: f64, method: RotationMethod) -> Result<RotationValue> {
    let comp = truncated_component(domain, z, delta)?;
    match method {
        RotationMethod::BoundaryTracking => Ok(RotationValue {
            log_rot: comp.log_rot(),
            method,
            additive_error_bound: TRACKING_BOUND,
        }),
        RotationMethod::PathIntegral => {
            let raster = Raster::new(domain, z, delta, RasterOptions::default())?;
            let log_rot = raster.path_log_rot(domain, &comp, 17)?;
            Ok(RotationValue {
                log_rot,
                method,
                additive_error_bound: PATH_INTEGRAL_BOUND,
            })
        }
        RotationMethod::Symbolic => Err(LabError::InvalidParameter(
            "symbolic rotation needs a word, not a point".into(),
        )),
    }
}

/// Diameter of `∂Ω ∩ B` divided by `diam(B)`.
pub fn eligibility_ratio(domain: &JordanDomain, b: &Disk) -> f64 {
    let curve = domain.boundary();
    let mut segs = Vec::new();
    domain.index().query_disk(b.center, b.radius, &mut segs);
    let mut pts = Vec::new();
    let mut cr = Vec::new();
    for &s in &segs {
        let (p, q) = curve.segment(s);
        for v in [p, q] {
            if b.contains(v) {
                pts.push(v);
            }
        }
        cr.clear();
        geometry::circle_segment_crossings(p, q, s, b, domain.eps(), &mut cr);
        pts.extend(cr.iter().map(|c| c.point));
    }
    geometry::diameter(&pts) / (2.0 * b.radius)
}

/// Rotation of an off-boundary disk, with the centre as pole.
pub fn rot_disk(domain: &JordanDomain, b: &Disk, method: RotationMethod) -> Result<RotationValue> {
    let ratio = eligibility_ratio(domain, b);
    if ratio < 0.25 {
        return Err(LabError::Ineligible { ratio });
    }
    rot_point(domain, b.center, b.radius, method)
}

/// Rotation of the crosscut cutting off `support`: the disk at the
/// arclength midpoint with radius equal to the support diameter.
pub fn rot_crosscut(domain: &JordanDomain, support: &Polyline, method: RotationMethod) -> Result<RotationValue> {
    let diam = support.diameter();
    if !(diam > 0.0) {
        return Err(LabError::InvalidParameter("support arc has zero diameter".into()));
    }
    let mid = support.arclength_midpoint();
    let mut v = rot_point(domain, mid, diam, method)?;
    v.additive_error_bound += CROSSCUT_SLACK;
    Ok(v)
}

/// Crosscut rotation for a boundary sub-arc given by positions.
pub fn rot_crosscut_between(domain: &JordanDomain, from: PolyPos, to: PolyPos, method: RotationMethod) -> Result<RotationValue> {
    let pts = domain.boundary().sub_arc_points(from, to);
    if pts.len() < 2 {
        return Err(LabError::InvalidParameter("degenerate support arc".into()));
    }
    rot_crosscut(domain, &Polyline::new(pts, false)?, method)
}

/// Letter multiplicities of a word; the exact carrier of symbolic rotation.
pub fn symbolic_counts(spec: &RepellerSpec, w: &Word) -> Result<Vec<u32>> {
    spec.check_word(w)?;
    Ok(w.counts(spec.letters()))
}

/// Evaluates `Σ_j k_j θ_j` in letter order.
pub fn symbolic_value(spec: &RepellerSpec, counts: &[u32]) -> f64 {
    counts
        .iter()
        .zip(&spec.maps)
        .map(|(&k, m)| k as f64 * m.angle)
        .sum()
}

/// Renormalized symbolic rotation `Σ θ_{w_i}`.
pub fn rot_symbolic(spec: &RepellerSpec, w: &Word) -> Result<RotationValue> {
    let counts = symbolic_counts(spec, w)?;
    Ok(RotationValue {
        log_rot: symbolic_value(spec, &counts),
        method: RotationMethod::Symbolic,
        additive_error_bound: 0.0,
    })
}

/// Raster resolution controls.
#[derive(Clone, Copy, Debug)]
pub struct RasterOptions {
    /// Cell size as a fraction of δ.
    pub cells_per_radius: f64,
    /// Upper bound on cells along the longer side.
    pub max_side: usize,
}

impl Default for RasterOptions {
    fn default() -> Self {
        RasterOptions {
            cells_per_radius: 32.0,
            max_side: 2048,
        }
    }
}

/// Scanline raster of `Ω \ B̄(z, δ)` with breadth-first reachability from
/// the basepoint over the 8-neighbour graph.
pub struct Raster {
    origin: Point,
    h: f64,
    nx: usize,
    ny: usize,
    /// Parent cell in the search tree; `u32::MAX` marks unreached.
    parent: Vec<u32>,
    start: usize,
    center: Point,
}

impl Raster {
    pub fn new(domain: &JordanDomain, z: Point, delta: f64, opt: RasterOptions) -> Result<Raster> {
        let (lo, hi) = domain.boundary().bbox();
        let side = (hi.re - lo.re).max(hi.im - lo.im);
        let h = (delta / opt.cells_per_radius).max(side / opt.max_side as f64);
        let nx = ((hi.re - lo.re) / h).ceil() as usize + 3;
        let ny = ((hi.im - lo.im) / h).ceil() as usize + 3;
        let origin = lo - Complex64::new(h, h);
        let mut inside = vec![false; nx * ny];
        let curve = domain.boundary();
        let mut rows: Vec<Vec<f64>> = vec![Vec::new(); ny];
        for s in 0..curve.segment_count() {
            let (a, b) = curve.segment(s);
            let (a, b) = if a.im <= b.im { (a, b) } else { (b, a) };
            let j0 = ((a.im - origin.im) / h - 0.5).ceil().max(0.0) as usize;
            let j1 = (((b.im - origin.im) / h - 0.5).ceil().max(0.0) as usize).min(ny);
            for (j, row) in rows.iter_mut().enumerate().take(j1).skip(j0) {
                let y = origin.im + (j as f64 + 0.5) * h;
                if y >= a.im && y < b.im {
                    let t = (y - a.im) / (b.im - a.im);
                    row.push(a.re + t * (b.re - a.re));
                }
            }
        }
        let margin = delta + 0.75 * h;
        for (j, row) in rows.iter_mut().enumerate() {
            row.sort_by(f64::total_cmp);
            for pair in row.chunks(2) {
                if pair.len() < 2 {
                    continue;
                }
                let i0 = ((pair[0] - origin.re) / h - 0.5).ceil().max(0.0) as usize;
                let i1 = (((pair[1] - origin.re) / h - 0.5).ceil().max(0.0) as usize).min(nx);
                for i in i0..i1 {
                    let c = origin + Complex64::new((i as f64 + 0.5) * h, (j as f64 + 0.5) * h);
                    if (c - z).norm() > margin {
                        inside[j * nx + i] = true;
                    }
                }
            }
        }
        let z0 = domain.basepoint();
        let cell_of = |p: Point| -> Option<usize> {
            let i = ((p.re - origin.re) / h).floor();
            let j = ((p.im - origin.im) / h).floor();
            (i >= 0.0 && j >= 0.0 && (i as usize) < nx && (j as usize) < ny).then(|| j as usize * nx + i as usize)
        };
        let start = cell_of(z0)
            .filter(|&c| inside[c])
            .ok_or_else(|| LabError::NoPath("basepoint cell not inside the raster".into()))?;
        let mut parent = vec![u32::MAX; nx * ny];
        parent[start] = start as u32;
        let mut queue = VecDeque::from([start]);
        while let Some(c) = queue.pop_front() {
            let (i, j) = ((c % nx) as i64, (c / nx) as i64);
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    let (a, b) = (i + di, j + dj);
                    if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                        continue;
                    }
                    let n = b as usize * nx + a as usize;
                    if inside[n] && parent[n] == u32::MAX {
                        parent[n] = c as u32;
                        queue.push_back(n);
                    }
                }
            }
        }
        Ok(Raster { origin, h, nx, ny, parent, start, center: z })
    }

    pub fn cell_size(&self) -> f64 {
        self.h
    }

    fn cell_of(&self, p: Point) -> Option<usize> {
        let i = ((p.re - self.origin.re) / self.h).floor();
        let j = ((p.im - self.origin.im) / self.h).floor();
        (i >= 0.0 && j >= 0.0 && (i as usize) < self.nx && (j as usize) < self.ny)
            .then(|| j as usize * self.nx + i as usize)
    }

    fn cell_center(&self, c: usize) -> Point {
        self.origin + Complex64::new(((c % self.nx) as f64 + 0.5) * self.h, ((c / self.nx) as f64 + 0.5) * self.h)
    }

    pub fn reached(&self, p: Point) -> bool {
        self.cell_of(p).is_some_and(|c| self.parent[c] != u32::MAX)
    }

    /// Reached cell next to the circle point `y`, searching a small neighbourhood.
    fn target_cell(&self, y: Point) -> Option<usize> {
        let out = (y - self.center) / (y - self.center).norm();
        let probe = y + out * (0.9 * self.h);
        let c = self.cell_of(probe)?;
        if self.parent[c] != u32::MAX {
            return Some(c);
        }
        let (i, j) = ((c % self.nx) as i64, (c / self.nx) as i64);
        let mut best: Option<(f64, usize)> = None;
        for dj in -3..=3i64 {
            for di in -3..=3i64 {
                let (a, b) = (i + di, j + dj);
                if a < 0 || b < 0 || a >= self.nx as i64 || b >= self.ny as i64 {
                    continue;
                }
                let n = b as usize * self.nx + a as usize;
                if self.parent[n] != u32::MAX {
                    let d = (self.cell_center(n) - y).norm();
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, n));
                    }
                }
            }
        }
        best.map(|(_, n)| n)
    }

    /// Continuous argument of `y - z` along the grid path from the basepoint.
    pub fn path_arg(&self, z0: Point, y: Point) -> Result<f64> {
        let target = self
            .target_cell(y)
            .ok_or_else(|| LabError::NoPath(format!("gate point {y} not reachable on the raster")))?;
        let mut cells = vec![target];
        let mut c = target;
        while c != self.start {
            c = self.parent[c] as usize;
            cells.push(c);
        }
        cells.reverse();
        let z = self.center;
        let mut prev = z0;
        let mut arg = (z0 - z).arg();
        for &c in &cells {
            let p = self.cell_center(c);
            arg += angle_increment(prev, p, z);
            prev = p;
        }
        arg += angle_increment(prev, y, z);
        Ok(arg)
    }

    /// Minimum path argument over `samples` points per gate.
    pub fn path_log_rot(&self, domain: &JordanDomain, comp: &TruncatedComponent, samples: usize) -> Result<f64> {
        let z0 = domain.basepoint();
        let mut best = f64::INFINITY;
        for g in &comp.gates {
            for k in 0..samples {
                let frac = if samples == 1 { 0.5 } else { k as f64 / (samples - 1) as f64 };
                let th = g.start_angle - g.sweep * frac;
                let y = comp.center + Complex64::from_polar(comp.radius, th);
                match self.path_arg(z0, y) {
                    Ok(a) => best = best.min(a),
                    // Endpoints may sit in unresolved slivers; interior samples decide.
                    Err(_) if k == 0 || k + 1 == samples => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(LabError::NoPath("no gate sample reachable".into()))
        }
    }

    /// Flood-fill gate count: maximal angular runs of reached cells on the
    /// circle of radius `radius + 1.5 h`.
    pub fn gate_runs(&self, radius: f64, samples: usize) -> usize {
        let rr = radius + 1.5 * self.h;
        let hits: Vec<bool> = (0..samples)
            .map(|k| self.reached(self.center + Complex64::from_polar(rr, 2.0 * PI * k as f64 / samples as f64)))
            .collect();
        if hits.iter().all(|&b| b) {
            return 1;
        }
        (0..samples).filter(|&k| hits[k] && !hits[(k + samples - 1) % samples]).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Provenance;

    fn c(a: f64, b: f64) -> Point {
        Complex64::new(a, b)
    }

    fn square() -> JordanDomain {
        let v = vec![c(-1., -1.), c(1., -1.), c(1., 1.), c(-1., 1.)];
        JordanDomain::new(Polyline::new(v, true).unwrap(), c(0., 0.), Provenance::Custom("square".into())).unwrap()
    }

    #[test]
    fn square_edge_bite_has_one_gate() {
        let d = square();
        let comp = truncated_component(&d, c(0., -1.), 0.1).unwrap();
        assert_eq!(comp.gates.len(), 1);
        assert!(matches!(comp.anchor, Anchor::Gate { .. }));
        // Gate runs from angle 0 clockwise... via the top half: args in (0, π).
        let g = comp.gates[0];
        assert!((g.sweep - PI).abs() < 1e-9);
        assert!((g.arg_start - PI).abs() < 1e-9 && g.arg_end.abs() < 1e-9);
        assert!(comp.log_rot().abs() < 1e-9);
    }

    #[test]
    fn corner_rotation_is_bounded() {
        let d = square();
        let v = rot_point(&d, c(1., 1.), 0.2, RotationMethod::BoundaryTracking).unwrap();
        // Gate spans angles from -π/2 back to -π, the lower-left quadrant.
        assert!((v.log_rot + PI).abs() < 1e-9, "{}", v.log_rot);
        assert!(v.log_rot.abs() <= PI + 3.0 * PI);
    }

    #[test]
    fn swallowed_basepoint() {
        assert_eq!(
            truncated_component(&square(), c(1., 0.), 1.5).unwrap_err(),
            LabError::BasepointSwallowed
        );
    }

    #[test]
    fn outer_boundary_is_closed_polyline() {
        let d = square();
        let comp = truncated_component(&d, c(0.3, 1.), 0.25).unwrap();
        let p = comp.outer_boundary(&d, 0.05).unwrap();
        assert!(p.signed_area() > 0.0);
        assert!(p.signed_area() < 4.0);
    }

    #[test]
    fn path_integral_agrees_on_square() {
        let d = square();
        for (z, r) in [(c(0., -1.), 0.3), (c(1., 0.4), 0.5), (c(-1., 1.), 0.7)] {
            let a = rot_point(&d, z, r, RotationMethod::BoundaryTracking).unwrap();
            let b = rot_point(&d, z, r, RotationMethod::PathIntegral).unwrap();
            assert!((a.log_rot - b.log_rot).abs() < 0.1, "{} vs {}", a.log_rot, b.log_rot);
        }
    }

    #[test]
    fn reflection_negates_within_two_bounds() {
        let v = vec![c(-1., -1.), c(1., -1.), c(0.4, 0.2), c(1., 1.), c(-1., 1.)];
        let d = JordanDomain::new(Polyline::new(v, true).unwrap(), c(-0.5, 0.), Provenance::Custom("notch".into())).unwrap();
        let r = d.reflect();
        for (z, rad) in [(c(1., 1.), 0.2), (c(0.4, 0.2), 0.3), (c(0., -1.), 0.25), (c(0.7, -0.4), 0.2)] {
            let a = rot_point(&d, z, rad, RotationMethod::BoundaryTracking).unwrap();
            let b = rot_point(&r, z.conj(), rad, RotationMethod::BoundaryTracking).unwrap();
            let bound = a.additive_error_bound + b.additive_error_bound;
            assert!((a.log_rot + b.log_rot).abs() <= bound + 1e-9, "{z}: {} vs {}", a.log_rot, b.log_rot);
        }
    }

    #[test]
    fn ineligible_far_disk() {
        let d = square();
        let b = Disk::new(c(0., 0.), 0.3).unwrap();
        assert!(matches!(rot_disk(&d, &b, RotationMethod::BoundaryTracking), Err(LabError::Ineligible { .. })));
    }
}
