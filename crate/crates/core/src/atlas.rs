//! Domains with closed-form Riemann maps `φ: D → Ω`, `φ(0) = 0`.
//!
//! Wedges and spiral wedges use `φ(z) = 1 - (1 - z)^c` with `c = α + iβ`,
//! principal branch. Then `log φ′(z) = log c + (c - 1) Log(1 - z)`, so
//! `arg φ′` comes straight from the exponent, with no unwrapping.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::domain::{JordanDomain, Provenance};
use crate::error::{LabError, Result};
use crate::geometry::{self, Point, PolyPos, Polyline};
use crate::rotation::{self, RotationMethod, RotationValue};

/// Uniform parameter points on the boundary before tip refinement.
pub const BASE_RESOLUTION: usize = 1 << 14;
/// Ratio between consecutive parameters in the graded mesh near the tip.
pub const GRADING: f64 = 1.0 + 1.0 / 16.0;
/// Image distance to the tip below which the mesh stops refining.
pub const TIP_CUTOFF: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AtlasKind {
    Disk,
    Wedge { alpha: f64 },
    SpiralWedge { alpha: f64, beta: f64 },
}

impl AtlasKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AtlasKind::Disk => Ok(()),
            AtlasKind::Wedge { alpha } => {
                if (0.5..=1.5).contains(&alpha) {
                    Ok(())
                } else {
                    Err(LabError::InvalidParameter(format!("wedge alpha {alpha} outside [0.5, 1.5]")))
                }
            }
            AtlasKind::SpiralWedge { alpha, beta } => {
                if (0.6..=1.4).contains(&alpha) && beta.abs() <= 0.3 {
                    Ok(())
                } else {
                    Err(LabError::InvalidParameter(format!(
                        "spiral wedge (alpha, beta) = ({alpha}, {beta}) outside [0.6, 1.4] x [-0.3, 0.3]"
                    )))
                }
            }
        }
    }

    /// Exponent `c` of `1 - (1 - z)^c`; `None` for the disk.
    pub fn exponent(&self) -> Option<Complex64> {
        match *self {
            AtlasKind::Disk => None,
            AtlasKind::Wedge { alpha } => Some(Complex64::new(alpha, 0.0)),
            AtlasKind::SpiralWedge { alpha, beta } => Some(Complex64::new(alpha, beta)),
        }
    }

    pub fn describe(&self) -> String {
        match *self {
            AtlasKind::Disk => "disk".into(),
            AtlasKind::Wedge { alpha } => format!("wedge(alpha={alpha})"),
            AtlasKind::SpiralWedge { alpha, beta } => format!("spiral_wedge(alpha={alpha}, beta={beta})"),
        }
    }
}

/// Boundary arc of the unit circle: centre angle and length in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcOnCircle {
    pub center: f64,
    pub length: f64,
}

impl ArcOnCircle {
    pub fn new(center: f64, length: f64) -> Result<Self> {
        if !(length > 0.0 && length < PI) || !center.is_finite() {
            return Err(LabError::InvalidParameter(format!("arc length {length} outside (0, π)")));
        }
        Ok(ArcOnCircle { center, length })
    }

    pub fn start(&self) -> f64 {
        self.center - self.length / 2.0
    }

    pub fn end(&self) -> f64 {
        self.center + self.length / 2.0
    }

    /// `z_I = ζ_I (1 - λ₁(I))`.
    pub fn representing_point(&self) -> Result<Point> {
        if self.length >= 0.5 {
            return Err(LabError::ArcTooLong { length: self.length });
        }
        Ok(Complex64::from_polar(1.0 - self.length, self.center))
    }
}

pub fn representing_point(arc: &ArcOnCircle) -> Result<Point> {
    arc.representing_point()
}

/// Atlas domain with its graded boundary polyline.
#[derive(Clone, Debug)]
pub struct AtlasDomain {
    kind: AtlasKind,
    /// Boundary parameters `t ∈ [0, 2π)` of the polyline vertices, increasing.
    params: Vec<f64>,
    domain: JordanDomain,
}

fn check_disk(z: Point) -> Result<()> {
    if z.norm() >= 1.0 || !geometry::is_finite(z) {
        return Err(LabError::OutsideDisk { re: z.re, im: z.im });
    }
    Ok(())
}

impl AtlasDomain {
    pub fn new(kind: AtlasKind) -> Result<Self> {
        kind.validate()?;
        let params = boundary_params(&kind);
        let pts: Vec<Point> = params.iter().map(|&t| boundary_point(&kind, t)).collect();
        let poly = Polyline::new(pts, true)?;
        let domain = JordanDomain::new(
            poly,
            Complex64::new(0.0, 0.0),
            Provenance::Atlas { description: kind.describe() },
        )?;
        Ok(AtlasDomain { kind, params, domain })
    }

    pub fn kind(&self) -> AtlasKind {
        self.kind
    }

    pub fn domain(&self) -> &JordanDomain {
        &self.domain
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn phi(&self, z: Point) -> Result<Point> {
        check_disk(z)?;
        Ok(phi_unchecked(&self.kind, z))
    }

    pub fn phi_prime(&self, z: Point) -> Result<Point> {
        check_disk(z)?;
        Ok(match self.kind.exponent() {
            None => Complex64::new(1.0, 0.0),
            Some(c) => c * ((c - 1.0) * (Complex64::new(1.0, 0.0) - z).ln()).exp(),
        })
    }

    /// `log |φ′(z)|` from the exponent.
    pub fn log_abs_phi_prime(&self, z: Point) -> Result<f64> {
        Ok(self.log_phi_prime(z)?.re)
    }

    /// `arg φ′(z)` on the branch continuous in `D` with `arg φ′(0) ∈ (-π, π]`.
    pub fn arg_phi_prime(&self, z: Point) -> Result<f64> {
        Ok(self.log_phi_prime(z)?.im)
    }

    fn log_phi_prime(&self, z: Point) -> Result<Complex64> {
        check_disk(z)?;
        Ok(match self.kind.exponent() {
            None => Complex64::new(0.0, 0.0),
            Some(c) => c.ln() + (c - 1.0) * (Complex64::new(1.0, 0.0) - z).ln(),
        })
    }

    /// Harmonic measure from `φ(0)` of the image of a preimage arc.
    pub fn exact_harmonic_measure(&self, arc: &ArcOnCircle) -> f64 {
        arc.length / (2.0 * PI)
    }

    /// Position on the polyline of boundary parameter `t` (any real, taken mod 2π).
    pub fn position_of(&self, t: f64) -> PolyPos {
        let t = t.rem_euclid(2.0 * PI);
        let n = self.params.len();
        let k = self.params.partition_point(|&s| s <= t).max(1) - 1;
        let next = if k + 1 < n { self.params[k + 1] } else { 2.0 * PI };
        let u = ((t - self.params[k]) / (next - self.params[k])).clamp(0.0, 1.0);
        PolyPos::new(k, u)
    }

    /// Domain segments whose parameter interval meets `arc`.
    pub fn segments_of(&self, arc: &ArcOnCircle) -> Vec<usize> {
        let from = self.position_of(arc.start());
        let to = self.position_of(arc.end());
        let n = self.params.len();
        let mut out = vec![from.seg];
        let mut k = from.seg;
        while k != to.seg {
            k = (k + 1) % n;
            out.push(k);
        }
        out
    }

    /// Densely sampled exact image `φ(I)`.
    pub fn image_points(&self, arc: &ArcOnCircle, samples: usize) -> Vec<Point> {
        let samples = samples.max(2);
        let mut ts: Vec<f64> = (0..samples)
            .map(|i| arc.start() + arc.length * i as f64 / (samples - 1) as f64)
            .collect();
        // The tip is where the image bends; keep it if it is inside the arc.
        let tip = (arc.start() / (2.0 * PI)).ceil() * 2.0 * PI;
        if tip < arc.end() {
            ts.push(tip);
        }
        ts.iter().map(|&t| boundary_point(&self.kind, t)).collect()
    }

    /// Exact derivative data, the diameter proxy and the geometric rotation
    /// of the image arc at the point representing `arc`.
    pub fn main_lemma_probe(&self, arc: &ArcOnCircle) -> Result<MainLemmaProbe> {
        if arc.length >= 0.25 {
            return Err(LabError::ArcTooLong { length: arc.length });
        }
        let z = arc.representing_point()?;
        let lp = self.log_phi_prime(z)?;
        let image_diameter = geometry::diameter(&self.image_points(arc, 4097));
        let rot = rotation::rot_crosscut_between(
            &self.domain,
            self.position_of(arc.start()),
            self.position_of(arc.end()),
            RotationMethod::BoundaryTracking,
        )?;
        Ok(MainLemmaProbe {
            arc: *arc,
            representing_point: z,
            exact_abs_derivative: lp.re.exp(),
            exact_arg_derivative: lp.im,
            image_diameter,
            proxy_abs_derivative: image_diameter / arc.length,
            rot,
        })
    }
}

/// Main Lemma quantities at one arc.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct MainLemmaProbe {
    pub arc: ArcOnCircle,
    pub representing_point: Point,
    /// `|φ′(z_I)|`.
    pub exact_abs_derivative: f64,
    /// `arg φ′(z_I) = log |φ′(z_I)^{-i}|`.
    pub exact_arg_derivative: f64,
    pub image_diameter: f64,
    /// `diam(φ(I)) / λ₁(I)`.
    pub proxy_abs_derivative: f64,
    pub rot: RotationValue,
}

impl MainLemmaProbe {
    /// `log(proxy) / log(exact)` for the modulus.
    pub fn modulus_log_ratio(&self) -> f64 {
        self.proxy_abs_derivative.ln() / self.exact_abs_derivative.ln()
    }

    /// `log rot(C_I) / arg φ′(z_I)`.
    pub fn rotation_log_ratio(&self) -> f64 {
        self.rot.log_rot / self.exact_arg_derivative
    }
}

/// One dyadic row of an atlas check.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtlasRow {
    pub k: u32,
    pub probe: Option<MainLemmaProbe>,
    pub error: Option<String>,
}

/// Modulus and rotation ratios over tip-centred arcs `λ₁(I) = 2^{-k}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtlasCheck {
    pub kind: AtlasKind,
    pub rows: Vec<AtlasRow>,
    pub modulus_k: u32,
    pub modulus_ratio: Option<f64>,
    /// Least-squares slope of `ln(proxy/exact)` against `k`.
    pub modulus_trend: Option<f64>,
    pub modulus_passed: bool,
    pub rotation_k: u32,
    /// `None` when `arg φ′` vanishes on the probe arcs.
    pub rotation_ratio: Option<f64>,
    pub rotation_passed: Option<bool>,
}

impl AtlasCheck {
    pub fn passed(&self) -> bool {
        self.modulus_passed && self.rotation_passed.unwrap_or(true)
    }
}

/// Runs [`AtlasDomain::main_lemma_probe`] at `λ₁(I) = 2^{-k}` centred on the
/// tip. The modulus ratio must lie in `[0.9, 1.1]` at `modulus_k` with trend
/// at most `0.1`; the rotation ratio in `[0.85, 1.15]` at `rotation_k`.
pub fn atlas_check(kind: AtlasKind, ks: &[u32], modulus_k: u32, rotation_k: u32) -> Result<AtlasCheck> {
    let ad = AtlasDomain::new(kind)?;
    let rows: Vec<AtlasRow> = ks
        .iter()
        .map(|&k| match ArcOnCircle::new(0.0, 2f64.powi(-(k as i32))).and_then(|a| ad.main_lemma_probe(&a)) {
            Ok(p) => AtlasRow { k, probe: Some(p), error: None },
            Err(e) => AtlasRow { k, probe: None, error: Some(e.to_string()) },
        })
        .collect();
    let at = |k: u32| rows.iter().find(|r| r.k == k).and_then(|r| r.probe);
    let modulus_ratio = at(modulus_k).map(|p| p.modulus_log_ratio());
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.probe.map(|p| (r.k as f64, (p.proxy_abs_derivative / p.exact_abs_derivative).ln())))
        .collect();
    let modulus_trend = (pts.len() >= 3).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    let modulus_passed = modulus_ratio.is_some_and(|r| (0.9..=1.1).contains(&r)) && modulus_trend.is_some_and(|t| t.abs() <= 0.1);
    let rot_probe = at(rotation_k);
    let rotation_ratio = rot_probe.filter(|p| p.exact_arg_derivative.abs() > 1e-12).map(|p| p.rotation_log_ratio());
    let rotation_passed = match kind {
        AtlasKind::SpiralWedge { .. } => Some(rotation_ratio.is_some_and(|r| (0.85..=1.15).contains(&r))),
        _ => None,
    };
    Ok(AtlasCheck { kind, rows, modulus_k, modulus_ratio, modulus_trend, modulus_passed, rotation_k, rotation_ratio, rotation_passed })
}

fn phi_unchecked(kind: &AtlasKind, z: Point) -> Point {
    match kind.exponent() {
        None => z,
        Some(c) => Complex64::new(1.0, 0.0) - (c * (Complex64::new(1.0, 0.0) - z).ln()).exp(),
    }
}

/// `φ(e^{it})`, evaluated through `1 - e^{it} = 2 sin(t/2) e^{i(t/2 - π/2)}`
/// for `t ∈ [0, 2π)` so that the tip `t = 0` is exact.
pub fn boundary_point(kind: &AtlasKind, t: f64) -> Point {
    let t = t.rem_euclid(2.0 * PI);
    match kind.exponent() {
        None => Complex64::from_polar(1.0, t),
        Some(c) => {
            let s = 2.0 * (t / 2.0).sin();
            if s <= 0.0 {
                return Complex64::new(1.0, 0.0);
            }
            let log = Complex64::new(s.ln(), t / 2.0 - PI / 2.0);
            Complex64::new(1.0, 0.0) - (c * log).exp()
        }
    }
}

fn boundary_params(kind: &AtlasKind) -> Vec<f64> {
    let h = 2.0 * PI / BASE_RESOLUTION as f64;
    let mut ts: Vec<f64> = (0..BASE_RESOLUTION).map(|k| k as f64 * h).collect();
    if let Some(c) = kind.exponent() {
        // |φ(e^{it}) - 1| ≈ |t|^α near the tip.
        let t_min = TIP_CUTOFF.powf(1.0 / c.re);
        let mut t = 2.0 * PI / GRADING;
        while t > t_min {
            ts.push(t);
            ts.push(2.0 * PI - t);
            t /= GRADING;
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    ts
}
