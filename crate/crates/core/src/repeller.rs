//! Markov similarity repellers.
//!
//! A [`RepellerSpec`] lists contracting similarities `f_j(z) = t_j + s_j e^{iθ_j} z`
//! that map the base segment `[A, B]` onto consecutive links of a generator
//! chain, an adjacency relation on letters, and a closure recipe that turns
//! the repeller arc into a Jordan curve. Generation `k` replaces the base
//! segment by the images `f_w([A, B])` of all admissible words of length `k`,
//! in lexicographic order.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

use crate::domain::{JordanDomain, Provenance};
use crate::error::{LabError, Result};
use crate::geometry::{self, Disk, Point, Polyline};
use crate::rng::{StreamFactory, AUX_STREAM_BASE};

/// Orientation-preserving similarity `z ↦ translation + scale·e^{i angle}·z`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Similarity {
    pub scale: f64,
    pub angle: f64,
    pub translation: Point,
}

impl Similarity {
    #[inline]
    pub fn linear(&self) -> Complex64 {
        Complex64::from_polar(self.scale, self.angle)
    }

    #[inline]
    pub fn apply(&self, z: Point) -> Point {
        self.translation + self.linear() * z
    }
}

/// How the repeller arc from `A` to `B` is closed into a Jordan curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Closure {
    /// Two further copies of the arc on the other sides of an equilateral
    /// triangle over `[A, B]`. The apex sits to the right of `A → B`, or to
    /// the left when `mirrored`.
    Snowflake { mirrored: bool },
    /// Straight return path through the listed points from `B` back to `A`.
    Polygon { points: Vec<Point> },
}

/// A nonempty letter sequence; letters are 0-based internally and printed 1-based.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word(pub Vec<u8>);

impl Word {
    pub fn new(letters: Vec<u8>) -> Self {
        Word(letters)
    }

    /// Builds a word from 1-based letters.
    pub fn from_one_based(letters: &[usize]) -> Self {
        Word(letters.iter().map(|&l| (l - 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[u8] {
        &self.0
    }

    pub fn last(&self) -> u8 {
        *self.0.last().expect("nonempty word")
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }

    /// Letter multiplicities over an alphabet of size `n`.
    pub fn counts(&self, n: usize) -> Vec<u32> {
        let mut c = vec![0u32; n];
        for &l in &self.0 {
            c[l as usize] += 1;
        }
        c
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.0.iter().map(|l| (l + 1).to_string()).collect();
        write!(f, "{}", s.join("."))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepellerSpec {
    pub name: String,
    pub maps: Vec<Similarity>,
    /// `adjacency[j]` lists the letters allowed after letter `j`.
    pub adjacency: Vec<Vec<usize>>,
    pub base: [Point; 2],
    pub closure: Closure,
    pub basepoint: Option<Point>,
    pub k_max: usize,
}

impl RepellerSpec {
    /// Builds the maps from a generator chain: link `j` has length
    /// `scales[j]·|B - A|` and direction `angles[j]` relative to `B - A`.
    pub fn from_chain(
        name: &str,
        scales: &[f64],
        angles: &[f64],
        adjacency: Option<Vec<Vec<usize>>>,
        base: [Point; 2],
        closure: Closure,
    ) -> Result<Self> {
        if scales.len() != angles.len() {
            return Err(LabError::InvalidSpec(format!(
                "{} scales but {} angles",
                scales.len(),
                angles.len()
            )));
        }
        let [a, b] = base;
        let mut p = a;
        let mut maps = Vec::with_capacity(scales.len());
        for (&s, &th) in scales.iter().zip(angles) {
            let lin = Complex64::from_polar(s, th);
            maps.push(Similarity {
                scale: s,
                angle: th,
                translation: p - lin * a,
            });
            p += lin * (b - a);
        }
        let n = scales.len();
        let spec = RepellerSpec {
            name: name.to_string(),
            maps,
            adjacency: adjacency.unwrap_or_else(|| vec![(0..n).collect(); n]),
            base,
            closure,
            basepoint: None,
            k_max: 8,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn letters(&self) -> usize {
        self.maps.len()
    }

    /// Expansion rate `D = 1 / max s_j`.
    pub fn expansion_rate(&self) -> f64 {
        1.0 / self.maps.iter().map(|m| m.scale).fold(0.0, f64::max)
    }

    pub fn is_full_shift(&self) -> bool {
        let n = self.letters();
        self.adjacency.iter().all(|a| a.len() == n)
    }

    pub fn scales(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.scale).collect()
    }

    pub fn angles(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.angle).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.letters();
        if n < 2 {
            return Err(LabError::InvalidSpec("alphabet needs at least 2 letters".into()));
        }
        for (j, m) in self.maps.iter().enumerate() {
            if !(m.scale > 0.0) || !m.scale.is_finite() {
                return Err(LabError::InvalidSpec(format!("scale of letter {} must be positive", j + 1)));
            }
            if m.scale >= 1.0 {
                return Err(LabError::NotExpanding { letter: j + 1, scale: m.scale });
            }
            if !(m.angle > -PI && m.angle <= PI) {
                return Err(LabError::InvalidSpec(format!("angle of letter {} outside (-pi, pi]", j + 1)));
            }
        }
        if self.adjacency.len() != n || self.adjacency.iter().any(|a| a.is_empty() || a.iter().any(|&k| k >= n)) {
            return Err(LabError::InvalidSpec("adjacency must list valid letters for every letter".into()));
        }
        if !primitive(&self.adjacency) {
            return Err(LabError::NotMixing);
        }
        let [a, b] = self.base;
        if a == b {
            return Err(LabError::InvalidSpec("base arc endpoints coincide".into()));
        }
        // Markov tiling at generation 1: links chain from A to B.
        let eps = 1e-9 * (b - a).norm();
        let mut p = a;
        for (j, m) in self.maps.iter().enumerate() {
            if (m.apply(a) - p).norm() > eps {
                return Err(LabError::NotMarkov(format!("link {} does not start where link {} ends", j + 1, j)));
            }
            p = m.apply(b);
        }
        if (p - b).norm() > eps {
            return Err(LabError::NotMarkov(format!(
                "generator chain ends at {p} instead of {b}"
            )));
        }
        Ok(())
    }

    pub fn check_word(&self, w: &Word) -> Result<()> {
        if w.is_empty() {
            return Err(LabError::Inadmissible("empty word".into()));
        }
        let n = self.letters();
        if w.0.iter().any(|&l| l as usize >= n) {
            return Err(LabError::Inadmissible(w.to_string()));
        }
        for pair in w.0.windows(2) {
            if !self.adjacency[pair[0] as usize].contains(&(pair[1] as usize)) {
                return Err(LabError::Inadmissible(w.to_string()));
            }
        }
        Ok(())
    }

    pub fn allows(&self, from: u8, to: u8) -> bool {
        self.adjacency[from as usize].contains(&(to as usize))
    }

    /// Composite similarity `f_{w_1} ∘ … ∘ f_{w_n}`.
    pub fn compose(&self, w: &Word) -> Similarity {
        let mut lin = Complex64::new(1.0, 0.0);
        let mut t = Complex64::new(0.0, 0.0);
        for &l in &w.0 {
            let m = &self.maps[l as usize];
            t += lin * m.translation;
            lin *= m.linear();
        }
        Similarity {
            scale: lin.norm(),
            angle: lin.arg(),
            translation: t,
        }
    }

    /// Renormalized diameter `Π s_{w_i}`.
    pub fn renormalized_diameter(&self, w: &Word) -> f64 {
        w.0.iter().map(|&l| self.maps[l as usize].scale).product()
    }

    /// Admissible words of length `len` in lexicographic order.
    pub fn words(&self, len: usize) -> Vec<Word> {
        let mut out = Vec::new();
        if len == 0 {
            return out;
        }
        let mut cur = Vec::with_capacity(len);
        self.words_rec(len, &mut cur, &mut out);
        out
    }

    fn words_rec(&self, len: usize, cur: &mut Vec<u8>, out: &mut Vec<Word>) {
        if cur.len() == len {
            out.push(Word(cur.clone()));
            return;
        }
        let n = self.letters();
        for l in 0..n as u8 {
            if let Some(&prev) = cur.last() {
                if !self.allows(prev, l) {
                    continue;
                }
            }
            cur.push(l);
            self.words_rec(len, cur, out);
            cur.pop();
        }
    }

    /// Mirror image: angles negated, base and closure conjugated.
    pub fn reflect(&self) -> RepellerSpec {
        let maps = self
            .maps
            .iter()
            .map(|m| Similarity {
                scale: m.scale,
                angle: if m.angle == PI { PI } else { -m.angle },
                translation: m.translation.conj(),
            })
            .collect();
        RepellerSpec {
            name: format!("{}~", self.name),
            maps,
            adjacency: self.adjacency.clone(),
            base: [self.base[0].conj(), self.base[1].conj()],
            closure: match &self.closure {
                Closure::Snowflake { mirrored } => Closure::Snowflake { mirrored: !mirrored },
                Closure::Polygon { points } => Closure::Polygon {
                    points: points.iter().map(|p| p.conj()).collect(),
                },
            },
            basepoint: self.basepoint.map(|p| p.conj()),
            k_max: self.k_max,
        }
    }

    fn apex(&self, mirrored: bool) -> Point {
        let [a, b] = self.base;
        let turn = if mirrored { PI / 3.0 } else { -PI / 3.0 };
        a + (b - a) * Complex64::from_polar(1.0, turn)
    }

    pub fn default_basepoint(&self) -> Result<Point> {
        if let Some(p) = self.basepoint {
            return Ok(p);
        }
        match &self.closure {
            Closure::Snowflake { mirrored } => {
                let [a, b] = self.base;
                Ok((a + b + self.apex(*mirrored)) / 3.0)
            }
            Closure::Polygon { .. } => Err(LabError::InvalidSpec(
                "polygon closure needs an explicit basepoint".into(),
            )),
        }
    }

    /// Prefractal arc of generation `k` with the word of every segment.
    pub fn arc(&self, k: usize) -> Result<PrefractalArc> {
        if k > self.k_max {
            return Err(LabError::GenerationTooDeep { requested: k, max: self.k_max });
        }
        let [a, b] = self.base;
        if k == 0 {
            return Ok(PrefractalArc { generation: 0, points: vec![a, b], words: vec![Word(vec![])] });
        }
        let words = self.words(k);
        let mut points = Vec::with_capacity(words.len() + 1);
        let eps = 1e-9 * (b - a).norm() * self.maps.iter().map(|m| m.scale).fold(1.0, f64::min).powi(k as i32);
        let mut prev_end: Option<Point> = None;
        for w in &words {
            let f = self.compose(w);
            let s = f.apply(a);
            if let Some(e) = prev_end {
                if (e - s).norm() > eps.max(1e-15) {
                    return Err(LabError::NotMarkov(format!("cylinders before {w} do not join")));
                }
            }
            points.push(s);
            prev_end = Some(f.apply(b));
        }
        points.push(prev_end.unwrap_or(b));
        Ok(PrefractalArc { generation: k, points, words })
    }
}

fn primitive(adj: &[Vec<usize>]) -> bool {
    let n = adj.len();
    let m: Vec<Vec<bool>> = (0..n)
        .map(|i| (0..n).map(|j| adj[i].contains(&j)).collect())
        .collect();
    let mut p = m.clone();
    let bound = (n - 1) * (n - 1) + 1;
    for _ in 0..bound {
        if p.iter().all(|r| r.iter().all(|&x| x)) {
            return true;
        }
        let mut q = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if p[i][k] {
                    for j in 0..n {
                        q[i][j] |= m[k][j];
                    }
                }
            }
        }
        p = q;
    }
    p.iter().all(|r| r.iter().all(|&x| x))
}

/// Presets.
pub mod presets {
    use super::*;

    fn unit_base() -> [Point; 2] {
        [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]
    }

    /// Classic Koch curve: four maps of scale 1/3.
    pub fn koch() -> RepellerSpec {
        RepellerSpec::from_chain(
            "koch",
            &[1.0 / 3.0; 4],
            &[0.0, PI / 3.0, -PI / 3.0, 0.0],
            None,
            unit_base(),
            Closure::Snowflake { mirrored: false },
        )
        .expect("koch preset is valid")
    }

    /// Koch generator with every link turned by `twist`; link lengths are
    /// adjusted so the chain still closes, which makes the scales unequal.
    pub fn twisted_koch(twist: f64) -> Result<RepellerSpec> {
        let b = twist.cos() / 3.0;
        let e = twist.sin() / 3f64.sqrt();
        RepellerSpec::from_chain(
            &format!("twisted_koch({twist})"),
            &[b, b - e, b + e, b],
            &[twist, PI / 3.0 + twist, -PI / 3.0 + twist, twist],
            None,
            unit_base(),
            Closure::Snowflake { mirrored: false },
        )
    }

    /// Koch-type curve with a 45° spike and four equal linear maps.
    pub fn carleson_linear() -> RepellerSpec {
        let th = PI / 4.0;
        let s = 1.0 / (2.0 + 2.0 * th.cos());
        RepellerSpec::from_chain(
            "carleson_linear",
            &[s; 4],
            &[0.0, th, -th, 0.0],
            None,
            unit_base(),
            Closure::Snowflake { mirrored: false },
        )
        .expect("carleson_linear preset is valid")
    }

    pub fn by_name(name: &str, twist: f64) -> Result<RepellerSpec> {
        match name {
            "koch" => Ok(koch()),
            "twisted_koch" => twisted_koch(twist),
            "carleson_linear" => Ok(carleson_linear()),
            other => Err(LabError::InvalidSpec(format!("unknown preset `{other}`"))),
        }
    }
}

/// Serializable description of a spec, as read from configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepellerConfig {
    pub name: String,
    pub scales: Vec<f64>,
    pub angles: Vec<f64>,
    #[serde(default)]
    pub adjacency: Option<Vec<Vec<usize>>>,
    #[serde(default)]
    pub base: Option<[[f64; 2]; 2]>,
    /// `snowflake`, `mirrored_snowflake` or `polygon`.
    #[serde(default = "default_closure")]
    pub closure: String,
    #[serde(default)]
    pub closure_points: Vec<[f64; 2]>,
    #[serde(default)]
    pub basepoint: Option<[f64; 2]>,
    #[serde(default)]
    pub k_max: Option<usize>,
}

fn default_closure() -> String {
    "snowflake".into()
}

fn pt(p: [f64; 2]) -> Point {
    Complex64::new(p[0], p[1])
}

impl RepellerConfig {
    /// Adjacency is given 1-based in configuration files.
    pub fn into_spec(self) -> Result<RepellerSpec> {
        let base = self.base.map(|[a, b]| [pt(a), pt(b)]).unwrap_or([
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ]);
        let closure = match self.closure.as_str() {
            "snowflake" => Closure::Snowflake { mirrored: false },
            "mirrored_snowflake" => Closure::Snowflake { mirrored: true },
            "polygon" => Closure::Polygon {
                points: self.closure_points.iter().map(|&p| pt(p)).collect(),
            },
            other => return Err(LabError::InvalidSpec(format!("unknown closure `{other}`"))),
        };
        let adjacency = match self.adjacency {
            Some(adj) => {
                let mut out = Vec::with_capacity(adj.len());
                for row in adj {
                    if row.contains(&0) {
                        return Err(LabError::InvalidSpec("adjacency letters are 1-based".into()));
                    }
                    out.push(row.iter().map(|k| k - 1).collect());
                }
                Some(out)
            }
            None => None,
        };
        let mut spec = RepellerSpec::from_chain(&self.name, &self.scales, &self.angles, adjacency, base, closure)?;
        spec.basepoint = self.basepoint.map(pt);
        if let Some(k) = self.k_max {
            spec.k_max = k;
        }
        Ok(spec)
    }
}

/// Generation-`k` repeller arc from `A` to `B`.
#[derive(Clone, Debug)]
pub struct PrefractalArc {
    pub generation: usize,
    /// `words.len() + 1` vertices.
    pub points: Vec<Point>,
    /// Word of each segment, lexicographic.
    pub words: Vec<Word>,
}

impl PrefractalArc {
    /// Segment range `[lo, hi)` of the cylinder of `w` (arc order).
    pub fn cylinder_range(&self, w: &Word) -> Option<(usize, usize)> {
        let d = w.len();
        if d > self.generation {
            return None;
        }
        let lo = self.words.partition_point(|x| x.0[..d] < w.0[..]);
        let hi = self.words.partition_point(|x| x.0[..d] <= w.0[..]);
        (lo < hi).then_some((lo, hi))
    }
}

/// Cylinder arc of a word on a prefractal.
#[derive(Clone, Debug)]
pub struct Cylinder {
    pub word: Word,
    pub arc: Polyline,
    pub raw_diameter: f64,
    pub renormalized_diameter: f64,
}

/// Prefractal Jordan domain together with its repeller-arc bookkeeping.
#[derive(Clone, Debug)]
pub struct RepellerDomain {
    pub spec: RepellerSpec,
    pub arc: PrefractalArc,
    pub domain: JordanDomain,
    /// Vertices summed over the three (or one) closing arcs, endpoints counted per arc.
    pub arc_vertex_count: usize,
}

/// Builds the generation-`k` prefractal domain.
pub fn generate_prefractal(spec: &RepellerSpec, k: usize) -> Result<RepellerDomain> {
    let arc = spec.arc(k)?;
    let [a, b] = spec.base;
    let mut closed: Vec<Point> = arc.points[..arc.points.len() - 1].to_vec();
    let arc_vertex_count = match &spec.closure {
        Closure::Snowflake { mirrored } => {
            let c = spec.apex(*mirrored);
            for (p, q) in [(b, c), (c, a)] {
                let m = (q - p) / (b - a);
                closed.extend(arc.points[..arc.points.len() - 1].iter().map(|z| p + m * (z - a)));
            }
            3 * arc.points.len()
        }
        Closure::Polygon { points } => {
            closed.push(b);
            closed.extend(points.iter().copied());
            arc.points.len() + points.len()
        }
    };
    let poly = Polyline::new(closed, true)?;
    let domain = JordanDomain::new(
        poly,
        spec.default_basepoint()?,
        Provenance::Repeller { name: spec.name.clone(), generation: k },
    )?;
    Ok(RepellerDomain { spec: spec.clone(), arc, domain, arc_vertex_count })
}

impl RepellerDomain {
    pub fn generation(&self) -> usize {
        self.arc.generation
    }

    /// Number of segments on the repeller arc.
    pub fn arc_segments(&self) -> usize {
        self.arc.words.len()
    }

    /// Domain segment carrying arc segment `i`.
    pub fn domain_segment(&self, i: usize) -> usize {
        let n = self.domain.segment_count();
        if self.domain.reoriented() {
            (2 * n - 2 - i) % n
        } else {
            i
        }
    }

    /// Domain segments `[lo, hi)` of a cylinder, contiguous in domain order.
    pub fn cylinder_segments(&self, w: &Word) -> Result<(usize, usize)> {
        self.spec.check_word(w)?;
        let (lo, hi) = self
            .arc
            .cylinder_range(w)
            .ok_or_else(|| LabError::Inadmissible(format!("{w} deeper than generation")))?;
        let a = self.domain_segment(lo);
        let b = self.domain_segment(hi - 1);
        Ok((a.min(b), a.max(b) + 1))
    }

    /// All domain segments of the repeller arc.
    pub fn repeller_segments(&self) -> (usize, usize) {
        let a = self.domain_segment(0);
        let b = self.domain_segment(self.arc_segments() - 1);
        (a.min(b), a.max(b) + 1)
    }

    /// Word of depth `d` owning domain segment `seg`, if it lies on the arc.
    pub fn owner(&self, seg: usize, d: usize) -> Option<Word> {
        let (lo, hi) = self.repeller_segments();
        if seg < lo || seg >= hi || d > self.generation() {
            return None;
        }
        let i = if self.domain.reoriented() {
            let n = self.domain.segment_count();
            (2 * n - 2 - seg) % n
        } else {
            seg
        };
        Some(Word(self.arc.words[i].0[..d].to_vec()))
    }

    pub fn cylinder(&self, w: &Word) -> Result<Cylinder> {
        self.spec.check_word(w)?;
        let (lo, hi) = self
            .arc
            .cylinder_range(w)
            .ok_or_else(|| LabError::Inadmissible(format!("{w} deeper than generation")))?;
        let arc = Polyline::new(self.arc.points[lo..=hi].to_vec(), false)?;
        let raw_diameter = arc.diameter();
        Ok(Cylinder {
            word: w.clone(),
            arc,
            raw_diameter,
            renormalized_diameter: self.spec.renormalized_diameter(w),
        })
    }
}

/// Cylinder of `w` on the generation-`|w|` prefractal arc.
pub fn cylinder(spec: &RepellerSpec, w: &Word) -> Result<Cylinder> {
    spec.check_word(w)?;
    if w.len() > spec.k_max {
        return Err(LabError::GenerationTooDeep { requested: w.len(), max: spec.k_max });
    }
    let f = spec.compose(w);
    let [a, b] = spec.base;
    let arc = Polyline::new(vec![f.apply(a), f.apply(b)], false)?;
    let raw_diameter = arc.diameter();
    Ok(Cylinder {
        word: w.clone(),
        arc,
        raw_diameter,
        renormalized_diameter: spec.renormalized_diameter(w),
    })
}

/// Three-point ratio maximized over `w` on the smaller-diameter arc between
/// vertices `i` and `j` of a closed curve.
pub fn three_point_ratio(curve: &Polyline, i: usize, j: usize) -> f64 {
    let v = curve.vertices();
    let (i, j) = (i.min(j), i.max(j));
    let w1 = v[i];
    let w2 = v[j];
    let d12 = (w1 - w2).norm();
    if d12 == 0.0 {
        return 1.0;
    }
    let inner = &v[i..=j];
    let outer: Vec<Point> = v[j..].iter().chain(v[..=i].iter()).copied().collect();
    let arc: &[Point] = if !curve.is_closed() || geometry::diameter(inner) <= geometry::diameter(&outer) {
        inner
    } else {
        &outer
    };
    arc.iter()
        .map(|&w| ((w1 - w).norm() + (w2 - w).norm()) / d12)
        .fold(1.0, f64::max)
}

/// Estimated quasicircle constant from `samples` random vertex pairs.
/// Pair `k` is drawn from stream `k`, so more samples never lower the value.
pub fn dilatation_estimate(domain: &JordanDomain, samples: usize, seed: u64) -> f64 {
    let curve = domain.boundary();
    let n = curve.len();
    let f = StreamFactory::new(seed);
    (0..samples)
        .map(|k| {
            let mut rng = f.stream(AUX_STREAM_BASE + k as u64);
            let i = rng.random_range(0..n);
            let mut j = rng.random_range(0..n);
            if j == i {
                j = (i + 1) % n;
            }
            three_point_ratio(curve, i, j)
        })
        .fold(1.0, f64::max)
}

/// Splits a curve into consecutive sub-arcs of diameter `delta` (the last may
/// be smaller). Closed curves are traversed from vertex 0 back to vertex 0.
pub fn greedy_arc_partition(curve: &Polyline, delta: f64, l: f64) -> Result<Vec<Polyline>> {
    let mut pts = curve.vertices().to_vec();
    if curve.is_closed() {
        pts.push(pts[0]);
    }
    let diam = geometry::diameter(&pts);
    if !(delta > diam / l && delta < diam) {
        return Err(LabError::DeltaOutOfRange { delta, lower: diam / l, upper: diam });
    }
    let mut pieces = Vec::new();
    let mut piece: Vec<Point> = vec![pts[0]];
    let mut k = 1;
    let mut start = pts[0];
    while k < pts.len() {
        let q = pts[k];
        let p = start;
        let d = q - p;
        // First parameter u in (0, 1] where some piece point reaches distance delta.
        let mut cut: Option<f64> = None;
        if (q - p).norm() > 0.0 {
            for &x in &piece {
                if (q - x).norm() >= delta {
                    let f = p - x;
                    let qa = d.norm_sqr();
                    let qb = 2.0 * geometry::dot(f, d);
                    let qc = f.norm_sqr() - delta * delta;
                    let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
                    let u = ((-qb + disc.sqrt()) / (2.0 * qa)).clamp(0.0, 1.0);
                    cut = Some(cut.map_or(u, |c: f64| c.min(u)));
                }
            }
        }
        match cut {
            Some(u) => {
                let whole = u >= 1.0 - 1e-12;
                let r = if whole { q } else { p + d * u };
                piece.push(r);
                piece.dedup();
                if piece.len() >= 2 {
                    pieces.push(Polyline::new(std::mem::take(&mut piece), false)?);
                } else {
                    piece.clear();
                }
                piece.push(r);
                start = r;
                if whole {
                    k += 1;
                }
            }
            None => {
                piece.push(q);
                start = q;
                k += 1;
            }
        }
    }
    piece.dedup();
    if piece.len() >= 2 {
        pieces.push(Polyline::new(piece, false)?);
    }
    Ok(pieces)
}

/// Number of connected components of `∂Ω ∩ L·B` that meet `B`.
pub fn components_meeting(domain: &JordanDomain, b: &Disk, l: f64) -> usize {
    let big = b.scaled(l);
    let curve = domain.boundary();
    let eps = domain.eps();
    let mut segs = Vec::new();
    domain.index().query_circle(big.center, big.radius, eps, &mut segs);
    let mut crossings = Vec::new();
    segs.sort_unstable();
    for &s in &segs {
        let (p, q) = curve.segment(s);
        geometry::circle_segment_crossings(p, q, s, &big, eps, &mut crossings);
    }
    crossings.retain(|c| !c.degenerate);
    if crossings.is_empty() {
        let inside = big.contains(curve.vertex(0));
        return usize::from(inside && domain.dist_to_boundary(b.center) < b.radius);
    }
    // Each inside run starts at an entering crossing and ends at the next exit.
    let m = crossings.len();
    let start = crossings.iter().position(|c| c.entering).unwrap_or(0);
    let mut count = 0;
    for r in 0..m {
        let e = &crossings[(start + r) % m];
        if !e.entering {
            continue;
        }
        let x = &crossings[(start + r + 1) % m];
        let pts = curve.sub_arc_points(e.pos, x.pos);
        let meets = pts.windows(2).any(|w| geometry::segment_distance_sq(b.center, w[0], w[1]).0 < b.radius * b.radius)
            || pts.iter().any(|p| b.contains(*p));
        if meets {
            count += 1;
        }
    }
    count
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn koch_generation_one_is_the_generator() {
        let spec = koch();
        let arc = spec.arc(1).unwrap();
        assert_eq!(arc.points.len(), 5);
        let want = [
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0 / 3.0, 0.0),
            Complex64::new(0.5, 3f64.sqrt() / 6.0),
            Complex64::new(2.0 / 3.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        for (p, q) in arc.points.iter().zip(want) {
            assert!((p - q).norm() < 1e-15);
        }
    }

    #[test]
    fn snowflake_vertex_count() {
        for k in 0..=4 {
            let d = generate_prefractal(&koch(), k).unwrap();
            assert_eq!(d.arc_vertex_count, 3 * 4usize.pow(k as u32) + 3);
            assert_eq!(d.domain.boundary().len(), 3 * 4usize.pow(k as u32));
        }
    }

    #[test]
    fn invalid_scales_are_rejected() {
        let base = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let th = [0.0, PI / 3.0, -PI / 3.0, 0.0];
        let err = RepellerSpec::from_chain("x", &[1.0 / 3.0, 0.6, 1.0 / 3.0, 1.0 / 3.0], &th, None, base, Closure::Snowflake { mirrored: false });
        assert!(matches!(err, Err(LabError::NotMarkov(_))));
        let err = RepellerSpec::from_chain("x", &[1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], &th, None, base, Closure::Snowflake { mirrored: false });
        assert!(matches!(err, Err(LabError::NotExpanding { letter: 1, .. })));
    }

    #[test]
    fn twisted_generator_closes() {
        let s = twisted_koch(0.15).unwrap();
        assert!((s.maps[1].scale - 0.2430).abs() < 1e-3);
        assert!((s.maps[2].scale - 0.4160).abs() < 1e-3);
        assert!(generate_prefractal(&s, 5).is_ok());
        assert!(generate_prefractal(&carleson_linear(), 4).is_ok());
    }

    #[test]
    fn non_mixing_adjacency_rejected() {
        let base = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let adj = vec![vec![0], vec![1]];
        let err = RepellerSpec::from_chain("x", &[0.5, 0.5], &[0.0, 0.0], Some(adj), base, Closure::Snowflake { mirrored: false });
        assert_eq!(err.unwrap_err(), LabError::NotMixing);
    }

    #[test]
    fn cylinder_diameters() {
        let spec = koch();
        let c1 = cylinder(&spec, &Word::from_one_based(&[1])).unwrap();
        assert!((c1.renormalized_diameter - 1.0 / 3.0).abs() < 1e-15);
        assert!((c1.arc.vertices()[0] - Complex64::new(0.0, 0.0)).norm() < 1e-15);
        let c12 = cylinder(&spec, &Word::from_one_based(&[1, 2])).unwrap();
        assert!((c12.renormalized_diameter - 1.0 / 9.0).abs() < 1e-15);
        let d = generate_prefractal(&spec, 4).unwrap();
        let w = Word::from_one_based(&[2, 3]);
        let cw = d.cylinder(&w).unwrap();
        assert!((cw.raw_diameter - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn cylinders_nest_and_partition() {
        let d = generate_prefractal(&koch(), 4).unwrap();
        let spec = &d.spec;
        for len in 1..=3 {
            let mut next = 0;
            for w in spec.words(len) {
                let (lo, hi) = d.arc.cylinder_range(&w).unwrap();
                assert_eq!(lo, next);
                next = hi;
                for l in 0..4u8 {
                    let wv = w.concat(&Word(vec![l]));
                    let (a, b) = d.arc.cylinder_range(&wv).unwrap();
                    assert!(lo <= a && b <= hi);
                }
            }
            assert_eq!(next, d.arc_segments());
        }
    }

    #[test]
    fn owner_words_roundtrip() {
        let d = generate_prefractal(&twisted_koch(0.15).unwrap(), 3).unwrap();
        for w in d.spec.words(2) {
            let (lo, hi) = d.cylinder_segments(&w).unwrap();
            for s in lo..hi {
                assert_eq!(d.owner(s, 2).unwrap(), w);
            }
        }
    }

    #[test]
    fn reflected_spec_matches_reflected_domain() {
        let spec = twisted_koch(0.15).unwrap();
        let d = generate_prefractal(&spec, 3).unwrap();
        let r = generate_prefractal(&spec.reflect(), 3).unwrap();
        let mirror = d.domain.reflect();
        let mut a: Vec<(i64, i64)> = r.domain.boundary().vertices().iter().map(|p| ((p.re * 1e9).round() as i64, (p.im * 1e9).round() as i64)).collect();
        let mut b: Vec<(i64, i64)> = mirror.boundary().vertices().iter().map(|p| ((p.re * 1e9).round() as i64, (p.im * 1e9).round() as i64)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        for (m, n) in spec.maps.iter().zip(&spec.reflect().maps) {
            assert_eq!(m.angle, -n.angle);
        }
    }

    #[test]
    fn partition_of_segment_and_circle() {
        let seg = Polyline::new(vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)], false).unwrap();
        let parts = greedy_arc_partition(&seg, 0.25, 8.0).unwrap();
        assert_eq!(parts.len(), 4);
        for p in &parts {
            assert!((p.diameter() - 0.25).abs() < 1e-12);
        }
        let circle = Polyline::new(
            (0..720).map(|k| Complex64::from_polar(0.5, 2.0 * PI * k as f64 / 720.0)).collect(),
            true,
        )
        .unwrap();
        let parts = greedy_arc_partition(&circle, 0.5, 8.0).unwrap();
        assert!(parts.len() <= 8, "{}", parts.len());
        for p in &parts[..parts.len() - 1] {
            assert!((p.diameter() - 0.5).abs() < 1e-9);
        }
        assert!(greedy_arc_partition(&seg, 2.0, 8.0).is_err());
    }

    #[test]
    fn rectangle_reflection_keeps_vertex_set() {
        let v = vec![Complex64::new(-1.0, -0.5), Complex64::new(1.0, -0.5), Complex64::new(1.0, 0.5), Complex64::new(-1.0, 0.5)];
        let d = JordanDomain::new(Polyline::new(v, true).unwrap(), Complex64::new(0.0, 0.0), Provenance::Custom("rect".into())).unwrap();
        let r = d.reflect();
        let mut a: Vec<String> = d.boundary().vertices().iter().map(|p| format!("{p}")).collect();
        let mut b: Vec<String> = r.boundary().vertices().iter().map(|p| format!("{p}")).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
