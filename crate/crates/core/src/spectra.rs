//! Finite-scale counts behind the four spectra and exponent fitting.
//!
//! Every power-law window is tested in log space, `log q` against
//! `(e ± η)·log s` for a scale `s < 1`, so that conjugating a domain and
//! negating the exponent flips a window bit-exactly.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

use crate::domain::JordanDomain;
use crate::error::{LabError, Result};
use crate::geometry::{self, Disk, Point, PolyPos, Polyline};
use crate::harmonic::HitSample;
use crate::repeller::{RepellerDomain, RepellerSpec, Word};
use crate::rotation::{self, RotationMethod};

/// One-sided lower (`+`), one-sided upper (`-`) or two-sided window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Plus,
    Minus,
    Both,
}

impl Sign {
    /// `+` and `-` exchanged; two-sided stays.
    pub fn swapped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
            Sign::Both => Sign::Both,
        }
    }

    pub fn parse(s: &str) -> Result<Sign> {
        match s {
            "+" | "plus" => Ok(Sign::Plus),
            "-" | "minus" => Ok(Sign::Minus),
            "both" | "two-sided" | "two_sided" | "pm" => Ok(Sign::Both),
            _ => Err(LabError::InvalidParameter(format!("unknown sign `{s}`"))),
        }
    }
}

/// Signs `(σ, σ′)` for the measure and rotation windows.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signs {
    pub measure: Sign,
    pub rotation: Sign,
}

impl Signs {
    pub const TWO_SIDED: Signs = Signs { measure: Sign::Both, rotation: Sign::Both };

    pub fn new(measure: Sign, rotation: Sign) -> Self {
        Signs { measure, rotation }
    }
}

/// `q > s^{e+η}` for `+`, `q < s^{e-η}` for `-`, both for two-sided;
/// arguments are `log q` and `log s`.
pub fn window_passes(log_value: f64, exponent: f64, eta: f64, log_scale: f64, sign: Sign) -> bool {
    let lower = || log_value > (exponent + eta) * log_scale;
    let upper = || log_value < (exponent - eta) * log_scale;
    match sign {
        Sign::Plus => lower(),
        Sign::Minus => upper(),
        Sign::Both => lower() && upper(),
    }
}

/// Measure window on a Monte-Carlo count. A lower threshold below one hit
/// (`s^{e+η}·walks < 1`) cannot be resolved by the sample and counts as met.
pub fn measure_passes(hits: u64, walks: u64, exponent: f64, eta: f64, log_scale: f64, sign: Sign) -> bool {
    let lv = (hits as f64 / walks as f64).ln();
    let unresolved = (exponent + eta) * log_scale < -(walks as f64).ln();
    let lower = || unresolved || lv > (exponent + eta) * log_scale;
    let upper = || lv < (exponent - eta) * log_scale;
    match sign {
        Sign::Plus => lower(),
        Sign::Minus => upper(),
        Sign::Both => lower() && upper(),
    }
}

/// Grid of hit points for disk-count queries.
pub struct HitGrid {
    cell: f64,
    cells: HashMap<(i64, i64), Vec<Point>>,
}

impl HitGrid {
    pub fn new(points: &[Point], cell: f64) -> Self {
        let mut cells: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
        for &p in points {
            cells.entry(Self::key(p, cell)).or_default().push(p);
        }
        HitGrid { cell, cells }
    }

    fn key(p: Point, cell: f64) -> (i64, i64) {
        ((p.re / cell).floor() as i64, (p.im / cell).floor() as i64)
    }

    /// Hits inside the closed disk.
    pub fn count(&self, b: &Disk) -> u64 {
        let k = (b.radius / self.cell).ceil() as i64;
        let (ci, cj) = Self::key(b.center, self.cell);
        let r2 = b.radius * b.radius;
        let mut n = 0;
        for i in ci - k..=ci + k {
            for j in cj - k..=cj + k {
                if let Some(v) = self.cells.get(&(i, j)) {
                    n += v.iter().filter(|p| (**p - b.center).norm_sqr() <= r2).count() as u64;
                }
            }
        }
        n
    }
}

/// Hit points of a sample in walk order.
pub fn hit_points(domain: &JordanDomain, sample: &HitSample) -> Vec<Point> {
    (0..sample.walks()).map(|i| sample.point(domain, i)).collect()
}

/// Vertices along `[lo, hi)` (or the whole boundary) at mutual spacing `spacing`.
pub fn packing_candidates(domain: &JordanDomain, spacing: f64, range: Option<(usize, usize)>) -> Vec<usize> {
    let v = domain.boundary().vertices();
    let (lo, hi) = range.unwrap_or((0, v.len()));
    let hi = hi.min(v.len());
    let mut out: Vec<usize> = Vec::new();
    for i in lo..hi {
        if out.last().is_none_or(|&j| (v[i] - v[j]).norm() >= spacing) {
            out.push(i);
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PackingParams {
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub signs: Signs,
    pub method: RotationMethod,
}

/// Diagnostics of one candidate disk.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct DiskItem {
    pub vertex: usize,
    pub center: Point,
    pub omega: f64,
    pub hits: u64,
    pub log_rot: Option<f64>,
    pub passed: bool,
    pub accepted: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PackingResult {
    pub params: PackingParams,
    pub count: usize,
    pub candidates: usize,
    /// Candidates whose rotation could not be evaluated.
    pub skipped: usize,
    pub items: Vec<DiskItem>,
}

/// Greedy maximal packing of disjoint `δ`-disks centred on boundary
/// vertices whose `(ω, rot)` pass the `(σ, σ′)` windows.
pub fn packing_count(
    domain: &JordanDomain,
    grid: &HitGrid,
    walks: u64,
    params: &PackingParams,
    range: Option<(usize, usize)>,
) -> Result<PackingResult> {
    let delta = params.delta;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    let ls = delta.ln();
    let cand = packing_candidates(domain, delta / 4.0, range);
    let v = domain.boundary().vertices();
    let mut items: Vec<DiskItem> = cand
        .par_iter()
        .map(|&i| {
            let b = Disk { center: v[i], radius: delta };
            let hits = grid.count(&b);
            let omega = hits as f64 / walks as f64;
            let lr = rotation::rot_point(domain, v[i], delta, params.method).ok().map(|r| r.log_rot);
            let passed = lr.is_some_and(|lr| {
                measure_passes(hits, walks, params.alpha, params.eta, ls, params.signs.measure)
                    && window_passes(lr, params.gamma, params.eta, ls, params.signs.rotation)
            });
            DiskItem { vertex: i, center: v[i], omega, hits, log_rot: lr, passed, accepted: false }
        })
        .collect();
    let skipped = items.iter().filter(|d| d.log_rot.is_none()).count();
    // Sequential greedy over the arclength order.
    let cell = 2.0 * delta;
    let mut taken: HashMap<(i64, i64), Vec<Point>> = HashMap::new();
    let mut count = 0;
    for it in items.iter_mut().filter(|d| d.passed) {
        let (ci, cj) = ((it.center.re / cell).floor() as i64, (it.center.im / cell).floor() as i64);
        let clash = (ci - 1..=ci + 1).any(|i| {
            (cj - 1..=cj + 1).any(|j| {
                taken
                    .get(&(i, j))
                    .is_some_and(|ps| ps.iter().any(|p| (*p - it.center).norm() < 2.0 * delta))
            })
        });
        if !clash {
            taken.entry((ci, cj)).or_default().push(it.center);
            it.accepted = true;
            count += 1;
        }
    }
    Ok(PackingResult { params: *params, count, candidates: cand.len(), skipped, items })
}

/// Multi-indices `(k_1..k_N)` with `Π s_j^{k_j} ∈ [δ(1-τ), δ(1+τ)]`,
/// lexicographically decreasing in `k_1`, then `k_2`, ...
pub fn word_index_set(spec: &RepellerSpec, delta: f64, tau: f64) -> Result<Vec<Vec<u32>>> {
    if !(0.0..=0.5).contains(&tau) {
        return Err(LabError::InvalidParameter(format!("tau {tau} outside [0, 0.5]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(LabError::InvalidParameter(format!("delta {delta} outside (0, 1)")));
    }
    let ls: Vec<f64> = spec.scales().iter().map(|s| s.ln()).collect();
    let slack = 1e-9 * delta.ln().abs();
    let lo = (delta * (1.0 - tau)).ln() - slack;
    let hi = (delta * (1.0 + tau)).ln() + slack;
    let mut out = Vec::new();
    let mut cur = vec![0u32; ls.len()];
    index_rec(&ls, 0, 0.0, lo, hi, &mut cur, &mut out);
    Ok(out)
}

fn index_rec(ls: &[f64], j: usize, acc: f64, lo: f64, hi: f64, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if j == ls.len() {
        if acc >= lo && acc <= hi {
            out.push(cur.clone());
        }
        return;
    }
    let kmax = ((lo - acc) / ls[j]).floor().max(0.0) as u32;
    for k in (0..=kmax).rev() {
        cur[j] = k;
        index_rec(ls, j + 1, acc + k as f64 * ls[j], lo, hi, cur, out);
    }
    cur[j] = 0;
}

/// Admissible words with exactly the given letter counts, lexicographic.
pub fn words_with_counts(spec: &RepellerSpec, counts: &[u32]) -> Vec<Word> {
    let len: u32 = counts.iter().sum();
    let mut out = Vec::new();
    if len == 0 {
        return out;
    }
    let mut left = counts.to_vec();
    let mut cur = Vec::with_capacity(len as usize);
    counts_rec(spec, &mut left, len as usize, &mut cur, &mut out);
    out
}

fn counts_rec(spec: &RepellerSpec, left: &mut [u32], len: usize, cur: &mut Vec<u8>, out: &mut Vec<Word>) {
    if cur.len() == len {
        out.push(Word(cur.clone()));
        return;
    }
    for l in 0..left.len() {
        if left[l] == 0 {
            continue;
        }
        if let Some(&p) = cur.last() {
            if !spec.allows(p, l as u8) {
                continue;
            }
        }
        left[l] -= 1;
        cur.push(l as u8);
        counts_rec(spec, left, len, cur, out);
        cur.pop();
        left[l] += 1;
    }
}

/// Renormalized log-measure and log-rotation of a word.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordEval {
    pub log_omega: f64,
    pub log_rot: f64,
    /// Relative standard error of the measure; zero for surrogates.
    pub rel_se: f64,
}

/// Per-letter product weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateWeights {
    pub log_omega: Vec<f64>,
}

impl SurrogateWeights {
    pub fn uniform(letters: usize) -> Self {
        SurrogateWeights { log_omega: vec![-(letters as f64).ln(); letters] }
    }

    /// From letter-cylinder measures, renormalized to sum one.
    pub fn from_measures(m: &[f64]) -> Result<Self> {
        let total: f64 = m.iter().sum();
        if m.iter().any(|&x| !(x > 0.0)) {
            return Err(LabError::InvalidParameter("surrogate weights must be positive".into()));
        }
        Ok(SurrogateWeights { log_omega: m.iter().map(|x| (x / total).ln()).collect() })
    }

    /// Exact in the counts: words with equal letter counts get identical values.
    pub fn eval_counts(&self, spec: &RepellerSpec, counts: &[u32]) -> WordEval {
        let mut lo = 0.0;
        let mut lr = 0.0;
        for (j, &k) in counts.iter().enumerate() {
            lo += k as f64 * self.log_omega[j];
            lr += k as f64 * spec.maps[j].angle;
        }
        WordEval { log_omega: lo, log_rot: lr, rel_se: 0.0 }
    }
}

/// Cylinder measures from a walk sample and geometric crosscut rotation.
pub struct McWeights<'a> {
    pub rd: &'a RepellerDomain,
    pub sample: &'a HitSample,
    pub method: RotationMethod,
    arc_hits: u64,
    rot_ref: f64,
}

impl<'a> McWeights<'a> {
    /// The rotation reference is the mean of `log rot([j]) - θ_j` over
    /// letters, since the crosscut disk of the whole base arc contains the
    /// basepoint.
    pub fn new(rd: &'a RepellerDomain, sample: &'a HitSample, method: RotationMethod) -> Result<Self> {
        let (lo, hi) = rd.repeller_segments();
        let arc_hits = sample.range_hits(lo, hi);
        if arc_hits == 0 {
            return Err(LabError::InsufficientHits { needed: 1, have: 0 });
        }
        let n = rd.spec.letters();
        let mut acc = 0.0;
        for j in 0..n {
            let c = rd.cylinder(&Word(vec![j as u8]))?;
            acc += rotation::rot_crosscut(&rd.domain, &c.arc, method)?.log_rot - rd.spec.maps[j].angle;
        }
        Ok(McWeights { rd, sample, method, arc_hits, rot_ref: acc / n as f64 })
    }

    pub fn omega(&self, w: &Word) -> Result<(u64, f64)> {
        let (lo, hi) = self.rd.cylinder_segments(w)?;
        let h = self.sample.range_hits(lo, hi);
        Ok((h, h as f64 / self.arc_hits as f64))
    }

    pub fn eval(&self, w: &Word) -> Result<WordEval> {
        let (h, om) = self.omega(w)?;
        let c = self.rd.cylinder(w)?;
        let lr = rotation::rot_crosscut(&self.rd.domain, &c.arc, self.method)?.log_rot - self.rot_ref;
        let rel_se = if h == 0 { f64::INFINITY } else { ((1.0 - om) / h as f64).sqrt() };
        Ok(WordEval { log_omega: om.ln(), log_rot: lr, rel_se })
    }
}

pub enum WordWeights<'a> {
    Surrogate(SurrogateWeights),
    MonteCarlo(McWeights<'a>),
}

impl WordWeights<'_> {
    fn eval(&self, spec: &RepellerSpec, w: &Word) -> Result<WordEval> {
        match self {
            WordWeights::Surrogate(s) => Ok(s.eval_counts(spec, &w.counts(spec.letters()))),
            WordWeights::MonteCarlo(m) => m.eval(w),
        }
    }

    pub fn is_surrogate(&self) -> bool {
        matches!(self, WordWeights::Surrogate(_))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordItem {
    pub word: Word,
    pub eval: WordEval,
    pub passed: bool,
    pub selected: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WordCountResult {
    pub delta: f64,
    pub count: usize,
    pub candidates: usize,
    pub multi_indices: Vec<Vec<u32>>,
    pub items: Vec<WordItem>,
}

impl WordCountResult {
    pub fn selected(&self) -> impl Iterator<Item = &Word> {
        self.items.iter().filter(|i| i.selected).map(|i| &i.word)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordParams {
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub signs: Signs,
    pub tau: f64,
    /// Enumeration budget.
    pub max_words: usize,
}

impl WordParams {
    pub fn new(delta: f64, alpha: f64, gamma: f64, eta: f64, signs: Signs) -> Self {
        WordParams { delta, alpha, gamma, eta, signs, tau: 0.0, max_words: 2_000_000 }
    }
}

/// Greedy prefix-free selection in (length, lexicographic) order.
fn prefix_free_greedy(items: &mut [WordItem]) -> usize {
    let mut chosen: HashSet<Vec<u8>> = HashSet::new();
    let mut prefixes: HashSet<Vec<u8>> = HashSet::new();
    let mut count = 0;
    for it in items.iter_mut().filter(|i| i.passed) {
        let w = &it.word.0;
        if prefixes.contains(w) || (1..=w.len()).any(|k| chosen.contains(&w[..k])) {
            continue;
        }
        for k in 1..=w.len() {
            prefixes.insert(w[..k].to_vec());
        }
        chosen.insert(w.clone());
        it.selected = true;
        count += 1;
    }
    count
}

/// `N_word^{σσ′}(δ, α, γ, η)`: maximal prefix-free family of words over
/// `I^δ` whose renormalized measure and rotation pass the windows.
pub fn word_count(spec: &RepellerSpec, weights: &WordWeights<'_>, p: &WordParams) -> Result<WordCountResult> {
    let idx = word_index_set(spec, p.delta, p.tau)?;
    let mut words = Vec::new();
    for k in &idx {
        words.extend(words_with_counts(spec, k));
        if words.len() > p.max_words {
            return Err(LabError::BudgetExceeded(format!("more than {} words at delta {}", p.max_words, p.delta)));
        }
    }
    words.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let ls = p.delta.ln();
    let evals: Vec<Result<WordEval>> = words.par_iter().map(|w| weights.eval(spec, w)).collect();
    let mut items = Vec::with_capacity(words.len());
    for (w, e) in words.into_iter().zip(evals) {
        let e = e?;
        let passed = window_passes(e.log_omega, p.alpha, p.eta, ls, p.signs.measure)
            && window_passes(e.log_rot, p.gamma, p.eta, ls, p.signs.rotation);
        items.push(WordItem { word: w, eval: e, passed, selected: false });
    }
    if !weights.is_surrogate() && !items.is_empty() {
        // Measures must resolve the window: median relative error below its log-width.
        let mut se: Vec<f64> = items.iter().map(|i| i.eval.rel_se).collect();
        se.sort_by(f64::total_cmp);
        let med = se[se.len() / 2];
        if med > p.eta * ls.abs() {
            return Err(LabError::BudgetExceeded(format!(
                "median relative error {med:.3} exceeds window width {:.3}",
                p.eta * ls.abs()
            )));
        }
    }
    let count = prefix_free_greedy(&mut items);
    Ok(WordCountResult { delta: p.delta, count, candidates: items.len(), multi_indices: idx, items })
}

/// `Γ(a, b, r)` realized over word cylinders.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CrosscutCount {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    /// Widened measure window `[(1-r)/W, W(1-r)]`.
    pub window: (f64, f64),
    pub count: usize,
    /// Count under the unwidened window `|ω/(1-r) - 1| ≤ (1-r)/logloglog(1/(1-r))`.
    pub count_strict_window: usize,
    pub in_measure_window: usize,
    pub items: Vec<WordItem>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosscutParams {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub widening: f64,
    pub max_len: usize,
}

/// Words with `ω(w)` near `1-r`, `diam(w) ≥ (1-r)^{1-a}` and
/// `rot(w) ≥ (1-r)^{-b}`, selected prefix-free.
pub fn crosscut_count(spec: &RepellerSpec, weights: &WordWeights<'_>, p: &CrosscutParams) -> Result<CrosscutCount> {
    let h = 1.0 - p.r;
    if !(h > 0.0 && h < 1.0) {
        return Err(LabError::InvalidParameter(format!("r = {} outside (0, 1)", p.r)));
    }
    let l = (1.0 / h).ln();
    let lll = l.ln().ln();
    if !(lll > 0.0) {
        return Err(LabError::InvalidParameter(format!("logloglog(1/(1-r)) <= 0 at 1-r = {h}")));
    }
    if !(p.widening >= 1.0) {
        return Err(LabError::InvalidParameter("window widening must be at least 1".into()));
    }
    let window = (h / p.widening, h * p.widening);
    let strict_tol = h / lll;
    let mut words = Vec::new();
    for len in 1..=p.max_len {
        words.extend(spec.words(len));
    }
    let evals: Vec<Result<WordEval>> = words.par_iter().map(|w| weights.eval(spec, w)).collect();
    let mut items = Vec::with_capacity(words.len());
    let mut in_window = 0;
    let mut strict_items = Vec::new();
    for (w, e) in words.into_iter().zip(evals) {
        let e = e?;
        let om = e.log_omega.exp();
        let in_w = om >= window.0 && om <= window.1;
        in_window += in_w as usize;
        let diam_ok = spec.renormalized_diameter(&w).ln() >= (1.0 - p.a) * h.ln();
        let rot_ok = e.log_rot >= p.b * l;
        let strict_ok = (om / h - 1.0).abs() <= strict_tol;
        strict_items.push(WordItem { word: w.clone(), eval: e, passed: strict_ok && diam_ok && rot_ok, selected: false });
        items.push(WordItem { word: w, eval: e, passed: in_w && diam_ok && rot_ok, selected: false });
    }
    if in_window == 0 {
        return Err(LabError::WindowEmpty);
    }
    let count = prefix_free_greedy(&mut items);
    let count_strict_window = prefix_free_greedy(&mut strict_items);
    Ok(CrosscutCount { r: p.r, a: p.a, b: p.b, window, count, count_strict_window, in_measure_window: in_window, items })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionParams {
    pub r: f64,
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub signs: Signs,
    pub method: RotationMethod,
}

/// One equal-measure boundary arc.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ArcItem {
    pub from: PolyPos,
    pub to: PolyPos,
    pub diameter: f64,
    /// `diam / (2π(1-r))`, the `|φ′|` proxy.
    pub modulus_proxy: f64,
    /// `log rot` of the arc's crosscut, the `log |φ′^{-i}|` proxy.
    pub log_rot: Option<f64>,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistortionResult {
    pub params: DistortionParams,
    pub arcs: usize,
    pub count: usize,
    /// Normalized length of the passing preimage arcs, `count / arcs`.
    pub lambda1: f64,
    /// `log λ₁ / log(1/(1-r)) + 1`.
    pub exponent: f64,
    pub items: Vec<ArcItem>,
}

/// Equal-harmonic-measure partition of `∂Ω` into `⌈1/(1-r)⌉` arcs from hit
/// quantiles, filtered by the `|φ′|` and `arg φ′` proxy windows.
pub fn distortion_count(domain: &JordanDomain, sample: &HitSample, p: &DistortionParams) -> Result<DistortionResult> {
    let h = 1.0 - p.r;
    if !(h > 0.0 && h < 1.0) {
        return Err(LabError::InvalidParameter(format!("r = {} outside (0, 1)", p.r)));
    }
    let m = (1.0 / h).ceil() as usize;
    let needed = (10.0 / h).ceil() as usize;
    if sample.walks() < needed {
        return Err(LabError::InsufficientHits { needed, have: sample.walks() });
    }
    let mut pos: Vec<PolyPos> = (0..sample.walks()).map(|i| sample.pos(i)).collect();
    pos.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = pos.len();
    let cuts: Vec<PolyPos> = (0..m).map(|j| pos[j * n / m]).collect();
    let ls = h.ln();
    let curve = domain.boundary();
    let items: Vec<ArcItem> = (0..m)
        .into_par_iter()
        .map(|j| {
            let from = cuts[j];
            let to = cuts[(j + 1) % m];
            let pts = curve.sub_arc_points(from, to);
            let diameter = geometry::diameter(&pts);
            let modulus_proxy = diameter / (2.0 * std::f64::consts::PI * h);
            let log_rot = Polyline::new(dedup(pts), false)
                .ok()
                .and_then(|arc| rotation::rot_crosscut(domain, &arc, p.method).ok())
                .map(|v| v.log_rot);
            let passed = log_rot.is_some_and(|lr| {
                window_passes(modulus_proxy.ln(), -p.a, p.eta, ls, p.signs.measure)
                    && window_passes(lr, -p.b, p.eta, ls, p.signs.rotation)
            });
            ArcItem { from, to, diameter, modulus_proxy, log_rot, passed }
        })
        .collect();
    let count = items.iter().filter(|a| a.passed).count();
    let lambda1 = count as f64 / m as f64;
    let exponent = lambda1.ln() / (1.0 / h).ln() + 1.0;
    Ok(DistortionResult { params: *p, arcs: m, count, lambda1, exponent, items })
}

fn dedup(mut pts: Vec<Point>) -> Vec<Point> {
    pts.dedup();
    if pts.len() == 1 {
        pts.push(pts[0] + Complex64::new(f64::EPSILON, 0.0));
    }
    pts
}

/// Least-squares fit of `log value` against `log(1/scale)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log units.
    pub residual: f64,
    pub used: usize,
    /// Scales dropped for a zero value.
    pub excluded: Vec<f64>,
}

pub fn fit_exponent(rows: &[(f64, f64)]) -> Result<ExponentFit> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for &(s, v) in rows {
        if v > 0.0 && s > 0.0 && s < 1.0 {
            pts.push(((1.0 / s).ln(), v.ln()));
        } else {
            excluded.push(s);
        }
    }
    if pts.len() < 3 {
        return Err(LabError::TooFewScales { usable: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(ExponentFit { slope, intercept, residual, used: pts.len(), excluded })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Packing,
    Word,
    Crosscut,
    Distortion,
}

/// What a spectrum run asks for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumQuery {
    pub variant: Variant,
    pub signs: Signs,
    /// `(α, γ)` for packing/word, `(a, b)` for crosscut/distortion.
    pub params: (f64, f64),
    pub eta: f64,
    /// `δ` or `1-r`, strictly decreasing.
    pub scales: Vec<f64>,
    pub walks: usize,
}

impl SpectrumQuery {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(LabError::InvalidParameter("eta must be positive".into()));
        }
        if self.scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(LabError::InvalidParameter("scales must be strictly decreasing".into()));
        }
        if self.variant == Variant::Distortion && self.params.0 >= 1.0 {
            return Err(LabError::InvalidParameter("distortion needs a < 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub scale: f64,
    pub count: usize,
    /// Measured `λ₁` for distortion rows, `count·δ` otherwise.
    pub measure: f64,
    /// Per-scale exponent.
    pub exponent: f64,
}

/// Per-scale counts with the fitted exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumTable {
    pub query: SpectrumQuery,
    pub rows: Vec<SpectrumRow>,
    pub fit: Option<ExponentFit>,
    /// Largest per-scale exponent over the last three scales.
    pub trailing_max: f64,
}

impl SpectrumTable {
    pub fn new(query: SpectrumQuery, rows: Vec<SpectrumRow>) -> Self {
        let data: Vec<(f64, f64)> = rows
            .iter()
            .map(|r| if query.variant == Variant::Distortion { (r.scale, r.measure) } else { (r.scale, r.count as f64) })
            .collect();
        let mut fit = fit_exponent(&data).ok();
        if query.variant == Variant::Distortion {
            if let Some(f) = fit.as_mut() {
                // λ₁ ~ (1-r)^{1-d}: the d-exponent is one plus the log-log slope.
                f.slope += 1.0;
            }
        }
        let k = rows.len().saturating_sub(3);
        let trailing_max = rows[k..].iter().map(|r| r.exponent).fold(f64::NEG_INFINITY, f64::max);
        SpectrumTable { query, rows, fit, trailing_max }
    }

    /// `scale,count,measure,exponent` rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| LabError::Output(format!("csv: {e}"));
        w.write_record(["scale", "count", "measure", "exponent"]).map_err(io)?;
        for r in &self.rows {
            w.write_record([r.scale.to_string(), r.count.to_string(), r.measure.to_string(), r.exponent.to_string()])
                .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| LabError::Output(format!("csv: {e}")))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-scale packing/word exponent `log N / log(1/δ)`.
pub fn count_exponent(count: usize, scale: f64) -> f64 {
    (count as f64).ln() / (1.0 / scale).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repeller::presets;
    use std::f64::consts::PI;

    #[test]
    fn windows_follow_sign_conventions() {
        let ls = 0.01f64.ln();
        // q = δ^1.
        let lq = ls;
        assert!(window_passes(lq, 1.0, 0.1, ls, Sign::Plus));
        assert!(window_passes(lq, 1.0, 0.1, ls, Sign::Minus));
        assert!(window_passes(lq, 1.0, 0.1, ls, Sign::Both));
        assert!(!window_passes(lq, 0.5, 0.1, ls, Sign::Plus));
        assert!(!window_passes(lq, 2.0, 0.1, ls, Sign::Minus));
        assert!(!window_passes(f64::NEG_INFINITY, 1.0, 0.1, ls, Sign::Plus));
    }

    #[test]
    fn unresolved_lower_bound_is_met() {
        let ls = 0.001f64.ln();
        // Threshold δ^{3} = 1e-9 is below one hit in 1e6 walks.
        assert!(measure_passes(0, 1_000_000, 2.0, 1.0, ls, Sign::Plus));
        // Threshold δ^{1.5} ≈ 3e-5 is resolvable: zero hits fail.
        assert!(!measure_passes(0, 1_000_000, 1.0, 0.5, ls, Sign::Plus));
        assert!(measure_passes(100, 1_000_000, 1.0, 0.5, ls, Sign::Plus));
    }

    #[test]
    fn reflected_window_is_bit_exact() {
        let ls = 3f64.powi(-5).ln();
        for &lr in &[-1.3, 0.0, 0.7, 2.2] {
            for &g in &[-0.4, 0.0, 0.25] {
                for s in [Sign::Plus, Sign::Minus, Sign::Both] {
                    assert_eq!(
                        window_passes(lr, g, 0.1, ls, s),
                        window_passes(-lr, -g, 0.1, ls, s.swapped())
                    );
                }
            }
        }
    }

    #[test]
    fn index_set_examples() {
        let koch = presets::koch();
        let idx = word_index_set(&koch, 3f64.powi(-3), 0.0).unwrap();
        assert_eq!(idx.len(), 20);
        assert!(idx.iter().all(|k| k.iter().sum::<u32>() == 3));
        // Only the scales matter for the index set.
        let mut spec = koch.clone();
        spec.maps.truncate(2);
        spec.maps[1].scale = 1.0 / 9.0;
        spec.adjacency = vec![vec![0, 1], vec![0, 1]];
        let idx = word_index_set(&spec, 3f64.powi(-4), 0.0).unwrap();
        assert_eq!(idx, vec![vec![4, 0], vec![2, 1], vec![0, 2]]);
        assert!(word_index_set(&koch, 0.05, 0.0).unwrap().is_empty());
    }

    #[test]
    fn counted_words_have_right_letters() {
        let koch = presets::koch();
        let ws = words_with_counts(&koch, &[2, 1, 0, 0]);
        assert_eq!(ws.len(), 3);
        assert!(ws.iter().all(|w| w.counts(4) == vec![2, 1, 0, 0]));
    }

    #[test]
    fn uniform_twist_words_all_pass_rotation() {
        let t = 0.1;
        let spec = presets::twisted_koch(t).unwrap();
        // Symbolic rotation of a word is Σθ; with the θ_j = θ_twist + (0, π/3, -π/3, 0)
        // the twist part is m·θ_twist for every word of length m.
        let w = Word(vec![0, 0, 0]);
        let e = SurrogateWeights::uniform(4).eval_counts(&spec, &w.counts(4));
        assert!((e.log_rot - 3.0 * t).abs() < 1e-12);
    }

    #[test]
    fn wide_open_counts_every_word() {
        let koch = presets::koch();
        let w = WordWeights::Surrogate(SurrogateWeights::uniform(4));
        let p = WordParams::new(3f64.powi(-4), 1.26, 0.0, 100.0, Signs::TWO_SIDED);
        let r = word_count(&koch, &w, &p).unwrap();
        assert_eq!(r.count, 256);
    }

    #[test]
    fn fit_examples() {
        let rows: Vec<(f64, f64)> = (1..6).map(|m| (3f64.powi(-m), 4f64.powi(m))).collect();
        let f = fit_exponent(&rows).unwrap();
        assert!((f.slope - 4f64.ln() / 3f64.ln()).abs() < 1e-9);
        let flat: Vec<(f64, f64)> = (1..6).map(|m| (2f64.powi(-m), 7.0)).collect();
        assert!(fit_exponent(&flat).unwrap().slope.abs() < 1e-12);
        assert_eq!(fit_exponent(&flat[..2]).unwrap_err(), LabError::TooFewScales { usable: 2 });
        let mut z = flat.clone();
        z[0].1 = 0.0;
        let f = fit_exponent(&z).unwrap();
        assert_eq!(f.excluded, vec![0.5]);
    }

    #[test]
    fn crosscut_rotation_cut() {
        let t = 0.15;
        let spec = presets::twisted_koch(t).unwrap();
        let w = WordWeights::Surrogate(SurrogateWeights::uniform(4));
        let h = 4f64.powi(-3);
        let r = 1.0 - h;
        let open = crosscut_count(&spec, &w, &CrosscutParams { r, a: 0.0, b: -100.0, widening: 2.0, max_len: 4 }).unwrap();
        assert!(open.count > 0);
        assert_eq!(open.count, open.in_measure_window.min(open.count));
        // Symbolic rotation of a length-m word is at most m(θ + π/3).
        let b = 4.0 * (t + PI / 3.0) / (1.0 / h).ln() + 0.01;
        let shut = crosscut_count(&spec, &w, &CrosscutParams { r, a: 0.0, b, widening: 2.0, max_len: 4 }).unwrap();
        assert_eq!(shut.count, 0);
    }
}
