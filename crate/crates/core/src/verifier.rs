//! Executable checks of the quantitative lemmas on repellers: refined
//! Carleson decay, rotation multiplicativity, propagation of word counts
//! and finite-scale spectrum approximation.

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::collections::{BTreeMap, HashSet};
use std::f64::consts::{PI, TAU};

use crate::domain::JordanDomain;
use crate::error::{LabError, Result};
use crate::geometry::PolyPos;
use crate::harmonic::HitSample;
use crate::repeller::{RepellerDomain, RepellerSpec, Word};
use crate::rng::{StreamFactory, AUX_STREAM_BASE};
use crate::rotation::{self, RotationMethod};
use crate::spectra::{self, Signs, SurrogateWeights, WordParams, WordWeights};

/// Outcome of one lemma check; failing rows carry their inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub lemma: String,
    pub passed: bool,
    pub rows: Vec<Value>,
    pub tolerances: BTreeMap<String, f64>,
    pub seeds: Vec<u64>,
    /// Wall time; left out of deterministic outputs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
}

impl VerificationReport {
    fn new(lemma: &str) -> Self {
        VerificationReport {
            lemma: lemma.into(),
            passed: true,
            rows: Vec::new(),
            tolerances: BTreeMap::new(),
            seeds: Vec::new(),
            runtime_seconds: None,
        }
    }

    /// Plain-text summary, one line per row.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}: {}\n", self.lemma, if self.passed { "PASS" } else { "FAIL" });
        for (k, v) in &self.tolerances {
            s.push_str(&format!("  tolerance {k} = {v}\n"));
        }
        for r in &self.rows {
            s.push_str(&format!("  {r}\n"));
        }
        s
    }
}

/// Uniform random admissible word of length `len` that may follow `prev`.
fn random_word<R: Rng>(spec: &RepellerSpec, len: usize, prev: Option<u8>, rng: &mut R) -> Option<Word> {
    let n = spec.letters() as u8;
    let mut w = Vec::with_capacity(len);
    let mut last = prev;
    for _ in 0..len {
        let opts: Vec<u8> = (0..n).filter(|&l| last.is_none_or(|p| spec.allows(p, l))).collect();
        if opts.is_empty() {
            return None;
        }
        let l = opts[rng.random_range(0..opts.len())];
        w.push(l);
        last = Some(l);
    }
    Some(Word(w))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonParams {
    pub x_len: usize,
    pub z_len: usize,
    pub y_lens: Vec<usize>,
    pub triples: usize,
    /// Largest relative standard error accepted for any cylinder measure.
    pub max_rel_se: f64,
    pub seed: u64,
}

/// Mean Carleson deviation at one `|Y|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationStat {
    pub y_len: usize,
    pub used: usize,
    pub skipped: usize,
    pub mean: f64,
    /// Standard error of the mean plus the mean propagated MC error.
    pub error_bar: f64,
}

fn rel_se(h: u64, walks: usize) -> f64 {
    if h == 0 {
        return f64::INFINITY;
    }
    let p = h as f64 / walks as f64;
    ((1.0 - p) / h as f64).sqrt()
}

/// `|ω(XYZ)ω(Y)/(ω(XY)ω(YZ)) - 1|` over sampled triples, per `|Y|`.
pub fn carleson_ratio_scan(rd: &RepellerDomain, sample: &HitSample, p: &CarlesonParams) -> Result<(VerificationReport, Vec<DeviationStat>)> {
    let spec = &rd.spec;
    let streams = StreamFactory::new(p.seed);
    let mut rep = VerificationReport::new("carleson");
    rep.seeds = vec![sample.seed, p.seed];
    rep.tolerances.insert("max_rel_se".into(), p.max_rel_se);
    rep.tolerances.insert("error_bar_multiplier".into(), 2.0);
    let hits = |w: &Word| -> Result<u64> {
        let (lo, hi) = rd.cylinder_segments(w)?;
        Ok(sample.range_hits(lo, hi))
    };
    let mut stats = Vec::new();
    for (yi, &yl) in p.y_lens.iter().enumerate() {
        if p.x_len + yl + p.z_len > rd.generation() {
            return Err(LabError::GenerationTooDeep { requested: p.x_len + yl + p.z_len, max: rd.generation() });
        }
        let mut devs = Vec::new();
        let mut mc = Vec::new();
        let mut skipped = 0;
        for k in 0..p.triples {
            let mut rng = streams.stream(AUX_STREAM_BASE + (yi * p.triples + k) as u64);
            let x = random_word(spec, p.x_len, None, &mut rng);
            let x = match x {
                Some(x) => x,
                None => continue,
            };
            let y = random_word(spec, yl, x.0.last().copied(), &mut rng);
            let z = y.as_ref().and_then(|y| random_word(spec, p.z_len, y.0.last().copied(), &mut rng));
            let (y, z) = match (y, z) {
                (Some(y), Some(z)) => (y, z),
                _ => continue,
            };
            let xy = x.concat(&y);
            let yz = y.concat(&z);
            let xyz = xy.concat(&z);
            let h = [hits(&xyz)?, hits(&y)?, hits(&xy)?, hits(&yz)?];
            let se: Vec<f64> = h.iter().map(|&c| rel_se(c, sample.walks())).collect();
            if se.iter().any(|&s| s > p.max_rel_se) {
                skipped += 1;
                continue;
            }
            let ratio = (h[0] as f64 * h[1] as f64) / (h[2] as f64 * h[3] as f64);
            let dev = (ratio - 1.0).abs();
            let err = ratio * se.iter().map(|s| s * s).sum::<f64>().sqrt();
            devs.push(dev);
            mc.push(err);
            rep.rows.push(json!({
                "y_len": yl, "x": x.to_string(), "y": y.to_string(), "z": z.to_string(),
                "hits": h, "deviation": dev, "mc_error": err,
            }));
        }
        if devs.is_empty() {
            return Err(LabError::BudgetExceeded(format!("no triple at |Y| = {yl} reaches relative error {}", p.max_rel_se)));
        }
        let n = devs.len() as f64;
        let mean = devs.iter().sum::<f64>() / n;
        let var = devs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let error_bar = (var / n).sqrt() + mc.iter().sum::<f64>() / n;
        stats.push(DeviationStat { y_len: yl, used: devs.len(), skipped, mean, error_bar });
    }
    // Decay order: the longest Y sits strictly below the shortest, outside 2 error bars.
    if let (Some(first), Some(last)) = (stats.first(), stats.last()) {
        rep.passed = last.mean + 2.0 * last.error_bar < first.mean - 2.0 * first.error_bar;
    }
    for s in &stats {
        rep.rows.push(json!({ "summary": s }));
    }
    rep.rows.push(json!({ "decay_factor_per_letter": decay_factor(&stats) }));
    Ok((rep, stats))
}

/// Least-squares `exp(slope)` of `ln(mean deviation)` against `|Y|`.
pub fn decay_factor(stats: &[DeviationStat]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = stats.iter().filter(|s| s.mean > 0.0).map(|s| (s.y_len as f64, s.mean.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| (sxy / sxx).exp())
}

/// Surrogate Carleson deviation, computed from integer letter counts.
pub fn surrogate_carleson_deviation(spec: &RepellerSpec, w: &SurrogateWeights, x: &Word, y: &Word, z: &Word) -> f64 {
    let n = spec.letters();
    let c = |v: &Word| -> Vec<i64> { v.counts(n).into_iter().map(i64::from).collect() };
    let (xyz, yy, xy, yz) = (c(&x.concat(y).concat(z)), c(y), c(&x.concat(y)), c(&y.concat(z)));
    let log: f64 = (0..n)
        .map(|j| (xyz[j] + yy[j] - xy[j] - yz[j]) as f64 * w.log_omega[j])
        .sum();
    (log.exp() - 1.0).abs()
}

/// Symbolic and geometric rotation multiplicativity over word pairs.
pub fn rotation_multiplicativity_scan(rd: &RepellerDomain, pairs: &[(Word, Word)], method: RotationMethod) -> Result<VerificationReport> {
    let spec = &rd.spec;
    let mut rep = VerificationReport::new("rotation_multiplicativity");
    let n = spec.letters();
    let lr = |w: &Word| -> Result<(f64, f64)> {
        let c = rd.cylinder(w)?;
        let v = rotation::rot_crosscut(&rd.domain, &c.arc, method)?;
        Ok((v.log_rot, v.additive_error_bound))
    };
    let rows: Vec<Result<Value>> = pairs
        .par_iter()
        .map(|(x, y)| {
            let xy = x.concat(y);
            spec.check_word(&xy)?;
            // Symbolic: the count identity is exact, hence so is the deviation.
            let (cx, cy, cxy) = (x.counts(n), y.counts(n), xy.counts(n));
            let delta: Vec<i64> = (0..n).map(|j| cxy[j] as i64 - cx[j] as i64 - cy[j] as i64).collect();
            let sym_dev: f64 = delta.iter().zip(spec.angles()).map(|(&d, t)| d as f64 * t).sum();
            let mut row = json!({ "x": x.to_string(), "y": y.to_string(), "symbolic_deviation": sym_dev });
            if xy.len() <= rd.generation() {
                let last = Word(vec![x.last()]);
                let (a, ea) = lr(&xy)?;
                let (b, eb) = lr(x)?;
                let (c, ec) = lr(y)?;
                let (d, ed) = lr(&last)?;
                let dev = a - b - c + d;
                let cushion = 2.0 * (ea + eb + ec + ed);
                row["geometric_deviation"] = json!(dev);
                row["cushion"] = json!(cushion);
                row["log_rot"] = json!({ "xy": a, "x": b, "y": c, "last_letter": d });
                row["passed"] = json!(sym_dev == 0.0 && dev.abs() <= cushion);
            } else {
                row["passed"] = json!(sym_dev == 0.0);
            }
            Ok(row)
        })
        .collect();
    for r in rows {
        let r = r?;
        rep.passed &= r["passed"].as_bool().unwrap_or(false);
        rep.rows.push(r);
    }
    rep.tolerances.insert("cushion_factor".into(), 2.0);
    Ok(rep)
}

/// Uniformly sampled word pairs of the given lengths.
pub fn random_pairs(spec: &RepellerSpec, count: usize, x_len: usize, y_len: usize, seed: u64) -> Vec<(Word, Word)> {
    let streams = StreamFactory::new(seed);
    (0..count)
        .filter_map(|k| {
            let mut rng = streams.stream(AUX_STREAM_BASE + k as u64);
            let x = random_word(spec, x_len, None, &mut rng)?;
            let y = random_word(spec, y_len, Some(x.last()), &mut rng)?;
            Some((x, y))
        })
        .collect()
}

/// Exact surrogate word count by letter-count classes, when every class
/// has the same word length and the shift is full: then words never nest
/// and each class contributes its multinomial coefficient.
pub fn surrogate_class_count(spec: &RepellerSpec, w: &SurrogateWeights, p: &WordParams) -> Result<Option<BigUint>> {
    if !spec.is_full_shift() {
        return Ok(None);
    }
    let idx = spectra::word_index_set(spec, p.delta, p.tau)?;
    let lens: HashSet<u32> = idx.iter().map(|k| k.iter().sum()).collect();
    if lens.len() > 1 {
        return Ok(None);
    }
    let ls = p.delta.ln();
    let mut total = BigUint::from(0u32);
    for k in &idx {
        let e = w.eval_counts(spec, k);
        if spectra::window_passes(e.log_omega, p.alpha, p.eta, ls, p.signs.measure)
            && spectra::window_passes(e.log_rot, p.gamma, p.eta, ls, p.signs.rotation)
        {
            total += multinomial(k);
        }
    }
    Ok(Some(total))
}

/// `(Σk)! / Π k_j!`.
pub fn multinomial(k: &[u32]) -> BigUint {
    let mut acc = BigUint::from(1u32);
    let mut n = 0u32;
    for &kj in k {
        for i in 1..=kj {
            n += 1;
            acc *= n;
            acc /= i;
        }
    }
    acc
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// `Σ_{m=1}^{N} C(N, m)·mⁿ`.
pub fn multinomial_sum(big_n: u64, n: u32) -> BigUint {
    (1..=big_n).map(|m| binomial(big_n, m) * BigUint::from(m).pow(n)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    pub delta: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub eta: f64,
    pub signs: Signs,
    pub n_max: u32,
    pub max_words: usize,
}

/// `N_word(δⁿ, 2η) ≥ N_word(δ, η)ⁿ` under surrogate weights, with the
/// concatenations of the selected words checked one by one.
pub fn propagation_check(spec: &RepellerSpec, w: &SurrogateWeights, p: &PropagationParams) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("propagation");
    rep.tolerances.insert("eta_factor".into(), 2.0);
    let weights = WordWeights::Surrogate(w.clone());
    let mut base = WordParams::new(p.delta, p.alpha, p.gamma, p.eta, p.signs);
    base.max_words = p.max_words;
    let r1 = spectra::word_count(spec, &weights, &base)?;
    let n1 = r1.count as u64;
    let selected: Vec<Word> = r1.selected().cloned().collect();
    for n in 2..=p.n_max {
        let dn = p.delta.powi(n as i32);
        let mut pn = WordParams::new(dn, p.alpha, p.gamma, 2.0 * p.eta, p.signs);
        pn.max_words = p.max_words;
        let big_n1 = BigUint::from(n1);
        let lower = big_n1.pow(n);
        let bound = multinomial_sum(n1, n);
        // Direct enumeration when affordable, class counting otherwise.
        let (count_n, how) = match spectra::word_count(spec, &weights, &pn) {
            Ok(r) => (BigUint::from(r.count), "enumeration"),
            Err(LabError::BudgetExceeded(_)) => match surrogate_class_count(spec, w, &pn)? {
                Some(c) => (c, "class_count"),
                None => return Err(LabError::BudgetExceeded(format!("cannot count words at delta^{n}"))),
            },
            Err(e) => return Err(e),
        };
        // Concatenations: distinct and qualifying at δⁿ with 2η.
        let concat_total = (selected.len() as u128).pow(n);
        let (distinct, qualifying) = if concat_total <= p.max_words as u128 {
            let ls = dn.ln();
            let mut seen = HashSet::new();
            let mut ok = 0usize;
            let mut idx = vec![0usize; n as usize];
            for _ in 0..concat_total {
                let mut word = Vec::new();
                for &i in &idx {
                    word.extend_from_slice(&selected[i].0);
                }
                let wd = Word(word);
                let e = w.eval_counts(spec, &wd.counts(spec.letters()));
                if spec.check_word(&wd).is_ok()
                    && spectra::window_passes(e.log_omega, p.alpha, 2.0 * p.eta, ls, p.signs.measure)
                    && spectra::window_passes(e.log_rot, p.gamma, 2.0 * p.eta, ls, p.signs.rotation)
                {
                    ok += 1;
                }
                seen.insert(wd);
                for d in (0..idx.len()).rev() {
                    idx[d] += 1;
                    if idx[d] < selected.len() {
                        break;
                    }
                    idx[d] = 0;
                }
            }
            (Some(seen.len() as u128), Some(ok as u128))
        } else {
            (None, None)
        };
        let pass = count_n >= lower
            && bound >= lower
            && distinct.is_none_or(|d| d == concat_total)
            && qualifying.is_none_or(|q| q == concat_total);
        rep.passed &= pass;
        rep.rows.push(json!({
            "n": n, "delta": p.delta, "alpha": p.alpha, "gamma": p.gamma, "eta": p.eta,
            "n_word_delta": n1,
            "n_word_delta_n": count_n.to_string(),
            "counted_by": how,
            "lower_bound": lower.to_string(),
            "multinomial_sum": bound.to_string(),
            "concatenations_distinct": distinct.map(|d| d.to_string()),
            "concatenations_qualifying": qualifying.map(|d| d.to_string()),
            "passed": pass,
        }));
    }
    Ok(rep)
}

/// `log N / log(1/δ)` for a big count.
pub fn big_exponent(count: &BigUint, delta: f64) -> f64 {
    if count == &BigUint::from(0u32) {
        return f64::NEG_INFINITY;
    }
    let bits = count.bits();
    let ln = if bits > 1000 {
        let shift = bits - 64;
        let top: BigUint = count >> shift;
        let top_f: f64 = top.to_string().parse().unwrap_or(f64::MAX);
        top_f.ln() + shift as f64 * std::f64::consts::LN_2
    } else {
        count.to_string().parse::<f64>().unwrap_or(f64::MAX).ln()
    };
    ln / (1.0 / delta).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteScaleParams {
    pub delta0: f64,
    pub eta0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub signs: Signs,
    pub powers: Vec<u32>,
    pub epsilon: f64,
    pub max_words: usize,
}

/// Finite-scale word exponent at `(δ₀, η₀)` and at `δ₀ⁿ` with `2η₀`; deeper
/// scales must not fall below it by more than `ε`. Surrogate weights are
/// compared exactly through the counts; MC weights through the exponents.
pub fn finite_scale_spectrum(spec: &RepellerSpec, weights: &WordWeights<'_>, p: &FiniteScaleParams) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("finite_scale");
    rep.tolerances.insert("epsilon".into(), p.epsilon);
    let count_at = |delta: f64, eta: f64| -> Result<BigUint> {
        let mut wp = WordParams::new(delta, p.alpha, p.gamma, eta, p.signs);
        wp.max_words = p.max_words;
        if let WordWeights::Surrogate(w) = weights {
            if let Some(c) = surrogate_class_count(spec, w, &wp)? {
                return Ok(c);
            }
        }
        Ok(BigUint::from(spectra::word_count(spec, weights, &wp)?.count))
    };
    let c0 = count_at(p.delta0, p.eta0)?;
    let e0 = big_exponent(&c0, p.delta0);
    rep.rows.push(json!({ "power": 1, "delta": p.delta0, "eta": p.eta0, "count": c0.to_string(), "exponent": e0 }));
    for &n in &p.powers {
        let d = p.delta0.powi(n as i32);
        let c = count_at(d, 2.0 * p.eta0)?;
        let e = big_exponent(&c, d);
        let pass = if weights.is_surrogate() {
            c >= c0.pow(n)
        } else {
            e >= e0 - p.epsilon
        };
        rep.passed &= pass;
        rep.rows.push(json!({ "power": n, "delta": d, "eta": 2.0 * p.eta0, "count": c.to_string(), "exponent": e, "passed": pass }));
    }
    Ok(rep)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StabilityParams {
    pub pairs: usize,
    /// Radii are drawn log-uniformly from this range.
    pub delta_min: f64,
    pub delta_max: f64,
    pub method: RotationMethod,
    pub seed: u64,
}

/// Uniform boundary position restricted to a segment range.
fn random_pos<R: Rng>(range: (usize, usize), rng: &mut R) -> PolyPos {
    PolyPos::new(rng.random_range(range.0..range.1), rng.random_range(0.0..1.0))
}

fn log_uniform<R: Rng>(lo: f64, hi: f64, rng: &mut R) -> f64 {
    (rng.random_range(lo.ln()..=hi.ln())).exp()
}

/// `|log rot(ξ,δ) − log rot(w,δ)| ≤ 10π + 2·(error bounds)` for boundary
/// pairs with `|ξ − w| < δ`. Pairs where either value is undefined are
/// reported as skipped, not as violations.
pub fn rotation_center_stability(domain: &JordanDomain, range: (usize, usize), p: &StabilityParams) -> Result<VerificationReport> {
    let mut rep = VerificationReport::new("rotation_center_stability");
    rep.seeds = vec![p.seed];
    rep.tolerances.insert("bound".into(), 10.0 * PI);
    let streams = StreamFactory::new(p.seed);
    let rows: Vec<Value> = (0..p.pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = streams.stream(AUX_STREAM_BASE + k as u64);
            let delta = log_uniform(p.delta_min, p.delta_max, &mut rng);
            let xi = domain.point_at(random_pos(range, &mut rng));
            // Walk along the boundary until the partner leaves B(ξ, δ/2).
            let mut w = xi;
            for _ in 0..64 {
                let cand = domain.point_at(random_pos(range, &mut rng));
                if (cand - xi).norm() < 0.5 * delta && cand != xi {
                    w = cand;
                    break;
                }
                let near = xi + Complex64::from_polar(rng.random_range(0.0..0.5) * delta, rng.random_range(0.0..TAU));
                let n = domain.nearest(near);
                if (n.point - xi).norm() < delta && n.point != xi {
                    w = n.point;
                    break;
                }
            }
            let a = rotation::rot_point(domain, xi, delta, p.method);
            let b = rotation::rot_point(domain, w, delta, p.method);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    let diff = (a.log_rot - b.log_rot).abs();
                    let cushion = 2.0 * (a.additive_error_bound + b.additive_error_bound);
                    let limit = 10.0 * PI + cushion;
                    json!({
                        "xi": [xi.re, xi.im], "w": [w.re, w.im], "delta": delta,
                        "log_rot_xi": a.log_rot, "log_rot_w": b.log_rot,
                        "difference": diff, "cushion": cushion, "passed": diff <= limit,
                    })
                }
                (a, b) => json!({
                    "xi": [xi.re, xi.im], "w": [w.re, w.im], "delta": delta, "skipped": true,
                    "error": a.err().or(b.err()).map(|e| e.to_string()),
                }),
            }
        })
        .collect();
    finish_stability(&mut rep, rows);
    Ok(rep)
}

/// `|log rot(B₂) − log rot(B₁)| ≤ 120·K̂·log(1/δ₂)/log(1/δ₁) + 2·(error
/// bounds)` for concentric disks `δ₂ < δ₁` centred on the boundary.
pub fn rotation_radius_stability(domain: &JordanDomain, range: (usize, usize), k_hat: f64, p: &StabilityParams) -> Result<VerificationReport> {
    if !(p.delta_max < 1.0) {
        return Err(LabError::InvalidParameter("radii must stay below 1".into()));
    }
    let mut rep = VerificationReport::new("rotation_radius_stability");
    rep.seeds = vec![p.seed];
    rep.tolerances.insert("k_hat".into(), k_hat);
    rep.tolerances.insert("constant".into(), 120.0);
    let streams = StreamFactory::new(p.seed);
    let rows: Vec<Value> = (0..p.pairs)
        .into_par_iter()
        .map(|k| {
            let mut rng = streams.stream(AUX_STREAM_BASE + k as u64);
            let c = domain.point_at(random_pos(range, &mut rng));
            let d1 = log_uniform(p.delta_min, p.delta_max, &mut rng);
            let d2 = log_uniform(p.delta_min * p.delta_min / p.delta_max, d1, &mut rng).min(0.999 * d1);
            match (rotation::rot_point(domain, c, d1, p.method), rotation::rot_point(domain, c, d2, p.method)) {
                (Ok(a), Ok(b)) => {
                    let diff = (a.log_rot - b.log_rot).abs();
                    let cushion = 2.0 * (a.additive_error_bound + b.additive_error_bound);
                    let limit = 120.0 * k_hat * (1.0 / d2).ln() / (1.0 / d1).ln() + cushion;
                    json!({
                        "center": [c.re, c.im], "delta1": d1, "delta2": d2,
                        "log_rot_1": a.log_rot, "log_rot_2": b.log_rot,
                        "difference": diff, "limit": limit, "cushion": cushion, "passed": diff <= limit,
                    })
                }
                (a, b) => json!({
                    "center": [c.re, c.im], "delta1": d1, "delta2": d2, "skipped": true,
                    "error": a.err().or(b.err()).map(|e| e.to_string()),
                }),
            }
        })
        .collect();
    finish_stability(&mut rep, rows);
    Ok(rep)
}

fn finish_stability(rep: &mut VerificationReport, rows: Vec<Value>) {
    let evaluated = rows.iter().filter(|r| r.get("passed").is_some()).count();
    let violations = rows.iter().filter(|r| r["passed"] == json!(false)).count();
    rep.passed = violations == 0 && evaluated > 0;
    rep.rows = rows;
    rep.rows.push(json!({ "summary": { "evaluated": evaluated, "violations": violations } }));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::repeller::presets;
    use crate::spectra::Sign;

    #[test]
    fn multinomial_arithmetic() {
        assert_eq!(multinomial(&[2, 1, 0]), BigUint::from(3u32));
        assert_eq!(multinomial(&[2, 2]), BigUint::from(6u32));
        // Σ C(3,m) m³ = 3 + 3·8 + 27 = 54 ≥ 27.
        assert_eq!(multinomial_sum(3, 3), BigUint::from(54u32));
        assert!(multinomial_sum(3, 3) >= BigUint::from(27u32));
    }

    #[test]
    fn class_count_matches_enumeration() {
        let koch = presets::koch();
        let w = SurrogateWeights::uniform(4);
        for (g, s) in [(0.0, Sign::Plus), (0.2, Sign::Minus), (0.1, Sign::Both)] {
            let p = WordParams::new(3f64.powi(-4), 4f64.ln() / 3f64.ln(), g, 0.15, Signs::new(Sign::Both, s));
            let direct = spectra::word_count(&koch, &WordWeights::Surrogate(w.clone()), &p).unwrap().count;
            let class = surrogate_class_count(&koch, &w, &p).unwrap().unwrap();
            assert_eq!(class, BigUint::from(direct));
        }
    }

    #[test]
    fn surrogate_carleson_is_exactly_zero() {
        let spec = presets::twisted_koch(0.15).unwrap();
        let w = SurrogateWeights::from_measures(&[0.3, 0.2, 0.1, 0.4]).unwrap();
        for (x, y, z) in [(vec![0], vec![1, 2], vec![3]), (vec![3, 3], vec![0], vec![2, 1, 0])] {
            let d = surrogate_carleson_deviation(&spec, &w, &Word(x), &Word(y), &Word(z));
            assert_eq!(d, 0.0);
        }
    }

    #[test]
    fn propagation_single_word() {
        let koch = presets::koch();
        let w = SurrogateWeights::uniform(4);
        // A narrow window around zero rotation keeps the two untwisted letters.
        let p = PropagationParams {
            delta: 1.0 / 3.0,
            alpha: 4f64.ln() / 3f64.ln(),
            gamma: 0.0,
            eta: 0.01,
            signs: Signs::TWO_SIDED,
            n_max: 3,
            max_words: 100_000,
        };
        let rep = propagation_check(&koch, &w, &p).unwrap();
        assert!(rep.passed, "{}", rep.to_text());
        assert_eq!(rep.rows[0]["n_word_delta"], 2);
    }

    #[test]
    fn finite_scale_koch_surrogate() {
        let koch = presets::koch();
        let w = WordWeights::Surrogate(SurrogateWeights::uniform(4));
        let p = FiniteScaleParams {
            delta0: 3f64.powi(-4),
            eta0: 0.1,
            alpha: 4f64.ln() / 3f64.ln(),
            gamma: 0.0,
            signs: Signs::TWO_SIDED,
            powers: vec![2, 3],
            epsilon: 0.0,
            max_words: 100_000,
        };
        let rep = finite_scale_spectrum(&koch, &w, &p).unwrap();
        assert!(rep.passed, "{}", rep.to_text());
        let e: Vec<f64> = rep.rows.iter().map(|r| r["exponent"].as_f64().unwrap()).collect();
        assert!(e[1] >= e[0] && e[2] >= e[0]);
    }

    #[test]
    fn decay_factor_of_geometric_sequence() {
        let stats: Vec<DeviationStat> = (1..=4)
            .map(|k| DeviationStat { y_len: k, used: 10, skipped: 0, mean: 3f64.powi(-(k as i32)), error_bar: 0.0 })
            .collect();
        assert!((decay_factor(&stats).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }
}
