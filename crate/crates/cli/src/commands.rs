//! Subcommand bodies. Each returns a JSON result, a tabular rendering and
//! whether the run counts as passed (only checks can fail).

use anyhow::{bail, Context, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value as Json};
use std::fmt::Write as _;

use quasilab::atlas::{self, AtlasDomain, AtlasKind};
use quasilab::harmonic::{self, HitSample, WosOptions};
use quasilab::repeller::{self, presets, RepellerDomain, Word};
use quasilab::report::rows_to_csv;
use quasilab::rotation::{self, RotationMethod};
use quasilab::spectra::{self, Sign, Signs, SpectrumQuery, SpectrumRow, SpectrumTable, Variant, WordWeights};
use quasilab::verifier;
use quasilab::JordanDomain;

use crate::config::Settings;

pub struct Outcome {
    pub result: Json,
    pub table: String,
    /// Per-item diagnostics, emitted with `--verbose-items`.
    pub items: Option<Json>,
    pub passed: bool,
}

impl Outcome {
    fn ok(result: Json, table: String) -> Self {
        Outcome { result, table, items: None, passed: true }
    }
}

pub enum Built {
    Repeller(RepellerDomain),
    Atlas(AtlasDomain),
}

impl Built {
    pub fn domain(&self) -> &JordanDomain {
        match self {
            Built::Repeller(rd) => &rd.domain,
            Built::Atlas(ad) => ad.domain(),
        }
    }

    fn repeller(&self) -> Result<&RepellerDomain> {
        match self {
            Built::Repeller(rd) => Ok(rd),
            Built::Atlas(_) => bail!("this command needs a repeller preset"),
        }
    }
}

/// `preset` names a repeller (`koch`, `twisted_koch`, `carleson_linear`) or
/// an atlas domain (`disk`, `wedge:<alpha>`, `spiral:<alpha>:<beta>`).
pub fn build_domain(s: &Settings, default_preset: &str, default_gen: usize) -> Result<Built> {
    let preset = s.string("preset", default_preset)?;
    if let Some(kind) = parse_atlas(&preset)? {
        return Ok(Built::Atlas(AtlasDomain::new(kind)?));
    }
    let spec = repeller_spec(s, &preset)?;
    let gen = s.usize("gen", default_gen)?;
    Ok(Built::Repeller(repeller::generate_prefractal(&spec, gen)?))
}

fn repeller_spec(s: &Settings, preset: &str) -> Result<repeller::RepellerSpec> {
    let twist = if preset == "twisted_koch" { s.f64("twist", 0.15)? } else { 0.0 };
    Ok(presets::by_name(preset, twist)?)
}

fn parse_atlas(preset: &str) -> Result<Option<AtlasKind>> {
    let parts: Vec<&str> = preset.split(':').collect();
    let num = |i: usize| -> Result<f64> {
        parts.get(i).context("missing atlas parameter")?.parse::<f64>().with_context(|| format!("atlas preset `{preset}`"))
    };
    let kind = match parts[0] {
        "disk" => AtlasKind::Disk,
        "wedge" => AtlasKind::Wedge { alpha: num(1)? },
        "spiral" => AtlasKind::SpiralWedge { alpha: num(1)?, beta: num(2)? },
        _ => return Ok(None),
    };
    kind.validate()?;
    Ok(Some(kind))
}

fn method(s: &Settings) -> Result<RotationMethod> {
    match s.string("method", "tracking")?.as_str() {
        "tracking" => Ok(RotationMethod::BoundaryTracking),
        "path" => Ok(RotationMethod::PathIntegral),
        other => bail!("unknown rotation method `{other}` (expected tracking or path)"),
    }
}

fn signs(s: &Settings) -> Result<Signs> {
    Ok(Signs::new(Sign::parse(&s.string("sign.measure", "both")?)?, Sign::parse(&s.string("sign.rotation", "both")?)?))
}

fn wos_options(s: &Settings, built: &Built) -> Result<WosOptions> {
    let base = match built {
        Built::Repeller(rd) => WosOptions::for_repeller(rd),
        Built::Atlas(ad) => WosOptions::for_domain(ad.domain()),
    };
    let eps = s.f64("eps_hit", base.eps_hit)?;
    Ok(WosOptions { eps_hit: eps, ..base })
}

fn sample(s: &Settings, built: &Built, default_walks: usize) -> Result<HitSample> {
    let walks = s.usize("walks", default_walks)?;
    let seed = s.seed()?;
    let opt = wos_options(s, built)?;
    Ok(harmonic::sample_hits(built.domain(), walks, seed, &opt)?)
}

pub fn gen(s: &Settings) -> Result<Outcome> {
    let built = build_domain(s, "koch", 6)?;
    let d = built.domain();
    let samples = s.usize("dilatation.samples", 0)?;
    let dilatation = if samples > 0 { Some(repeller::dilatation_estimate(d, samples, s.seed()?)) } else { None };
    let v = d.boundary().vertices();
    let mut result = json!({
        "vertex_count": v.len(),
        "segments": d.segment_count(),
        "basepoint": [d.basepoint().re, d.basepoint().im],
        "diameter": d.diameter(),
        "reoriented": d.reoriented(),
        "dilatation": dilatation,
    });
    if let Built::Repeller(rd) = &built {
        result["generation"] = json!(rd.generation());
        result["arc_vertex_count"] = json!(rd.arc_vertex_count);
        result["repeller_segments"] = json!(rd.repeller_segments());
    }
    #[derive(Serialize)]
    struct Vertex {
        x: f64,
        y: f64,
    }
    let rows: Vec<Vertex> = v.iter().map(|p| Vertex { x: p.re, y: p.im }).collect();
    let mut out = Outcome::ok(result, rows_to_csv(&rows)?);
    out.items = Some(json!(rows.iter().map(|r| [r.x, r.y]).collect::<Vec<_>>()));
    Ok(out)
}

pub fn measure(s: &Settings) -> Result<Outcome> {
    let built = build_domain(s, "koch", 6)?;
    let hs = sample(s, &built, 100_000)?;
    let mut table = Vec::new();
    let mut result = json!({ "walks": hs.walks(), "eps_hit": hs.eps_hit, "seed": hs.seed });
    match &built {
        Built::Repeller(rd) => {
            let depth = s.usize("depth", 1)?;
            let (lo, hi) = rd.repeller_segments();
            result["repeller_measure"] = json!(harmonic::measure_of_range(&hs, lo, hi));
            let words: Vec<Json> = rd
                .spec
                .words(depth)
                .iter()
                .map(|w| -> Result<Json> {
                    let (a, b) = rd.cylinder_segments(w)?;
                    Ok(json!({ "word": w.to_string(), "measure": harmonic::measure_of_range(&hs, a, b) }))
                })
                .collect::<Result<_>>()?;
            result["cylinders"] = json!(words);
            harmonic::write_histogram_csv(&mut table, &hs, Some((rd, depth)))?;
        }
        Built::Atlas(_) => harmonic::write_histogram_csv(&mut table, &hs, None)?,
    }
    Ok(Outcome::ok(result, String::from_utf8(table)?))
}

pub fn rotate(s: &Settings) -> Result<Outcome> {
    let built = build_domain(s, "koch", 6)?;
    let m = method(s)?;
    let word = s.string("word", "")?;
    let mut rows = Vec::new();
    if word.is_empty() {
        let (x, y) = (s.f64("x", 0.0)?, s.f64("y", 0.0)?);
        let radius = s.opt_f64("radius")?.context("rotate needs `radius` (or a `word`)")?;
        let v = rotation::rot_point(built.domain(), Complex64::new(x, y), radius, m)?;
        rows.push(("point".to_string(), v));
    } else {
        let rd = built.repeller()?;
        let letters: Vec<usize> = word
            .split('.')
            .map(|t| t.trim().parse::<usize>().with_context(|| format!("bad letter `{t}` in word")))
            .collect::<Result<_>>()?;
        if letters.contains(&0) {
            bail!("word letters are 1-based");
        }
        let w = Word::from_one_based(&letters);
        let c = rd.cylinder(&w)?;
        rows.push(("crosscut".to_string(), rotation::rot_crosscut(&rd.domain, &c.arc, m)?));
        rows.push(("symbolic".to_string(), rotation::rot_symbolic(&rd.spec, &w)?));
    }
    #[derive(Serialize)]
    struct Row<'a> {
        mode: &'a str,
        log_rot: f64,
        method: RotationMethod,
        additive_error_bound: f64,
    }
    let csv_rows: Vec<Row> = rows
        .iter()
        .map(|(k, v)| Row { mode: k, log_rot: v.log_rot, method: v.method, additive_error_bound: v.additive_error_bound })
        .collect();
    let result = json!(rows.iter().map(|(k, v)| json!({ "mode": k, "value": v })).collect::<Vec<_>>());
    Ok(Outcome::ok(result, rows_to_csv(&csv_rows)?))
}

fn table_outcome(table: SpectrumTable, items: Vec<Json>) -> Result<Outcome> {
    let csv = table.to_csv()?;
    Ok(Outcome { result: json!(table), table: csv, items: Some(json!(items)), passed: true })
}

pub fn pack(s: &Settings) -> Result<Outcome> {
    let built = build_domain(s, "koch", 6)?;
    let hs = sample(s, &built, 100_000)?;
    let deltas = s.f64_list("delta", &[3f64.powi(-4), 3f64.powi(-5), 3f64.powi(-6)])?;
    let (alpha, gamma, eta) = (s.f64("alpha", 1.0)?, s.f64("gamma", 0.0)?, s.f64("eta", 0.3)?);
    let (sg, m) = (signs(s)?, method(s)?);
    let region = s.string("region", "repeller")?;
    let range = match (region.as_str(), &built) {
        ("repeller", Built::Repeller(rd)) => Some(rd.repeller_segments()),
        ("repeller", Built::Atlas(_)) | ("all", _) => None,
        (other, _) => bail!("unknown region `{other}` (expected repeller or all)"),
    };
    let query = SpectrumQuery { variant: Variant::Packing, signs: sg, params: (alpha, gamma), eta, scales: deltas.clone(), walks: hs.walks() };
    query.validate()?;
    let pts = spectra::hit_points(built.domain(), &hs);
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for &delta in &deltas {
        let grid = spectra::HitGrid::new(&pts, delta);
        let p = spectra::PackingParams { delta, alpha, gamma, eta, signs: sg, method: m };
        let r = spectra::packing_count(built.domain(), &grid, hs.walks() as u64, &p, range)?;
        rows.push(SpectrumRow { scale: delta, count: r.count, measure: r.count as f64 * delta, exponent: spectra::count_exponent(r.count, delta) });
        items.push(json!({ "delta": delta, "candidates": r.candidates, "skipped": r.skipped, "disks": r.items }));
    }
    table_outcome(SpectrumTable::new(query, rows), items)
}

fn surrogate(s: &Settings, letters: usize) -> Result<spectra::SurrogateWeights> {
    let m = s.f64_list("surrogate.measures", &[])?;
    if m.is_empty() {
        return Ok(spectra::SurrogateWeights::uniform(letters));
    }
    if m.len() != letters {
        bail!("surrogate.measures needs {letters} entries, got {}", m.len());
    }
    Ok(spectra::SurrogateWeights::from_measures(&m)?)
}

/// Weights for symbolic counts: surrogate, or MC on a generated prefractal.
struct WeightSource {
    spec: repeller::RepellerSpec,
    mc: Option<(RepellerDomain, HitSample, RotationMethod)>,
    surrogate: Option<spectra::SurrogateWeights>,
}

impl WeightSource {
    fn new(s: &Settings, default_preset: &str) -> Result<Self> {
        let preset = s.string("preset", default_preset)?;
        let spec = repeller_spec(s, &preset)?;
        match s.string("weights", "surrogate")?.as_str() {
            "surrogate" => {
                let w = surrogate(s, spec.letters())?;
                Ok(WeightSource { spec, mc: None, surrogate: Some(w) })
            }
            "mc" => {
                let rd = repeller::generate_prefractal(&spec, s.usize("gen", 6)?)?;
                let built = Built::Repeller(rd);
                let hs = sample(s, &built, 100_000)?;
                let m = method(s)?;
                let Built::Repeller(rd) = built else { unreachable!() };
                Ok(WeightSource { spec, mc: Some((rd, hs, m)), surrogate: None })
            }
            other => bail!("unknown weights `{other}` (expected surrogate or mc)"),
        }
    }

    fn weights(&self) -> Result<WordWeights<'_>> {
        match (&self.surrogate, &self.mc) {
            (Some(w), _) => Ok(WordWeights::Surrogate(w.clone())),
            (None, Some((rd, hs, m))) => Ok(WordWeights::MonteCarlo(spectra::McWeights::new(rd, hs, *m)?)),
            _ => unreachable!("one weight source is always set"),
        }
    }

    fn walks(&self) -> usize {
        self.mc.as_ref().map_or(0, |m| m.1.walks())
    }
}

pub fn words(s: &Settings) -> Result<Outcome> {
    let src = WeightSource::new(s, "koch")?;
    let deltas = s.f64_list("delta", &[3f64.powi(-3), 3f64.powi(-4), 3f64.powi(-5)])?;
    let (alpha, gamma, eta) = (s.f64("alpha", 1.0)?, s.f64("gamma", 0.0)?, s.f64("eta", 0.3)?);
    let sg = signs(s)?;
    let tau = s.f64("tau", 0.0)?;
    let max_words = s.usize("max_words", 2_000_000)?;
    let query = SpectrumQuery { variant: Variant::Word, signs: sg, params: (alpha, gamma), eta, scales: deltas.clone(), walks: src.walks() };
    query.validate()?;
    let w = src.weights()?;
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for &delta in &deltas {
        let mut p = spectra::WordParams::new(delta, alpha, gamma, eta, sg);
        p.tau = tau;
        p.max_words = max_words;
        let r = spectra::word_count(&src.spec, &w, &p)?;
        rows.push(SpectrumRow { scale: delta, count: r.count, measure: r.count as f64 * delta, exponent: spectra::count_exponent(r.count, delta) });
        items.push(json!({ "delta": delta, "candidates": r.candidates, "words": r.items }));
    }
    table_outcome(SpectrumTable::new(query, rows), items)
}

pub fn crosscuts(s: &Settings) -> Result<Outcome> {
    let src = WeightSource::new(s, "twisted_koch")?;
    let rs = s.f64_list("r", &[1.0 - 2f64.powi(-4), 1.0 - 2f64.powi(-6), 1.0 - 2f64.powi(-8)])?;
    let (a, b) = (s.f64("a", 0.0)?, s.f64("b", 0.0)?);
    let widening = s.f64("widening", 2.0)?;
    let max_len = s.usize("max_len", 8)?;
    let scales: Vec<f64> = rs.iter().map(|r| 1.0 - r).collect();
    let query = SpectrumQuery { variant: Variant::Crosscut, signs: Signs::TWO_SIDED, params: (a, b), eta: 1.0, scales, walks: src.walks() };
    query.validate()?;
    let w = src.weights()?;
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for &r in &rs {
        let c = spectra::crosscut_count(&src.spec, &w, &spectra::CrosscutParams { r, a, b, widening, max_len })?;
        let h = 1.0 - r;
        rows.push(SpectrumRow { scale: h, count: c.count, measure: c.count as f64 * h, exponent: spectra::count_exponent(c.count, h) });
        items.push(json!({
            "r": r, "window": c.window, "count_strict_window": c.count_strict_window,
            "in_measure_window": c.in_measure_window, "words": c.items,
        }));
    }
    let mut out = table_outcome(SpectrumTable::new(query, rows), items.clone())?;
    // Strict-window counts are part of the result, not only of the diagnostics.
    out.result["strict_window_counts"] = json!(items.iter().map(|i| i["count_strict_window"].clone()).collect::<Vec<_>>());
    Ok(out)
}

pub fn distortion(s: &Settings) -> Result<Outcome> {
    let built = build_domain(s, "koch", 6)?;
    let hs = sample(s, &built, 100_000)?;
    let rs = s.f64_list("r", &[1.0 - 2f64.powi(-6), 1.0 - 2f64.powi(-8), 1.0 - 2f64.powi(-10)])?;
    let (a, b, eta) = (s.f64("a", 0.0)?, s.f64("b", 0.0)?, s.f64("eta", 0.5)?);
    let (sg, m) = (signs(s)?, method(s)?);
    let scales: Vec<f64> = rs.iter().map(|r| 1.0 - r).collect();
    let query = SpectrumQuery { variant: Variant::Distortion, signs: sg, params: (a, b), eta, scales, walks: hs.walks() };
    query.validate()?;
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for &r in &rs {
        let d = spectra::distortion_count(built.domain(), &hs, &spectra::DistortionParams { r, a, b, eta, signs: sg, method: m })?;
        rows.push(SpectrumRow { scale: 1.0 - r, count: d.count, measure: d.lambda1, exponent: d.exponent });
        items.push(json!({ "r": r, "arcs": d.arcs, "items": d.items }));
    }
    table_outcome(SpectrumTable::new(query, rows), items)
}

fn report_outcome(rep: verifier::VerificationReport) -> Outcome {
    let passed = rep.passed;
    Outcome { table: rep.to_text(), result: json!(rep), items: None, passed }
}

pub fn verify(s: &Settings, lemma: &str) -> Result<Outcome> {
    match lemma {
        "carleson" => {
            let built = build_domain(s, "koch", 6)?;
            let hs = sample(s, &built, 100_000)?;
            let rd = built.repeller()?;
            let p = verifier::CarlesonParams {
                x_len: s.usize("x_len", 1)?,
                z_len: s.usize("z_len", 1)?,
                y_lens: s.u64_list("y_lens", &[1, 2, 3, 4])?.into_iter().map(|v| v as usize).collect(),
                triples: s.usize("triples", 200)?,
                max_rel_se: s.f64("max_rel_se", 0.02)?,
                seed: s.seed()?,
            };
            let (rep, _) = verifier::carleson_ratio_scan(rd, &hs, &p)?;
            Ok(report_outcome(rep))
        }
        "rotation" => {
            let built = build_domain(s, "twisted_koch", 6)?;
            let rd = built.repeller()?;
            let pairs = verifier::random_pairs(&rd.spec, s.usize("pairs", 50)?, s.usize("x_len", 3)?, s.usize("y_len", 3)?, s.seed()?);
            Ok(report_outcome(verifier::rotation_multiplicativity_scan(rd, &pairs, method(s)?)?))
        }
        "propagation" => {
            let preset = s.string("preset", "koch")?;
            let spec = repeller_spec(s, &preset)?;
            if !s.bool("surrogate", true)? {
                bail!("propagation is asserted exactly, which needs surrogate weights");
            }
            let w = surrogate(s, spec.letters())?;
            let p = verifier::PropagationParams {
                delta: s.f64("delta", 3f64.powi(-2))?,
                alpha: s.f64("alpha", 4f64.ln() / 3f64.ln())?,
                gamma: s.f64("gamma", 0.0)?,
                eta: s.f64("eta", 0.1)?,
                signs: signs(s)?,
                n_max: s.u64("n_max", 4)? as u32,
                max_words: s.usize("max_words", 2_000_000)?,
            };
            Ok(report_outcome(verifier::propagation_check(&spec, &w, &p)?))
        }
        "finite-scale" => {
            let src = WeightSource::new(s, "koch")?;
            let p = verifier::FiniteScaleParams {
                delta0: s.f64("delta", 3f64.powi(-4))?,
                eta0: s.f64("eta", 0.1)?,
                alpha: s.f64("alpha", 4f64.ln() / 3f64.ln())?,
                gamma: s.f64("gamma", 0.0)?,
                signs: signs(s)?,
                powers: s.u64_list("powers", &[2])?.into_iter().map(|v| v as u32).collect(),
                epsilon: s.f64("epsilon", 0.0)?,
                max_words: s.usize("max_words", 2_000_000)?,
            };
            Ok(report_outcome(verifier::finite_scale_spectrum(&src.spec, &src.weights()?, &p)?))
        }
        "stability" => {
            let built = build_domain(s, "koch", 6)?;
            let rd = built.repeller()?;
            let seed = s.seed()?;
            let base = verifier::StabilityParams {
                pairs: s.usize("center_pairs", 100)?,
                delta_min: s.f64("delta_min", 3f64.powi(-4))?,
                delta_max: s.f64("delta_max", 3f64.powi(-2))?,
                method: method(s)?,
                seed,
            };
            let k_hat = repeller::dilatation_estimate(&rd.domain, s.usize("dilatation.samples", 2000)?, seed);
            let a = verifier::rotation_center_stability(&rd.domain, rd.repeller_segments(), &base)?;
            let radius = verifier::StabilityParams { pairs: s.usize("radius_pairs", 50)?, ..base };
            let b = verifier::rotation_radius_stability(&rd.domain, rd.repeller_segments(), k_hat, &radius)?;
            let passed = a.passed && b.passed;
            Ok(Outcome { table: format!("{}{}", a.to_text(), b.to_text()), result: json!([a, b]), items: None, passed })
        }
        other => bail!("unknown lemma `{other}` (expected carleson, rotation, propagation, finite-scale or stability)"),
    }
}

pub fn atlas_check(s: &Settings) -> Result<Outcome> {
    let kind = match s.string("atlas.kind", "spiral")?.as_str() {
        "disk" => AtlasKind::Disk,
        "wedge" => AtlasKind::Wedge { alpha: s.f64("atlas.alpha", 0.7)? },
        "spiral" => AtlasKind::SpiralWedge { alpha: s.f64("atlas.alpha", 1.0)?, beta: s.f64("atlas.beta", 0.2)? },
        other => bail!("unknown atlas kind `{other}` (expected disk, wedge or spiral)"),
    };
    let ks: Vec<u32> = s.u64_list("ks", &[4, 5, 6, 7, 8, 9, 10, 11, 12])?.into_iter().map(|k| k as u32).collect();
    let check = atlas::atlas_check(kind, &ks, s.u64("modulus_k", 12)? as u32, s.u64("rotation_k", 10)? as u32)?;
    let mut text = format!("atlas-check {}\n", kind.describe());
    let _ = writeln!(text, "k,modulus_log_ratio,rotation_log_ratio,exact_arg_derivative,log_rot,error");
    for r in &check.rows {
        match r.probe {
            Some(p) => {
                let _ = writeln!(text, "{},{},{},{},{},", r.k, p.modulus_log_ratio(), p.rotation_log_ratio(), p.exact_arg_derivative, p.rot.log_rot);
            }
            None => {
                let _ = writeln!(text, "{},,,,,{}", r.k, r.error.as_deref().unwrap_or(""));
            }
        }
    }
    let _ = writeln!(
        text,
        "modulus: ratio {:?} at k = {}, trend {:?}: {}",
        check.modulus_ratio,
        check.modulus_k,
        check.modulus_trend,
        if check.modulus_passed { "PASS" } else { "FAIL" }
    );
    if let Some(p) = check.rotation_passed {
        let _ = writeln!(text, "rotation: ratio {:?} at k = {}: {}", check.rotation_ratio, check.rotation_k, if p { "PASS" } else { "FAIL" });
    }
    let passed = check.passed();
    Ok(Outcome { result: json!(check), table: text, items: None, passed })
}
