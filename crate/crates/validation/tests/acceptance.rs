//! Acceptance criteria 1-12, each at its stated tolerance. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::PI;
use std::io::Write;

use quasilab::atlas::{self, AtlasDomain, AtlasKind};
use quasilab::harmonic::{self, sample_hits, HitSample, WosOptions};
use quasilab::repeller::{dilatation_estimate, generate_prefractal, presets, RepellerDomain, Word};
use quasilab::rotation::RotationMethod;
use quasilab::spectra::{self, DistortionParams, HitGrid, PackingParams, Sign, Signs, SurrogateWeights, WordParams, WordWeights};
use quasilab::verifier::{self, CarlesonParams, PropagationParams, StabilityParams};
use quasilab_validation::{run, tally, Outcome};

type Check = Result<(bool, String), String>;

const TRACK: RotationMethod = RotationMethod::BoundaryTracking;

fn e<E: std::fmt::Display>(x: E) -> String {
    x.to_string()
}

fn repeller_sample(rd: &RepellerDomain, walks: usize, seed: u64) -> Result<HitSample, String> {
    sample_hits(&rd.domain, walks, seed, &WosOptions::for_repeller(rd)).map_err(e)
}

/// Disk harmonic measure: 20 equal arcs within 3 se of 1/20 at 10⁵ walks,
/// and a χ² uniformity p-value above 0.001.
fn criterion_1() -> Check {
    let ad = AtlasDomain::new(AtlasKind::Disk).map_err(e)?;
    let s = sample_hits(ad.domain(), 100_000, 1, &WosOptions::for_domain(ad.domain())).map_err(e)?;
    let n = 20;
    let mut worst: f64 = 0.0;
    let mut chi2 = 0.0;
    let mut all = true;
    for j in 0..n {
        let (t0, t1) = (2.0 * PI * j as f64 / n as f64, 2.0 * PI * (j + 1) as f64 / n as f64);
        let est = if j + 1 == n {
            harmonic::measure_of_arc(&s, ad.position_of(t0), ad.position_of(0.0))
        } else {
            harmonic::measure_of_arc(&s, ad.position_of(t0), ad.position_of(t1))
        };
        let expected = (t1 - t0) / (2.0 * PI);
        let z = (est.value - expected).abs() / est.std_error;
        worst = worst.max(z);
        all &= z <= 3.0;
        let exp_hits = expected * s.walks() as f64;
        chi2 += (est.hits as f64 - exp_hits).powi(2) / exp_hits;
    }
    let p = 1.0 - ChiSquared::new((n - 1) as f64).map_err(e)?.cdf(chi2);
    Ok((all && p > 1e-3, format!("max |z| = {worst:.2} (limit 3), chi2 = {chi2:.1}, p = {p:.3}")))
}

fn atlas_kinds() -> [AtlasKind; 3] {
    [
        AtlasKind::Wedge { alpha: 0.7 },
        AtlasKind::SpiralWedge { alpha: 1.0, beta: 0.2 },
        AtlasKind::SpiralWedge { alpha: 1.0, beta: -0.2 },
    ]
}

const KS: [u32; 9] = [4, 5, 6, 7, 8, 9, 10, 11, 12];

/// Modulus proxy ratio in [0.9, 1.1] at k = 12 with |trend| ≤ 0.1.
fn criterion_2() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in atlas_kinds() {
        let c = atlas::atlas_check(kind, &KS, 12, 10).map_err(e)?;
        ok &= c.modulus_passed;
        detail.push(format!(
            "{}: ratio {:.3} trend {:.4}",
            kind.describe(),
            c.modulus_ratio.unwrap_or(f64::NAN),
            c.modulus_trend.unwrap_or(f64::NAN)
        ));
    }
    Ok((ok, detail.join("; ")))
}

/// Rotation ratio in [0.85, 1.15] at k = 10 on both spiral wedges.
fn criterion_3() -> Check {
    let mut ok = true;
    let mut detail = Vec::new();
    for kind in &atlas_kinds()[1..] {
        let c = atlas::atlas_check(*kind, &KS, 12, 10).map_err(e)?;
        ok &= c.rotation_passed == Some(true);
        detail.push(format!("{}: ratio {:.3}", kind.describe(), c.rotation_ratio.unwrap_or(f64::NAN)));
    }
    Ok((ok, detail.join("; ")))
}

/// Rotation stability: 100 centre pairs within 10π, 50 concentric pairs
/// within 120·K̂·log(1/δ₂)/log(1/δ₁), each plus twice the method bounds.
fn criterion_4() -> Check {
    let rd = generate_prefractal(&presets::koch(), 6).map_err(e)?;
    let k_hat = dilatation_estimate(&rd.domain, 2000, 1);
    let p = StabilityParams { pairs: 100, delta_min: 3f64.powi(-4), delta_max: 3f64.powi(-2), method: TRACK, seed: 11 };
    let a = verifier::rotation_center_stability(&rd.domain, rd.repeller_segments(), &p).map_err(e)?;
    let b = verifier::rotation_radius_stability(&rd.domain, rd.repeller_segments(), k_hat, &StabilityParams { pairs: 50, ..p })
        .map_err(e)?;
    let summary = |r: &verifier::VerificationReport| r.rows.last().map(|v| v["summary"].to_string()).unwrap_or_default();
    Ok((a.passed && b.passed, format!("centre {}, radius {} (K = {k_hat:.3})", summary(&a), summary(&b))))
}

/// Koch packing slope over δ = 3^{-m}, m = 4..7, equals log 4/log 3 ± 0.05.
fn criterion_5() -> Check {
    let rd = generate_prefractal(&presets::koch(), 8).map_err(e)?;
    let s = repeller_sample(&rd, 1_000_000, 7)?;
    let pts = spectra::hit_points(&rd.domain, &s);
    let mut rows = Vec::new();
    for m in 4..=7 {
        let delta = 3f64.powi(-m);
        let grid = HitGrid::new(&pts, delta);
        let p = PackingParams { delta, alpha: 4f64.ln() / 3f64.ln(), gamma: 0.0, eta: 10.0, signs: Signs::TWO_SIDED, method: TRACK };
        let r = spectra::packing_count(&rd.domain, &grid, s.walks() as u64, &p, Some(rd.repeller_segments())).map_err(e)?;
        rows.push((delta, r.count as f64));
    }
    let fit = spectra::fit_exponent(&rows).map_err(e)?;
    let target = 4f64.ln() / 3f64.ln();
    let counts: Vec<u64> = rows.iter().map(|r| r.1 as u64).collect();
    Ok(((fit.slope - target).abs() <= 0.05, format!("slope {:.4} vs {target:.4}, counts {counts:?}", fit.slope)))
}

/// d(0,0) = 1 ± 0.1 on the disk and on Koch gen 6 at 1-r = 2^{-8}, 2^{-10}.
fn criterion_6() -> Check {
    let disk = AtlasDomain::new(AtlasKind::Disk).map_err(e)?;
    let koch = generate_prefractal(&presets::koch(), 6).map_err(e)?;
    let sd = sample_hits(disk.domain(), 200_000, 3, &WosOptions::for_domain(disk.domain())).map_err(e)?;
    let sk = repeller_sample(&koch, 200_000, 3)?;
    let mut ok = true;
    let mut detail = Vec::new();
    for (name, d, s) in [("disk", disk.domain(), &sd), ("koch", &koch.domain, &sk)] {
        for k in [8, 10] {
            let p = DistortionParams { r: 1.0 - 2f64.powi(-k), a: 0.0, b: 0.0, eta: 0.5, signs: Signs::TWO_SIDED, method: TRACK };
            let r = spectra::distortion_count(d, s, &p).map_err(e)?;
            ok &= (r.exponent - 1.0).abs() <= 0.1;
            detail.push(format!("{name} k={k}: {:.3}", r.exponent));
        }
    }
    Ok((ok, detail.join(", ")))
}

/// Carleson deviation at |Y| = 4 below |Y| = 1 outside two error bars at
/// 10⁷ walks; the surrogate deviation is exactly zero.
fn criterion_7() -> Check {
    let spec = presets::koch();
    let rd = generate_prefractal(&spec, 6).map_err(e)?;
    let s = repeller_sample(&rd, 10_000_000, 5)?;
    let p = CarlesonParams { x_len: 1, z_len: 1, y_lens: vec![1, 2, 3, 4], triples: 200, max_rel_se: 0.02, seed: 9 };
    let (rep, stats) = verifier::carleson_ratio_scan(&rd, &s, &p).map_err(e)?;
    let weights = [SurrogateWeights::uniform(4), SurrogateWeights::from_measures(&[0.4, 0.1, 0.2, 0.3]).map_err(e)?];
    let pairs = verifier::random_pairs(&spec, 50, 2, 4, 21);
    let mut surrogate_zero = true;
    for w in &weights {
        for (xy, z) in &pairs {
            let (x, y) = (Word(xy.0[..1].to_vec()), Word(xy.0[1..].to_vec()));
            surrogate_zero &= verifier::surrogate_carleson_deviation(&spec, w, &x, &y, z) == 0.0;
        }
    }
    let parts: Vec<String> = stats
        .iter()
        .map(|s| format!("|Y|={}: {:.4} ± {:.4} (n={})", s.y_len, s.mean, s.error_bar, s.used))
        .collect();
    Ok((rep.passed && surrogate_zero, format!("{}; surrogate exact: {surrogate_zero}", parts.join(", "))))
}

/// Symbolic identity exact; geometric deviation within its cushion on 50 pairs.
fn criterion_8() -> Check {
    let rd = generate_prefractal(&presets::twisted_koch(0.15).map_err(e)?, 6).map_err(e)?;
    let pairs = verifier::random_pairs(&rd.spec, 50, 3, 3, 13);
    let rep = verifier::rotation_multiplicativity_scan(&rd, &pairs, TRACK).map_err(e)?;
    let max_dev = rep.rows.iter().filter_map(|r| r["geometric_deviation"].as_f64()).fold(0.0, |m: f64, d| m.max(d.abs()));
    let max_sym = rep.rows.iter().filter_map(|r| r["symbolic_deviation"].as_f64()).fold(0.0, |m: f64, d| m.max(d.abs()));
    let cushion = rep.rows.iter().filter_map(|r| r["cushion"].as_f64()).fold(f64::INFINITY, f64::min);
    let violations = rep.rows.iter().filter(|r| r["passed"] == serde_json::json!(false)).count();
    Ok((
        rep.passed && pairs.len() == 50,
        format!("max |geometric deviation| {max_dev:.3} (cushion {cushion:.1}), max symbolic {max_sym}, violations {violations}"),
    ))
}

/// N_word(δⁿ, 2η) ≥ N_word(δ, η)ⁿ exactly, n = 2, 3, 4, at three triples.
/// Koch with weights (0.3, 0.2, 0.2, 0.3) at δ = 1/9: the triples select
/// the straight heavy words, the once-turned mixed words and the balanced
/// light words respectively.
fn criterion_9() -> Check {
    let spec = presets::koch();
    let w = SurrogateWeights::from_measures(&[0.3, 0.2, 0.2, 0.3]).map_err(e)?;
    let triples = [(1.1, 0.0, 0.1), (1.28, -0.48, 0.1), (1.465, 0.0, 0.1)];
    let mut ok = true;
    let mut detail = Vec::new();
    for (alpha, gamma, eta) in triples {
        let p = PropagationParams { delta: 1.0 / 9.0, alpha, gamma, eta, signs: Signs::TWO_SIDED, n_max: 4, max_words: 2_000_000 };
        let rep = verifier::propagation_check(&spec, &w, &p).map_err(e)?;
        let n1 = rep.rows.first().and_then(|r| r["n_word_delta"].as_u64()).unwrap_or(0);
        // An empty family would make the inequality vacuous.
        ok &= rep.passed && n1 > 0;
        let counts: Vec<&str> = rep.rows.iter().map(|r| r["n_word_delta_n"].as_str().unwrap_or("?")).collect();
        detail.push(format!("({alpha},{gamma},{eta}): N={n1}, N_n={}", counts.join("/")));
    }
    Ok((ok, detail.join("; ")))
}

/// |d(a,b) − (1−a)·f(1/(1−a), −b/(1−a))| ≤ 0.15 at matched scales on
/// twisted_koch(0.15), for (a,b) = (0,0) and (0,0.2) at 1-r = 2^{-10}.
fn criterion_10() -> Check {
    let rd = generate_prefractal(&presets::twisted_koch(0.15).map_err(e)?, 7).map_err(e)?;
    let s = repeller_sample(&rd, 400_000, 3)?;
    let pts = spectra::hit_points(&rd.domain, &s);
    let h = 2f64.powi(-10);
    let eta = 0.5;
    let mut ok = true;
    let mut detail = Vec::new();
    for (a, b) in [(0.0, 0.0), (0.0, 0.2)] {
        let dp = DistortionParams { r: 1.0 - h, a, b, eta, signs: Signs::TWO_SIDED, method: TRACK };
        let d = spectra::distortion_count(&rd.domain, &s, &dp).map_err(e)?.exponent;
        let delta = h.powf(1.0 - a);
        let grid = HitGrid::new(&pts, delta);
        let pp = PackingParams {
            delta,
            alpha: 1.0 / (1.0 - a),
            gamma: -b / (1.0 - a),
            eta: eta / (1.0 - a),
            signs: Signs::TWO_SIDED,
            method: TRACK,
        };
        let n = spectra::packing_count(&rd.domain, &grid, s.walks() as u64, &pp, Some(rd.repeller_segments())).map_err(e)?.count;
        let f = spectra::count_exponent(n, delta);
        let gap = (d - (1.0 - a) * f).abs();
        ok &= gap <= 0.15;
        detail.push(format!("(a,b)=({a},{b}): d {d:.3}, (1-a)f {:.3}, gap {gap:.3}", (1.0 - a) * f));
    }
    Ok((ok, detail.join("; ")))
}

/// Reflection: γ-negated, σ′-swapped counts equal exactly under surrogate
/// weights and within MC bars for packing on the reflected prefractal.
fn criterion_11() -> Check {
    let spec = presets::twisted_koch(0.15).map_err(e)?;
    let refl = spec.reflect();
    let w = WordWeights::Surrogate(SurrogateWeights::from_measures(&[0.35, 0.15, 0.2, 0.3]).map_err(e)?);
    let mut exact = true;
    let mut cases = 0;
    for delta in [3f64.powi(-3), 3f64.powi(-5)] {
        for (gamma, sm, sr) in [(0.1, Sign::Both, Sign::Plus), (-0.2, Sign::Plus, Sign::Minus), (0.0, Sign::Minus, Sign::Both)] {
            let p = WordParams::new(delta, 1.2, gamma, 0.2, Signs::new(sm, sr));
            let q = WordParams::new(delta, 1.2, -gamma, 0.2, Signs::new(sm, sr.swapped()));
            let a = spectra::word_count(&spec, &w, &p).map_err(e)?.count;
            let b = spectra::word_count(&refl, &w, &q).map_err(e)?.count;
            exact &= a == b;
            cases += 1;
        }
    }
    let rd = generate_prefractal(&spec, 6).map_err(e)?;
    let rr = generate_prefractal(&refl, 6).map_err(e)?;
    let (sa, sb) = (repeller_sample(&rd, 200_000, 17)?, repeller_sample(&rr, 200_000, 17)?);
    let (pa, pb) = (spectra::hit_points(&rd.domain, &sa), spectra::hit_points(&rr.domain, &sb));
    let delta = 3f64.powi(-4);
    let mut mc_ok = true;
    let mut mc = Vec::new();
    for (gamma, sr) in [(0.2, Sign::Plus), (-0.1, Sign::Minus)] {
        let p = PackingParams { delta, alpha: 1.2, gamma, eta: 0.4, signs: Signs::new(Sign::Both, sr), method: TRACK };
        let q = PackingParams { gamma: -gamma, signs: Signs::new(Sign::Both, sr.swapped()), ..p };
        let na = spectra::packing_count(&rd.domain, &HitGrid::new(&pa, delta), sa.walks() as u64, &p, Some(rd.repeller_segments()))
            .map_err(e)?
            .count as f64;
        let nb = spectra::packing_count(&rr.domain, &HitGrid::new(&pb, delta), sb.walks() as u64, &q, Some(rr.repeller_segments()))
            .map_err(e)?
            .count as f64;
        // Counting noise bar: two standard deviations of a Poisson difference.
        let bar = 2.0 * (na + nb).sqrt();
        mc_ok &= (na - nb).abs() <= bar;
        mc.push(format!("{na}/{nb} (bar {bar:.1})"));
    }
    Ok((exact && mc_ok, format!("surrogate {cases} cases exact: {exact}; mc packing {}", mc.join(", "))))
}

/// Determinism: identical seeds give byte-identical serialized outputs,
/// regardless of the worker count.
fn criterion_12() -> Check {
    let rd = generate_prefractal(&presets::koch(), 5).map_err(e)?;
    let render = |threads: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(e)?;
        pool.install(|| {
            let s = repeller_sample(&rd, 50_000, 99)?;
            let pts = spectra::hit_points(&rd.domain, &s);
            let p = PackingParams { delta: 3f64.powi(-3), alpha: 1.26, gamma: 0.0, eta: 0.5, signs: Signs::TWO_SIDED, method: TRACK };
            let r = spectra::packing_count(&rd.domain, &HitGrid::new(&pts, p.delta), s.walks() as u64, &p, Some(rd.repeller_segments()))
                .map_err(e)?;
            let dp = DistortionParams { r: 1.0 - 2f64.powi(-6), a: 0.0, b: 0.0, eta: 0.5, signs: Signs::TWO_SIDED, method: TRACK };
            let d = spectra::distortion_count(&rd.domain, &s, &dp).map_err(e)?;
            Ok(format!("{}{}{}", serde_json::to_string(s.histogram()).map_err(e)?, serde_json::to_string(&r).map_err(e)?, serde_json::to_string(&d).map_err(e)?))
        })
    };
    let a = render(1)?;
    let b = render(1)?;
    let c = render(4)?;
    Ok((a == b && a == c, format!("{} bytes, rerun identical: {}, 1 vs 4 threads identical: {}", a.len(), a == b, a == c)))
}

fn main() {
    let criteria: Vec<(u32, &str, fn() -> Check)> = vec![
        (1, "disk harmonic measure", criterion_1),
        (2, "atlas modulus (HM*)", criterion_2),
        (3, "atlas rotation (R*)", criterion_3),
        (4, "rotation stability", criterion_4),
        (5, "koch box dimension", criterion_5),
        (6, "d(0,0) = 1", criterion_6),
        (7, "refined Carleson decay", criterion_7),
        (8, "rotation multiplicativity", criterion_8),
        (9, "propagation", criterion_9),
        (10, "relation theorem at desk scale", criterion_10),
        (11, "reflection symmetry", criterion_11),
        (12, "determinism", criterion_12),
    ];
    let filter: Vec<u32> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|v| v.split(',').filter_map(|t| t.trim().parse().ok()).collect())
        .unwrap_or_default();
    let mut out = std::io::stdout();
    let mut outcomes: Vec<Outcome> = Vec::new();
    for (id, title, f) in criteria {
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let o = run(id, title, f);
        let _ = writeln!(out, "{o}");
        let _ = out.flush();
        outcomes.push(o);
    }
    let (passed, failed) = tally(&outcomes);
    let _ = writeln!(out, "acceptance: {passed}/{} passed; failed: {failed:?}", outcomes.len());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
