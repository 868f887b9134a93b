use proptest::prelude::*;
use quasilab::harmonic::{sample_hits, WosOptions};
use quasilab::repeller::{generate_prefractal, presets, Word};
use quasilab::spectra::{self, window_passes, Sign, Signs, SurrogateWeights, WordParams, WordWeights};
use quasilab::verifier;

fn sign() -> impl Strategy<Value = Sign> {
    prop_oneof![Just(Sign::Plus), Just(Sign::Minus), Just(Sign::Both)]
}

fn weights() -> impl Strategy<Value = SurrogateWeights> {
    prop::collection::vec(0.05f64..1.0, 4).prop_map(|m| SurrogateWeights::from_measures(&m).unwrap())
}

fn word(len: std::ops::Range<usize>) -> impl Strategy<Value = Word> {
    prop::collection::vec(0u8..4, len).prop_map(Word::new)
}

fn passed(spec: &quasilab::repeller::RepellerSpec, w: &SurrogateWeights, p: &WordParams) -> usize {
    let r = spectra::word_count(spec, &WordWeights::Surrogate(w.clone()), p).unwrap();
    r.items.iter().filter(|i| i.passed).count()
}

proptest! {
    #[test]
    fn window_widens_with_eta(lv in -20.0f64..0.0, e in -2.0f64..3.0, eta in 0.0f64..1.0, extra in 0.0f64..1.0,
                              ls in -10.0f64..-0.1, s in sign()) {
        if window_passes(lv, e, eta, ls, s) {
            prop_assert!(window_passes(lv, e, eta + extra, ls, s));
        }
    }

    #[test]
    fn two_sided_implies_one_sided(lv in -20.0f64..0.0, e in -2.0f64..3.0, eta in 0.0f64..1.0, ls in -10.0f64..-0.1) {
        let both = window_passes(lv, e, eta, ls, Sign::Both);
        prop_assert_eq!(both, window_passes(lv, e, eta, ls, Sign::Plus) && window_passes(lv, e, eta, ls, Sign::Minus));
    }

    #[test]
    fn sign_swap_is_an_involution(s in sign()) {
        prop_assert_eq!(s.swapped().swapped(), s);
    }

    #[test]
    fn word_counts_grow_with_eta(w in weights(), alpha in 0.8f64..1.6, gamma in -0.5f64..0.5,
                                 eta in 0.02f64..0.3, extra in 0.0f64..0.3, sm in sign(), sr in sign()) {
        let spec = presets::twisted_koch(0.15).unwrap();
        let mut p = WordParams::new(3f64.powi(-3), alpha, gamma, eta, Signs::new(sm, sr));
        p.tau = 0.5;
        let narrow = passed(&spec, &w, &p);
        let wide = passed(&spec, &w, &WordParams { eta: eta + extra, ..p });
        prop_assert!(narrow <= wide, "{narrow} > {wide}");
    }

    #[test]
    fn two_sided_count_below_one_sided(w in weights(), alpha in 0.8f64..1.6, gamma in -0.5f64..0.5, eta in 0.02f64..0.3) {
        let spec = presets::koch();
        let p = WordParams::new(3f64.powi(-4), alpha, gamma, eta, Signs::TWO_SIDED);
        let both = passed(&spec, &w, &p);
        for signs in [Signs::new(Sign::Plus, Sign::Both), Signs::new(Sign::Minus, Sign::Both),
                      Signs::new(Sign::Both, Sign::Plus), Signs::new(Sign::Both, Sign::Minus)] {
            let one = passed(&spec, &w, &WordParams { signs, ..p });
            prop_assert!(both <= one);
        }
    }

    #[test]
    fn reflection_swaps_rotation_sign(w in weights(), alpha in 0.8f64..1.6, gamma in -0.5f64..0.5,
                                      eta in 0.02f64..0.3, sm in sign(), sr in sign()) {
        let spec = presets::twisted_koch(0.15).unwrap();
        let refl = spec.reflect();
        let weights = WordWeights::Surrogate(w);
        let mut p = WordParams::new(3f64.powi(-3), alpha, gamma, eta, Signs::new(sm, sr));
        p.tau = 0.5;
        let q = WordParams { gamma: -gamma, signs: Signs::new(sm, sr.swapped()), ..p };
        let a = spectra::word_count(&spec, &weights, &p).unwrap().count;
        let b = spectra::word_count(&refl, &weights, &q).unwrap().count;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn composition_is_multiplicative(x in word(1..6), y in word(1..6)) {
        let spec = presets::twisted_koch(0.15).unwrap();
        let (fx, fy, fxy) = (spec.compose(&x), spec.compose(&y), spec.compose(&x.concat(&y)));
        prop_assert!((fxy.linear() - fx.linear() * fy.linear()).norm() < 1e-12);
        let d = spec.renormalized_diameter(&x.concat(&y)) - spec.renormalized_diameter(&x) * spec.renormalized_diameter(&y);
        prop_assert!(d.abs() < 1e-15);
    }

    #[test]
    fn surrogate_carleson_ratio_is_exact(w in weights(), x in word(1..5), y in word(1..6), z in word(1..5)) {
        let spec = presets::twisted_koch(0.15).unwrap();
        prop_assert!(verifier::surrogate_carleson_deviation(&spec, &w, &x, &y, &z).abs() < 1e-9);
    }

    #[test]
    fn reflect_is_an_involution(t in -0.3f64..0.3) {
        let spec = presets::twisted_koch(t).unwrap();
        let back = spec.reflect().reflect();
        for (a, b) in spec.maps.iter().zip(&back.maps) {
            prop_assert!((a.linear() - b.linear()).norm() < 1e-12);
            prop_assert!((a.translation - b.translation).norm() < 1e-12);
        }
    }
}

#[test]
fn hit_sample_is_seed_deterministic_across_pools() {
    let rd = generate_prefractal(&presets::koch(), 4).unwrap();
    let opt = WosOptions::for_repeller(&rd);
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| sample_hits(&rd.domain, 20_000, 5, &opt).unwrap().histogram().to_vec())
    };
    let a = run(1);
    assert_eq!(a, run(1));
    assert_eq!(a, run(3));
    assert_ne!(a, other_seed(&rd, &opt));
}

fn other_seed(rd: &quasilab::repeller::RepellerDomain, opt: &WosOptions) -> Vec<u64> {
    sample_hits(&rd.domain, 20_000, 6, opt).unwrap().histogram().to_vec()
}
