use orlicz_carleson::carleson::{
    annulus_decomposition, embedding_constant, embedding_family, kernel_value, verify_equivalence, weak_type_constant,
    Classification, EmbeddingConfig, EquivalenceConfig, Mode,
};
use orlicz_carleson::growth::{ClassifyOptions, GrowthFunction};
use orlicz_carleson::measure::{Atom, BoxFamily, DivergenceRule, Measure};
use orlicz_carleson::multipliers::special_measure_check;
use orlicz_carleson::numerics::QuadratureSpec;
use proptest::prelude::*;

fn power(p: f64) -> GrowthFunction {
    GrowthFunction::power(p).unwrap()
}

fn atoms(max: usize) -> impl Strategy<Value = Vec<Atom>> {
    prop::collection::vec((-20.0f64..20.0, -3.0f64..1.0, 0.01f64..5.0), 1..max)
        .prop_map(|v| v.into_iter().map(|(x, ly, mass)| Atom { x, y: 10f64.powf(ly), mass }).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn annulus_terms_sum_to_kernel(a in atoms(60), x in -5.0f64..5.0, y in 0.01f64..4.0, q in 1.5f64..4.0, s in 1.0f64..3.0) {
        let d = annulus_decomposition(&a, &power(2.0), &power(q), s, (x, y)).unwrap();
        prop_assert!((d.total - d.direct).abs() <= 1e-12 * d.direct.max(1e-300));
        for t in &d.terms {
            prop_assert!(t.kernel_sum <= t.bound * (1.0 + 1e-12), "{:?}", t);
        }
    }

    #[test]
    fn kernel_value_is_linear_in_mass(a in atoms(20), c in 0.1f64..10.0, x in -3.0f64..3.0, y in 0.05f64..3.0) {
        let spec = QuadratureSpec::default();
        let rule = DivergenceRule::default();
        let mu = Measure::atomic(a.clone()).unwrap();
        let mu_c = Measure::atomic(a.iter().map(|t| Atom { mass: c * t.mass, ..*t }).collect()).unwrap();
        let k1 = kernel_value(&mu, &power(2.0), &power(3.0), 1.0, (x, y), &spec, &rule).unwrap().value;
        let kc = kernel_value(&mu_c, &power(2.0), &power(3.0), 1.0, (x, y), &spec, &rule).unwrap().value;
        prop_assert!((kc - c * k1).abs() <= 1e-12 * kc.max(1e-300));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn weak_never_exceeds_strong(a in atoms(8), q in prop::sample::select(vec![2.0, 3.0, 4.0])) {
        let mu = Measure::atomic(a).unwrap();
        let cfg = EquivalenceConfig::default();
        let ec = EmbeddingConfig { heights: vec![0.1, 1.0], centers: vec![0.0, 3.0], ..EmbeddingConfig::default() };
        for mode in [Mode::Hardy, Mode::Bergman { alpha: 0.0 }] {
            let fam = embedding_family(&mode, &power(2.0), &ec).unwrap();
            let e = embedding_constant(&mu, &power(2.0), &power(q), &mode, &fam, &cfg).unwrap();
            let w = weak_type_constant(&mu, &power(2.0), &power(q), &mode, &fam, &cfg).unwrap();
            for (em, wm) in e.members.iter().zip(&w.members) {
                prop_assert!(wm.c_exact <= em.k_exact * (1.0 + 1e-6), "{:?} vs {:?}", wm, em);
            }
        }
    }
}

#[test]
fn special_measure_verdict_follows_nabla2() {
    let spec = QuadratureSpec::default();
    let rule = DivergenceRule::default();
    let copts = ClassifyOptions::default();
    let family = BoxFamily::default();
    let pairs = [
        (power(2.0), GrowthFunction::power_log(2.0, 1.0, 2f64.exp()).unwrap(), Mode::Hardy),
        (power(2.0), power(4.0), Mode::Hardy),
        (power(2.0), power(3.0), Mode::Hardy),
        (power(1.0), power(2.0), Mode::Hardy),
        (power(2.0), power(4.0), Mode::Bergman { alpha: 0.0 }),
    ];
    let mut verdicts = Vec::new();
    for (p1, p2, mode) in &pairs {
        let c = special_measure_check(p1, p2, mode, &family, &spec, &rule, &copts).unwrap();
        assert!(c.agrees, "{p1} {p2} {mode:?}: expected {} got {:?}", c.expected_carleson, c.box_constant.verdict);
        verdicts.push(c.expected_carleson);
    }
    assert_eq!(verdicts, [false, true, true, true, true]);
}

#[test]
fn balanced_power_pair_is_carleson() {
    // 1/p = (2 + α)/q with p = 1, q = 3, α = 1
    let r = verify_equivalence(
        &Measure::weighted_volume(1.0).unwrap(),
        &power(1.0),
        &power(3.0),
        &Mode::Hardy,
        &EquivalenceConfig::default(),
    )
    .unwrap();
    assert_eq!(r.classification, Classification::Carleson);
    assert!(r.coherent);
}
