use std::f64::consts::PI;

use carleman_lab::geometry::{compute_gamma, DomainSpec, FaceLabel, GammaPiece};
use carleman_lab::reconstruction::{
    add_noise, discrepancy_principle, dot_product_test, reconstruct, relative_error, AssembledMap, CauchyMap,
    InverseProblemSpec, LinearMap, ParabolicLocalMap, Scenario, WaveBoundaryMap,
};
use carleman_lab::solvers::{Coefficients, TimeFactor};
use proptest::prelude::*;

fn right_face() -> Vec<GammaPiece> {
    vec![GammaPiece {
        face: FaceLabel::Right,
        range: (0.0, 0.0),
    }]
}

fn wave_map(nx: usize) -> (DomainSpec, WaveBoundaryMap) {
    let dom = DomainSpec::interval(0.0, 1.0, nx).unwrap();
    let gamma = compute_gamma(&dom, [-1.0, 0.0]).unwrap().gamma;
    let map = WaveBoundaryMap::new(
        &dom,
        &Coefficients::zero(&dom),
        &TimeFactor::affine(1.0, 1.0),
        &gamma,
        1.15 * 3f64.sqrt(),
        None,
    )
    .unwrap();
    (dom, map)
}

fn sine_truth(dom: &DomainSpec, map: &WaveBoundaryMap) -> Vec<f64> {
    map.restrict(&dom.points().iter().map(|p| (PI * p[0]).sin()).collect::<Vec<_>>())
}

#[test]
fn every_scenario_passes_the_dot_product_test() {
    let dom = DomainSpec::interval(0.0, 1.0, 61).unwrap();
    let coeffs = Coefficients::constant(&dom, [0.3, 0.0], 0.5);
    let r = TimeFactor::affine(1.0, 1.0);
    let wave = WaveBoundaryMap::new(&dom, &coeffs, &r, &right_face(), 2.0, None).unwrap();
    let local = ParabolicLocalMap::new(&dom, &coeffs, &r, &right_face(), 1.0, 0.01, 0.5).unwrap();
    let cauchy = CauchyMap::new(&dom, &coeffs, &right_face(), 0.5, 0.01).unwrap();
    let maps: [&dyn LinearMap; 3] = [&wave, &local, &cauchy];
    for (k, map) in maps.into_iter().enumerate() {
        let mismatch = dot_product_test(map, 20, k as u64).unwrap();
        assert!(mismatch <= 1e-10, "scenario {k}: {mismatch}");
    }
}

#[test]
fn zero_data_gives_zero_and_reconstruction_is_homogeneous() {
    let (dom, map) = wave_map(81);
    let spec = InverseProblemSpec::new(Scenario::HyperbolicBoundary, 1e-6);
    let zero = reconstruct(&map, &vec![0.0; map.range_dim()], &spec).unwrap();
    assert!(zero.f.iter().all(|v| *v == 0.0));
    let d = map.apply(&sine_truth(&dom, &map)).unwrap();
    let d2: Vec<f64> = d.iter().map(|v| 2.0 * v).collect();
    let a = reconstruct(&map, &d, &spec).unwrap();
    let b = reconstruct(&map, &d2, &spec).unwrap();
    let scale = a.f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (x, y) in a.f.iter().zip(&b.f) {
        assert!((2.0 * x - y).abs() <= 1e-9 * scale);
    }
}

#[test]
fn cg_energy_is_monotone_on_every_scenario() {
    let dom = DomainSpec::interval(0.0, 1.0, 41).unwrap();
    let coeffs = Coefficients::zero(&dom);
    let r = TimeFactor::affine(1.0, 1.0);
    let local = ParabolicLocalMap::new(&dom, &coeffs, &r, &right_face(), 1.0, 0.01, 0.5).unwrap();
    let cauchy = CauchyMap::new(&dom, &coeffs, &right_face(), 0.5, 0.01).unwrap();
    for (map, scenario) in [(&local as &dyn LinearMap, Scenario::ParabolicLocal), (&cauchy, Scenario::Cauchy)] {
        let x: Vec<f64> = (0..map.domain_dim()).map(|i| ((i + 1) as f64 * 0.37).sin()).collect();
        let d = map.apply(&x).unwrap();
        let res = reconstruct(map, &d, &InverseProblemSpec::new(scenario, 1e-4)).unwrap();
        assert!(res.energy_increase() <= 1e-12, "{}", res.energy_increase());
        assert!(res.converged);
    }
}

#[test]
fn noisy_error_is_stable_under_refinement() {
    let errors: Vec<f64> = [101, 201, 401]
        .iter()
        .map(|&nx| {
            let (dom, map) = wave_map(nx);
            let am = AssembledMap::from_map(&map).unwrap();
            let truth = sine_truth(&dom, &map);
            let clean = am.apply(&truth).unwrap();
            let spec = InverseProblemSpec::new(Scenario::HyperbolicBoundary, 1e-8);
            let runs: Vec<f64> = (0..8)
                .map(|seed| {
                    let (d, eta) = add_noise(&clean, am.range_weights(), 1e-2, seed).unwrap();
                    let res = discrepancy_principle(&am, &d, eta, &spec).unwrap();
                    relative_error(&am, &res.f, &truth)
                })
                .collect();
            runs.iter().sum::<f64>() / runs.len() as f64
        })
        .collect();
    for w in errors.windows(2) {
        assert!(w[1] <= 1.05 * w[0], "{errors:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn forward_map_is_additive(a in prop::collection::vec(-1.0f64..1.0, 39), b in prop::collection::vec(-1.0f64..1.0, 39)) {
        let (_, map) = wave_map(41);
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        let da = map.apply(&a).unwrap();
        let db = map.apply(&b).unwrap();
        let ds = map.apply(&sum).unwrap();
        let scale = ds.iter().chain(&da).chain(&db).fold(1.0f64, |m, v| m.max(v.abs()));
        for ((x, y), s) in da.iter().zip(&db).zip(&ds) {
            prop_assert!((x + y - s).abs() <= 1e-12 * scale);
        }
    }
}
