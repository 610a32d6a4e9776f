use carleman_lab::geometry::DomainSpec;
use carleman_lab::harness::{
    cauchy_stability_experiment, holder_experiment, lipschitz_experiment, EnsembleSpec, HyperbolicSetup,
    ParabolicSetup,
};
use carleman_lab::weights::{select_cauchy_n, select_cauchy_parameters};

#[test]
fn lipschitz_ratio_is_refinement_stable_at_t2() {
    let rep = lipschitz_experiment(&EnsembleSpec::fourier(50, 1), &HyperbolicSetup::unit_interval(2.0)).unwrap();
    assert!(rep.refinement_variation.unwrap() < 0.2);
    assert!(rep.consistency_ok);
    assert!(rep.constants.c0.unwrap() > 0.0);
}

#[test]
fn lipschitz_ratio_is_scale_invariant() {
    let mut setup = HyperbolicSetup::unit_interval(2.0);
    setup.grids = vec![101];
    let one = lipschitz_experiment(&EnsembleSpec::profile("sin(pi * x) + x * (1 - x)"), &setup).unwrap();
    let many = lipschitz_experiment(&EnsembleSpec::profile("-7.5 * (sin(pi * x) + x * (1 - x))"), &setup).unwrap();
    let (a, b) = (one.ratios(101)[0], many.ratios(101)[0]);
    assert!((a / b - 1.0).abs() < 1e-10, "{a} vs {b}");
}

#[test]
fn holder_scaling_family_fits_a_power_law() {
    let mut setup = ParabolicSetup::unit_interval();
    setup.domain = DomainSpec::interval(0.0, 1.0, 51).unwrap();
    setup.dt = 0.01;
    let rep = holder_experiment(&EnsembleSpec::fourier(3, 5), &setup).unwrap();
    let fit = rep.fit.unwrap();
    assert!(fit.r_squared >= 0.95, "{fit:?}");
    assert!(fit.slope > 0.0 && fit.slope <= 1.05, "{fit:?}");
    assert!(rep.constants.mu.unwrap() > 0.0);
    assert!(rep.consistency_ok);
}

#[test]
fn cauchy_selection_oracle() {
    // (1 - 0.09) / 0.09 = 10.11..., so N - 1 = 11.
    assert_eq!(select_cauchy_n(0.3, 1.0).unwrap(), 12);
    let sel = select_cauchy_parameters(0.3, 1.0, 0.1, 2.0).unwrap();
    assert!(sel.beta_interval.0 < sel.beta && sel.beta < sel.beta_interval.1);
    assert!((sel.eps_tilde - 0.1 / 11.0).abs() < 1e-15);
    assert!((sel.delta_tilde - 12.0 * 0.1 / 11.0).abs() < 1e-15);
}

#[test]
fn cauchy_experiment_reports_positive_mu0() {
    let mut setup = ParabolicSetup::unit_interval();
    setup.domain = DomainSpec::interval(0.0, 1.0, 41).unwrap();
    setup.dt = 0.01;
    setup.t_final = 0.5;
    let rep = cauchy_stability_experiment(&EnsembleSpec::fourier(3, 2), &setup).unwrap();
    assert!(rep.constants.mu0.unwrap() > 0.0);
    assert!(rep.parameters["N"] >= 2.0);
    assert!(rep.consistency_ok);
}
