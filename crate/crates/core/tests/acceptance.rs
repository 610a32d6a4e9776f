//! Acceptance criteria. Every test prints one `criterion N: PASS|FAIL` line;
//! run with `--nocapture` to see them. Thresholds live in `tol` below.

use std::f64::consts::PI;

use carleman_lab::analysis::{energy_history, sobolev_norm, NormKind};
use carleman_lab::carleman::{
    absorption_diagnostics_hyperbolic, absorption_diagnostics_parabolic, run_manufactured_suite, SuiteConfig,
};
use carleman_lab::field::SpaceTimeField;
use carleman_lab::geometry::{
    compute_gamma, critical_time_hyperbolic, critical_time_observability, select_beta_hyperbolic,
    select_beta_observability, AxisBox, DomainSpec, FaceLabel, GammaPiece, ParabolicGeometry, ParabolicOptions,
};
use carleman_lab::harness::{
    lipschitz_experiment, observability_experiment, EnsembleSpec, HyperbolicSetup, StabilityReport,
};
use carleman_lab::reconstruction::{
    dot_product_test, noise_scaling_study, reconstruct, relative_error, relative_error_masked, AssembledMap,
    CauchyMap, ErrorMeasure, InverseProblemSpec, LinearMap, NoiseStudyConfig, NoiseStudyReport, ParabolicLocalMap,
    Scenario, WaveBoundaryMap,
};
use carleman_lab::solvers::{solve_heat, solve_wave_free, solve_wave_ibvp, Coefficients, SourceSpec, TimeFactor};
use carleman_lab::weights::{
    cauchy_constants, default_parabolic_beta, hyperbolic_constants, observability_constants, parabolic_constants,
    select_cauchy_parameters, WeightParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Pinned thresholds.
mod tol {
    /// Observed order of the leapfrog scheme in `dx`.
    pub const WAVE_ORDER: f64 = 1.9;
    /// Observed order of backward Euler in `dt`.
    pub const HEAT_ORDER: f64 = 0.9;
    /// Relative drift of the discrete free-wave energy.
    pub const ENERGY_DRIFT: f64 = 1e-3;
    /// Random admissible parameter draws per constant.
    pub const GEOMETRY_DRAWS: usize = 100;
    /// Absorption ratio at the largest `s`.
    pub const ABSORPTION_AT_64: f64 = 0.1;
    /// Variation of the worst stability ratio across the refinement ladder.
    pub const REFINEMENT_VARIATION: f64 = 0.2;
    /// Noiseless reconstruction error.
    pub const NOISELESS_ERROR: f64 = 1e-2;
    pub const NOISELESS_ALPHA: f64 = 1e-8;
    /// Relative mismatch `<A x, y> - <x, A* y>`.
    pub const DOT_PRODUCT: f64 = 1e-10;
    pub const DOT_PRODUCT_PAIRS: usize = 20;
    /// Relative increase of the CG energy tolerated as rounding.
    pub const CG_ENERGY_INCREASE: f64 = 1e-12;
    /// Lipschitz scaling of the error against the noise level.
    pub const HYPERBOLIC_SLOPE: (f64, f64) = (0.8, 1.1);
    /// Upper end of the Hölder exponent window `(0, 1.05]`.
    pub const HOLDER_SLOPE_MAX: f64 = 1.05;
    pub const HOLDER_R2: f64 = 0.9;
}

fn report(n: u32, ok: bool, detail: &str) {
    println!("criterion {n}: {} - {detail}", if ok { "PASS" } else { "FAIL" });
}

fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn right_face() -> Vec<GammaPiece> {
    vec![GammaPiece {
        face: FaceLabel::Right,
        range: (0.0, 0.0),
    }]
}

fn max_error_at_final(u: &SpaceTimeField, exact: impl Fn(f64) -> f64) -> f64 {
    let k = u.nt() - 1;
    u.domain
        .points()
        .iter()
        .enumerate()
        .map(|(i, p)| (u.values[[k, i]] - exact(p[0])).abs())
        .fold(0.0, f64::max)
}

#[test]
fn criterion_1_solver_verification() {
    // u = t^2 sin(pi x): u_tt - u_xx = (2 + pi^2 t^2) sin(pi x).
    let wave_r = TimeFactor::new(
        "2 + pi^2 t^2",
        std::sync::Arc::new(|_, t| 2.0 + PI * PI * t * t),
        std::sync::Arc::new(|_, t| 2.0 * PI * PI * t),
    );
    let wave_errors: Vec<f64> = [41, 81, 161, 321]
        .iter()
        .map(|&nx| {
            let dom = DomainSpec::interval(0.0, 1.0, nx).unwrap();
            let src = SourceSpec::from_fn(&dom, wave_r.clone(), |p| (PI * p[0]).sin(), 2.0);
            let dt = 0.5 * dom.spacing(0);
            let u = solve_wave_ibvp(&dom, &Coefficients::zero(&dom), &src, 1.0, Some(dt)).unwrap();
            max_error_at_final(&u, |x| (PI * x).sin())
        })
        .collect();
    let wave_orders = observed_orders(&wave_errors);

    // u = t^2 sin(pi x): u_t - u_xx = (2 t + pi^2 t^2) sin(pi x); fine mesh so dt dominates.
    let heat_r = TimeFactor::new(
        "2 t + pi^2 t^2",
        std::sync::Arc::new(|_, t| 2.0 * t + PI * PI * t * t),
        std::sync::Arc::new(|_, t| 2.0 + 2.0 * PI * PI * t),
    );
    let dom = DomainSpec::interval(0.0, 1.0, 801).unwrap();
    let src = SourceSpec::from_fn(&dom, heat_r, |p| (PI * p[0]).sin(), 1.0);
    let heat_errors: Vec<f64> = [0.04, 0.02, 0.01, 0.005]
        .iter()
        .map(|&dt| {
            let sol = solve_heat(&dom, &Coefficients::zero(&dom), Some(&src), &vec![0.0; 801], 1.0, dt).unwrap();
            max_error_at_final(&sol.u, |x| (PI * x).sin())
        })
        .collect();
    let heat_orders = observed_orders(&heat_errors);

    // Free wave from the eigenmode plus a smooth bump, with a velocity.
    let dom = DomainSpec::interval(0.0, 1.0, 401).unwrap();
    let u0: Vec<f64> = dom
        .points()
        .iter()
        .map(|p| (PI * p[0]).sin() + 0.3 * (p[0] * (1.0 - p[0])).powi(3) * 64.0)
        .collect();
    let v0: Vec<f64> = dom.points().iter().map(|p| 0.5 * (2.0 * PI * p[0]).sin()).collect();
    let u = solve_wave_free(&dom, &Coefficients::zero(&dom), &u0, &v0, 2.0, None).unwrap();
    let e = energy_history(&u).unwrap();
    let drift = e.iter().map(|v| (v / e[0] - 1.0).abs()).fold(0.0, f64::max);

    let ok = wave_orders.iter().all(|o| *o >= tol::WAVE_ORDER)
        && heat_orders.iter().all(|o| *o >= tol::HEAT_ORDER)
        && drift <= tol::ENERGY_DRIFT;
    report(
        1,
        ok,
        &format!("wave orders {wave_orders:.3?}, heat orders {heat_orders:.3?}, energy drift {drift:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_2_constants_on_random_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = Vec::new();
    for draw in 0..tol::GEOMETRY_DRAWS {
        let two_d = draw % 2 == 1;
        let a = rng.random_range(-1.0..1.0);
        let len = rng.random_range(0.5..2.0);
        let dom = if two_d {
            let c = rng.random_range(-1.0..1.0);
            DomainSpec::rectangle(a, a + len, c, c + rng.random_range(0.5..2.0), 21).unwrap()
        } else {
            DomainSpec::interval(a, a + len, 41).unwrap()
        };
        let lambda = rng.random_range(0.2..3.0);
        let x0 = if two_d {
            let (c, d) = dom.bounds(1);
            [a - rng.random_range(0.2..2.0), rng.random_range(c..d)]
        } else {
            [a - rng.random_range(0.2..2.0), 0.0]
        };

        // Lipschitz argument: c0 > 0 for T above the critical time.
        let outcome = (|| -> Result<(), String> {
            let geom = compute_gamma(&dom, x0).map_err(|e| e.to_string())?;
            let t = critical_time_hyperbolic(&geom) * rng.random_range(1.05..2.0);
            let beta = select_beta_hyperbolic(&geom, t).map_err(|e| e.to_string())?;
            let c = hyperbolic_constants(&geom, lambda, beta, t).map_err(|e| e.to_string())?;
            if !(c.c0.unwrap_or(f64::NAN) > 0.0) {
                return Err(format!("c0 = {:?}", c.c0));
            }
            // Observability: kappa2 > kappa1 for T above twice the critical time.
            let t = critical_time_observability(&geom) * rng.random_range(1.05..2.0);
            let beta = select_beta_observability(&geom, t).map_err(|e| e.to_string())?;
            let c = observability_constants(&geom, lambda, beta, t, None).map_err(|e| e.to_string())?;
            if !(c.kappa2.unwrap_or(f64::NAN) > c.kappa1.unwrap_or(f64::NAN)) {
                return Err(format!("kappa1 = {:?}, kappa2 = {:?}", c.kappa1, c.kappa2));
            }
            // Local parabolic argument: sigma0 > sigma1 with the default beta.
            let face = if rng.random_bool(0.5) { FaceLabel::Right } else { FaceLabel::Left };
            let (lo, hi) = dom.bounds(0);
            let w = hi - lo;
            let (u, v) = (rng.random_range(0.05..0.45), rng.random_range(0.05..0.45));
            let mut bx = dom.bounding_box();
            if face == FaceLabel::Right {
                bx.lo[0] = lo + (0.5 + u * 0.9) * w;
                bx.hi[0] = (bx.lo[0] + v * w).min(hi - 0.02 * w);
            } else {
                bx.hi[0] = hi - (0.5 + u * 0.9) * w;
                bx.lo[0] = (bx.hi[0] - v * w).max(lo + 0.02 * w);
            }
            if two_d {
                let (c, d) = dom.bounds(1);
                bx.lo[1] = c + 0.2 * (d - c);
                bx.hi[1] = d - 0.2 * (d - c);
            }
            let opts = ParabolicOptions {
                omega0: Some(bx),
                ..Default::default()
            };
            let pgeom = ParabolicGeometry::new(&dom, face, &opts).map_err(|e| e.to_string())?;
            let delta = rng.random_range(0.05..0.5);
            let beta = default_parabolic_beta(&pgeom, delta);
            let c = parabolic_constants(&pgeom, lambda, beta, delta).map_err(|e| e.to_string())?;
            if !(c.sigma0.unwrap_or(f64::NAN) > c.sigma1.unwrap_or(f64::NAN)) {
                return Err(format!("sigma0 = {:?}, sigma1 = {:?}", c.sigma0, c.sigma1));
            }
            // Cauchy selection: mu0 > 0.
            let d0 = pgeom.d_min_omega0();
            let d1 = pgeom.d_max_domain().max(d0 * rng.random_range(1.0..4.0));
            let t = rng.random_range(0.2..2.0);
            let eps = t * rng.random_range(0.02..0.24);
            let sel = select_cauchy_parameters(d0, d1, eps, t).map_err(|e| e.to_string())?;
            let c = cauchy_constants(&sel, lambda).map_err(|e| e.to_string())?;
            if !(c.mu0.unwrap_or(f64::NAN) > 0.0) {
                return Err(format!("mu0 = {:?}", c.mu0));
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            violations.push(format!("draw {draw}: {e}"));
        }
    }
    let ok = violations.is_empty();
    report(
        2,
        ok,
        &format!("{} draws, {} violations {:?}", tol::GEOMETRY_DRAWS, violations.len(), violations),
    );
    assert!(ok);
}

#[test]
fn criterion_3_carleman_ratio_curves() {
    let cfg = SuiteConfig::default();
    let entries = run_manufactured_suite(&cfg).unwrap();
    let failed: Vec<String> = entries
        .iter()
        .filter(|e| !e.outcome.passed)
        .map(|e| format!("{} lambda={}", e.field.id(), e.lambda))
        .collect();
    let worst_growth = entries
        .iter()
        .map(|e| e.outcome.max_ratio / e.outcome.first_ratio)
        .fold(0.0, f64::max);
    let worst_increase = entries.iter().map(|e| e.outcome.worst_increase).fold(f64::NEG_INFINITY, f64::max);
    let ok = entries.len() == 18 && failed.is_empty();
    report(
        3,
        ok,
        &format!(
            "{} curves at nx = nt = {}, worst max/first {worst_growth:.3}, worst increase beyond s = 16 {worst_increase:.3e}, failed {failed:?}",
            entries.len(),
            cfg.nx
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_absorption() {
    let dom = DomainSpec::interval(0.0, 1.0, 201).unwrap();
    let geom = compute_gamma(&dom, [-1.0, 0.0]).unwrap();
    let t = 1.15 * critical_time_hyperbolic(&geom);
    let beta = select_beta_hyperbolic(&geom, t).unwrap();
    let r = TimeFactor::affine(1.0, 1.0);
    let mut lines = Vec::new();
    let mut ok = true;
    for lambda in [0.5, 1.0, 2.0] {
        let params = WeightParams::hyperbolic(lambda, beta, 0.0, [-1.0, 0.0]).unwrap();
        let src = SourceSpec::from_fn(&dom, r.clone(), |p| (PI * p[0]).sin(), 1.0);
        let hyp = absorption_diagnostics_hyperbolic(&dom, &src, &geom, &params, t, 401).unwrap();

        let pgeom = ParabolicGeometry::new(&dom, FaceLabel::Right, &ParabolicOptions::default()).unwrap();
        let pbeta = default_parabolic_beta(&pgeom, 0.25);
        let pparams = WeightParams::parabolic(lambda, pbeta, 0.5, pgeom.d.clone()).unwrap();
        let omega0 = pgeom.omega0;
        let psrc = SourceSpec::from_fn(&dom, r.clone(), |p| if omega0.contains(p, 1, 1e-12) { 1.0 } else { 0.0 }, 1.0);
        let par = absorption_diagnostics_parabolic(&psrc, &pgeom, &pparams, (0.25, 0.75), 401).unwrap();

        for diag in [&hyp, &par] {
            let ratios = diag.ratios();
            let decreasing = ratios.windows(2).all(|w| w[1] < w[0]);
            let at_64 = diag.rows.iter().find(|row| row.s == 64.0).map(|row| row.ratio);
            let small = at_64.is_some_and(|v| v < tol::ABSORPTION_AT_64);
            ok &= decreasing && small;
            lines.push(format!("{:?} lambda={lambda}: decreasing {decreasing}, ratio(64) {at_64:?}", diag.lemma));
        }
        // s^3 e^{-c0 s} on [8, 64]
        let tail: Vec<f64> = hyp.rows.iter().filter(|row| row.s >= 8.0).map(|row| row.decay).collect();
        let decay_ok = tail.len() >= 2 && tail.windows(2).all(|w| w[1] < w[0]);
        ok &= decay_ok;
        lines.push(format!("c0 = {:.4}: decay decreasing on [8, 64] {decay_ok}", hyp.decay_rate));
    }
    report(4, ok, &lines.join("; "));
    assert!(ok);
}

fn ratios_finite(rep: &StabilityReport) -> bool {
    rep.grids.iter().all(|g| g.summary.max.is_finite() && g.summary.count > 0)
}

#[test]
fn criterion_5_lipschitz_surrogate() {
    let setup = HyperbolicSetup::unit_interval(1.15 * 3f64.sqrt());
    let rep = lipschitz_experiment(&EnsembleSpec::fourier(50, 7), &setup).unwrap();
    let variation = rep.refinement_variation.unwrap_or(f64::INFINITY);
    let ok = ratios_finite(&rep) && variation < tol::REFINEMENT_VARIATION && rep.consistency_ok;
    let maxima: Vec<f64> = rep.grids.iter().map(|g| g.summary.max).collect();
    report(
        5,
        ok,
        &format!(
            "max ratio per grid {maxima:.4?}, variation {variation:.4}, consistency {}",
            rep.consistency_ok
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_6_observability_surrogate() {
    let setup = HyperbolicSetup::unit_interval(1.15 * 2.0 * 3f64.sqrt());
    let rep = observability_experiment(&EnsembleSpec::fourier(20, 11), &setup).unwrap();
    let variation = rep.refinement_variation.unwrap_or(f64::INFINITY);
    let eigen: Vec<f64> = rep
        .samples
        .iter()
        .filter(|r| r.label == "eigenmode")
        .filter_map(|r| r.ratio)
        .collect();
    let eigen_variation = eigen.iter().cloned().fold(0.0, f64::max) / eigen.iter().cloned().fold(f64::INFINITY, f64::min) - 1.0;
    let ok = ratios_finite(&rep)
        && eigen.len() == setup.grids.len()
        && eigen.iter().all(|r| r.is_finite())
        && variation < tol::REFINEMENT_VARIATION
        && eigen_variation < tol::REFINEMENT_VARIATION
        && rep.consistency_ok;
    report(
        6,
        ok,
        &format!("variation {variation:.4}, eigenmode ratios {eigen:.4?} (variation {eigen_variation:.2e})"),
    );
    assert!(ok);
}

fn hyperbolic_map(nx: usize) -> (DomainSpec, WaveBoundaryMap) {
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

#[test]
fn criterion_7_reconstruction() {
    let (dom, map) = hyperbolic_map(201);
    let truth = map.restrict(&dom.points().iter().map(|p| (PI * p[0]).sin()).collect::<Vec<_>>());
    let dot = dot_product_test(&map, tol::DOT_PRODUCT_PAIRS, 5).unwrap();
    let assembled = AssembledMap::from_map(&map).unwrap();
    let dot_assembled = dot_product_test(&assembled, tol::DOT_PRODUCT_PAIRS, 6).unwrap();
    let data = map.apply(&truth).unwrap();
    let spec = InverseProblemSpec::new(Scenario::HyperbolicBoundary, tol::NOISELESS_ALPHA);
    let res = reconstruct(&assembled, &data, &spec).unwrap();
    let err = relative_error(&map, &res.f, &truth);
    let increase = res.energy_increase();
    let ok = err <= tol::NOISELESS_ERROR
        && dot <= tol::DOT_PRODUCT
        && dot_assembled <= tol::DOT_PRODUCT
        && increase <= tol::CG_ENERGY_INCREASE;
    report(
        7,
        ok,
        &format!(
            "error {err:.3e} after {} iterations, dot-product mismatch {dot:.2e} (assembled {dot_assembled:.2e}), CG energy increase {increase:.1e}",
            res.iterations
        ),
    );
    assert!(ok);
}

const LEVELS: [f64; 4] = [1e-4, 1e-3, 1e-2, 1e-1];

fn hyperbolic_study() -> NoiseStudyReport {
    let (dom, map) = hyperbolic_map(201);
    let truth = map.restrict(&dom.points().iter().map(|p| (PI * p[0]).sin()).collect::<Vec<_>>());
    let am = AssembledMap::from_map(&map).unwrap();
    let spec = InverseProblemSpec::new(Scenario::HyperbolicBoundary, tol::NOISELESS_ALPHA);
    noise_scaling_study(&am, &truth, &spec, &NoiseStudyConfig::new(LEVELS.to_vec(), 42), &|f| {
        Ok(ErrorMeasure {
            global: relative_error(&am, f, &truth),
            restricted: None,
        })
    })
    .unwrap()
}

fn parabolic_local_study() -> NoiseStudyReport {
    let dom = DomainSpec::interval(0.0, 1.0, 101).unwrap();
    let map = ParabolicLocalMap::new(&dom, &Coefficients::zero(&dom), &TimeFactor::affine(1.0, 1.0), &right_face(), 1.0, 0.01, 0.5)
        .unwrap();
    let truth = map.restrict(&dom.points().iter().map(|p| (PI * p[0]).sin()).collect::<Vec<_>>());
    let omega0 = AxisBox::interval(0.5, 0.9);
    let mask: Vec<bool> = map.interior.iter().map(|&i| omega0.contains(&dom.point(i), 1, 1e-12)).collect();
    let am = AssembledMap::from_map(&map).unwrap();
    let spec = InverseProblemSpec::new(Scenario::ParabolicLocal, tol::NOISELESS_ALPHA);
    noise_scaling_study(&am, &truth, &spec, &NoiseStudyConfig::new(LEVELS.to_vec(), 42), &|f| {
        Ok(ErrorMeasure {
            global: relative_error(&am, f, &truth),
            restricted: Some(relative_error_masked(&am, f, &truth, &mask)),
        })
    })
    .unwrap()
}

fn cauchy_study() -> NoiseStudyReport {
    let dom = DomainSpec::interval(0.0, 1.0, 101).unwrap();
    let (t_final, eps) = (0.5, 0.1);
    let map = CauchyMap::new(&dom, &Coefficients::zero(&dom), &right_face(), t_final, 0.005).unwrap();
    let truth = map.restrict(
        &dom.points()
            .iter()
            .map(|p| (PI * p[0]).sin() + 0.5 * (2.0 * PI * p[0]).sin())
            .collect::<Vec<_>>(),
    );
    let omega0 = AxisBox::interval(0.5, 0.9);
    let interior = |u: &SpaceTimeField| -> f64 {
        let window = Some((eps, t_final - eps));
        sobolev_norm(u, NormKind::H1tL2x, Some(omega0), window).unwrap()
            + sobolev_norm(u, NormKind::L2tH2x, Some(omega0), window).unwrap()
    };
    let base = interior(&map.solution(&truth).unwrap());
    let am = AssembledMap::from_map(&map).unwrap();
    let spec = InverseProblemSpec::new(Scenario::Cauchy, tol::NOISELESS_ALPHA);
    noise_scaling_study(&am, &truth, &spec, &NoiseStudyConfig::new(LEVELS.to_vec(), 42), &|f| {
        let diff: Vec<f64> = f.iter().zip(&truth).map(|(a, b)| a - b).collect();
        Ok(ErrorMeasure {
            global: relative_error(&am, f, &truth),
            restricted: Some(interior(&map.solution(&diff)?) / base),
        })
    })
    .unwrap()
}

#[test]
fn criterion_8_noise_scaling() {
    let hyp = hyperbolic_study();
    let local = parabolic_local_study();
    let cauchy = cauchy_study();
    let (lo, hi) = tol::HYPERBOLIC_SLOPE;
    let hyp_ok = hyp.fit.slope >= lo && hyp.fit.slope <= hi;
    let holder_ok = |r: &NoiseStudyReport| {
        r.fit.slope > 0.0 && r.fit.slope <= tol::HOLDER_SLOPE_MAX && r.fit.r_squared >= tol::HOLDER_R2
    };
    let ok = hyp_ok && holder_ok(&local) && holder_ok(&cauchy);
    let line = |r: &NoiseStudyReport| {
        format!(
            "{} slope {:.3} (R^2 {:.4}, {} inversions)",
            r.scenario.name(),
            r.fit.slope,
            r.fit.r_squared,
            r.inversions
        )
    };
    report(8, ok, &format!("{}; {}; {}", line(&hyp), line(&local), line(&cauchy)));
    assert!(ok);
}

fn outputs_of_run() -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut setup = HyperbolicSetup::unit_interval(2.0);
    setup.grids = vec![51, 101];
    let rep = lipschitz_experiment(&EnsembleSpec::fourier(6, 3), &setup).unwrap();
    out.push(rep.to_json().unwrap().into_bytes());
    let mut csv = Vec::new();
    rep.write_csv(&mut csv).unwrap();
    out.push(csv);

    let (dom, map) = hyperbolic_map(51);
    let truth = map.restrict(&dom.points().iter().map(|p| p[0] * (1.0 - p[0])).collect::<Vec<_>>());
    let spec = InverseProblemSpec::new(Scenario::HyperbolicBoundary, tol::NOISELESS_ALPHA);
    let mut cfg = NoiseStudyConfig::new(LEVELS.to_vec(), 9);
    cfg.replicates = 3;
    let study = noise_scaling_study(&map, &truth, &spec, &cfg, &|f| {
        Ok(ErrorMeasure {
            global: relative_error(&map, f, &truth),
            restricted: None,
        })
    })
    .unwrap();
    out.push(serde_json::to_vec_pretty(&study).unwrap());
    let mut csv = Vec::new();
    study.write_csv(&mut csv).unwrap();
    out.push(csv);

    let suite = SuiteConfig {
        nx: 41,
        nt: 41,
        ..SuiteConfig::default()
    };
    for entry in run_manufactured_suite(&suite).unwrap() {
        let mut csv = Vec::new();
        entry.report.write_csv(&mut csv).unwrap();
        out.push(csv);
    }
    out
}

#[test]
fn criterion_9_determinism() {
    let first = outputs_of_run();
    let second = outputs_of_run();
    let identical = first.len() == second.len() && first.iter().zip(&second).all(|(a, b)| a == b);
    let bytes: usize = first.iter().map(Vec::len).sum();
    report(9, identical, &format!("{} artifacts, {bytes} bytes compared", first.len()));
    assert!(identical);
}
