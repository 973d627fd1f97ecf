use std::f64::consts::PI;

use bdry_geom::functionals::{
    build_umbilic_variation, check_variation_spd, conformal_law_residuals, conformal_rescale, escobar_bound_probe,
    evaluate, first_variation_check, lp_residual, random_conformal_factor, random_embedded_factors, random_sigma,
    stencil_convergence, Functionals, VariationOptions, LP_TOL,
};
use bdry_geom::metric::{MetricPatch, PointSample};
use bdry_geom::models::{self, catalog_models, Perturbation};
use bdry_geom::par::Execution;
use bdry_geom::quadrature::QuadratureRule;
use bdry_geom::report::{as_refs, standard_variations};
use bdry_geom::GeomError;

const EXEC: Execution = Execution::Parallel;

fn eval(patch: &MetricPatch, n: usize) -> Functionals {
    evaluate(patch, &QuadratureRule::new(&patch.chart, n).unwrap(), EXEC).unwrap()
}

fn umbilic_perturbed() -> MetricPatch {
    models::perturbed_flat(0.05, 7, Perturbation::Umbilic).unwrap()
}

/// Largest change between two resolutions, relative to each value with a
/// floor of 1e-6 of the largest scalar (some functionals vanish identically).
fn doubling_change(a: &Functionals, b: &Functionals) -> f64 {
    let scale = a.named().iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    a.named()
        .iter()
        .zip(b.named())
        .map(|((_, x), (_, y))| (x - y).abs() / x.abs().max(1e-6 * scale))
        .fold(0.0, f64::max)
}

/// `∫ sin²a da ∫ sin b db ∫ dc` over the seam-trimmed S³ angles.
fn trimmed_s3_area() -> f64 {
    let d = models::SEAM_MARGIN;
    ((PI - 2.0 * d) / 2.0 + (2.0 * d).sin() / 2.0) * 2.0 * d.cos() * 2.0 * PI
}

#[test]
fn closed_form_model_values() {
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let d = models::SEAM_MARGIN;
    let area = trimmed_s3_area();

    // hemisphere: dv = cos³r, R = 12, H = 0
    let hemi = eval(&models::hemisphere().unwrap(), 16);
    let top = (PI / 2.0 - d).sin();
    let vol = (top - top.powi(3) / 3.0) * area;
    assert!(rel(hemi.volume, vol) < 1e-9);
    assert!(rel(hemi.e_b, 12.0 * vol) < 1e-9);
    assert!(rel(hemi.boundary_volume, area) < 1e-9);
    // and the untrimmed targets
    assert!(rel(hemi.volume, 4.0 * PI * PI / 3.0) < 1e-4);
    assert!(rel(hemi.e_b, 16.0 * PI * PI) < 1e-4);
    assert!(rel(hemi.yamabe_quotient, 8.0 * 3f64.sqrt() * PI) < 1e-4);

    // unit ball in polar form: dv = (1 − r)³, R = 0, H = 3 on the unit sphere
    let ball = eval(&models::flat_ball_collar(true).unwrap(), 16);
    assert!(rel(ball.volume, (1.0 - d.powi(4)) / 4.0 * area) < 1e-9);
    assert!(rel(ball.e_b, 6.0 * area) < 1e-9);
    assert!(ball.scalar_integral.abs() < 1e-10);
    assert!(rel(ball.e_b, 12.0 * PI * PI) < 1e-4);

    let half = eval(&models::flat_half().unwrap(), 4);
    assert!((half.volume - 1.0).abs() < 1e-14 && half.e_b == 0.0 && half.weyl_b == 0.0);
}

#[test]
fn yamabe_quotient_is_scale_invariant() {
    for patch in [models::warped_default(false).unwrap(), models::perturbed_flat(0.05, 3, Perturbation::Generic).unwrap()] {
        let a = eval(&patch, 8);
        let b = eval(&conformal_rescale(&patch, "0.7").unwrap(), 8);
        assert!((a.yamabe_quotient - b.yamabe_quotient).abs() / a.yamabe_quotient.abs() < 1e-10);
        // W_b is conformally invariant, so constant rescaling leaves it too
        assert!((a.weyl_b - b.weyl_b).abs() < 1e-10 * a.weyl_b.abs().max(1.0));
    }
}

#[test]
fn weyl_b_equals_weyl_on_umbilic_models() {
    for patch in [models::warped_default(false).unwrap(), models::hemisphere().unwrap(), umbilic_perturbed()] {
        let f = eval(&patch, 8);
        assert!((f.weyl_b - f.weyl).abs() < 1e-10, "{}: {:e}", patch.name, f.weyl_boundary_term);
    }
    // and not on a generic boundary
    let f = eval(&models::perturbed_flat(0.1, 7, Perturbation::Generic).unwrap(), 8);
    assert!(f.weyl_boundary_term.abs() > 1e-8);
}

#[test]
fn quadrature_doubling_on_catalog() {
    for patch in catalog_models().unwrap() {
        if patch.name == "hemisphere_stereographic" {
            continue;
        }
        let d = doubling_change(&eval(&patch, 16), &eval(&patch, 8));
        assert!(d < 1e-7, "{}: {d:e}", patch.name);
    }
}

#[test]
fn quadrature_doubling_stereographic_chart() {
    // the chart stretches the hemisphere, so 8 nodes per axis underresolve it
    let patch = models::hemisphere_stereographic().unwrap();
    let d = doubling_change(&eval(&patch, 32), &eval(&patch, 16));
    assert!(d < 1e-7, "{d:e}");
}

#[test]
fn weyl_b_conformal_invariance() {
    let patch = models::perturbed_flat(0.05, 7, Perturbation::Generic).unwrap();
    let rule = QuadratureRule::new(&patch.chart, 8).unwrap();
    for k in 0..5 {
        let w = random_conformal_factor(&patch, 40 + k, 0.2);
        let r = conformal_law_residuals(&patch, &w, &[], Some((&rule, EXEC))).unwrap();
        assert!(r.weyl_b_relative.unwrap() < 1e-6, "{w}: {r:?}");
    }
}

#[test]
fn bach_conformal_law() {
    let patch = models::perturbed_flat(0.05, 7, Perturbation::Generic).unwrap();
    let samples = bdry_geom::report::interior_samples(&patch, 3, 8).unwrap();
    for k in 0..4 {
        let w = random_conformal_factor(&patch, 60 + k, 0.2);
        let r = conformal_law_residuals(&patch, &w, &samples, None).unwrap();
        assert!(r.bach < 1e-7 && r.bach_scale > 1e-4, "{w}: {r:?}");
    }
}

#[test]
fn escobar_probe_on_hemisphere() {
    let patch = models::hemisphere().unwrap();
    let rule = QuadratureRule::new(&patch.chart, 8).unwrap();
    let probe = escobar_bound_probe(&patch, &rule, &random_embedded_factors(5, 4, 0.3), EXEC).unwrap();
    assert!(probe.min_gap > -1e-3, "{probe:?}");
    assert!(probe.quotients.iter().any(|q| q - probe.target > 1e-2));
    let err = escobar_bound_probe(&models::product_s2_flat().unwrap(), &rule, &[], EXEC).unwrap_err();
    assert!(matches!(err, GeomError::Precondition { .. }));
}

#[test]
fn first_variation_on_warped_model() {
    let patch = models::warped_default(false).unwrap();
    let vs = standard_variations(&patch, 11, 5).unwrap();
    assert_eq!(vs.iter().filter(|v| v.is_interior()).count(), 1);
    let opts = VariationOptions::default();
    for v in &vs {
        check_variation_spd(&patch, v, 2.0 * opts.t_step, opts.n).unwrap();
        if !v.is_interior() {
            for s in [0.15, 0.5, 0.85] {
                let t: [f64; 3] = std::array::from_fn(|a| v.support[a + 1][0] + s * (v.support[a + 1][1] - v.support[a + 1][0]));
                let p = PointSample::boundary(&patch.chart, t).unwrap();
                assert!(lp_residual(&patch, v, &p).unwrap() < LP_TOL);
            }
        }
        let r = first_variation_check(&patch, v, &opts).unwrap();
        assert!(r.relative < 1e-5, "{r:?}");
        assert!(r.numeric.abs() > 1e-6, "variation is trivial: {r:?}");
    }
}

#[test]
fn stencil_is_fourth_order() {
    let patch = umbilic_perturbed();
    let sigma = random_sigma(&patch, 3);
    let v = build_umbilic_variation(&patch, &as_refs(&sigma), 0.3, [[0.2, 0.8]; 3]).unwrap();
    let s = stencil_convergence(&patch, &v, 0.04, 6, EXEC).unwrap();
    assert!((12.0..20.0).contains(&s.ratio), "{s:?}");
}

#[test]
fn variation_preconditions() {
    let generic = models::perturbed_flat(0.05, 7, Perturbation::Generic).unwrap();
    let sigma = random_sigma(&generic, 1);
    let err = build_umbilic_variation(&generic, &as_refs(&sigma), 0.3, [[0.2, 0.8]; 3]).unwrap_err();
    assert!(matches!(err, GeomError::Precondition { .. }), "{err}");

    let flat = models::flat_half().unwrap();
    let pure_trace = [["a", "0", "0"], ["0", "a", "0"], ["0", "0", "a"]];
    assert!(build_umbilic_variation(&flat, &pure_trace, 0.3, [[0.2, 0.8]; 3]).is_err());
    let normal = [["r", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]];
    assert!(build_umbilic_variation(&flat, &normal, 0.3, [[0.2, 0.8]; 3]).is_err());

    let big = [["1e4", "0", "0"], ["0", "0", "0"], ["0", "0", "0"]];
    let v = build_umbilic_variation(&flat, &big, 0.3, [[0.2, 0.8]; 3]).unwrap();
    let err = check_variation_spd(&flat, &v, 0.1, 6).unwrap_err();
    assert!(err.to_string().contains("positive definite"), "{err}");
}
