use bdry_geom::boundary::{
    fermi_formula_coefficients, fermi_geodesic_expansion, gauss_codazzi_check, max_abs3, max_diff3,
    normal_form_residual, s_tensor, umbilicity_residual, weyl_boundary_identities, BoundaryGeometry,
};
use bdry_geom::curvature::{curvature_point, Geometry};
use bdry_geom::functionals::{bach_identities, conformal_law_residuals, random_conformal_factor};
use bdry_geom::metric::{metric_at, Chart, MetricPatch};
use bdry_geom::models::{self, catalog_models, Perturbation};
use bdry_geom::report::{boundary_samples, interior_samples};
use proptest::prelude::*;

fn perturbed() -> MetricPatch {
    models::perturbed_flat(0.05, 7, Perturbation::Generic).unwrap()
}

fn is_normal_form(patch: &MetricPatch) -> bool {
    let b = boundary_samples(patch, 3, 1).unwrap();
    b.iter().all(|p| normal_form_residual(&metric_at(patch, p, 3).unwrap()) <= 1e-12)
}

#[test]
fn algebraic_symmetries_on_every_model() {
    for patch in catalog_models().unwrap() {
        for p in interior_samples(&patch, 100, 11).unwrap() {
            let c = curvature_point(&patch, &p, false).unwrap();
            assert!(c.rm_symmetry_residual() < 1e-9, "{}", patch.name);
            assert!(c.weyl_trace_residual() < 1e-9, "{}", patch.name);
            assert!(c.trace(&c.tracefree_ricci).abs() < 1e-9, "{}", patch.name);
            assert!(c.decomposition_residual() < 1e-11, "{}", patch.name);
        }
        for p in interior_samples(&patch, 10, 12).unwrap() {
            let b = bach_identities(&patch, &p).unwrap();
            assert!(b.asymmetry < 1e-9 && b.trace < 1e-9, "{}: {b:?}", patch.name);
        }
    }
}

#[test]
fn sphere_curvature_is_g_wedge_g() {
    let patch = models::hemisphere().unwrap();
    for p in interior_samples(&patch, 20, 3).unwrap() {
        let c = curvature_point(&patch, &p, false).unwrap();
        let g = &c.g;
        for a in 0..4 {
            for b in 0..4 {
                for i in 0..4 {
                    for j in 0..4 {
                        let want = g[[a, i]] * g[[b, j]] - g[[a, j]] * g[[b, i]];
                        assert!((c.rm[[a, b, i, j]] - want).abs() < 1e-10);
                    }
                }
            }
        }
        assert!((c.scal - 12.0).abs() < 1e-10);
    }
}

#[test]
fn product_s2_r2_ricci() {
    // Ric is the round metric on the S² factor and zero on R²
    let patch = models::product_s2_flat().unwrap();
    for p in interior_samples(&patch, 20, 4).unwrap() {
        let c = curvature_point(&patch, &p, false).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i < 2 && j < 2 { c.g[[i, j]] } else { 0.0 };
                assert!((c.ric[[i, j]] - want).abs() < 1e-10);
            }
        }
        assert!((c.scal - 2.0).abs() < 1e-10);
        assert!(c.weyl.max_abs() > 0.1);
    }
}

#[test]
fn bach_divergence_free_when_conformally_flat() {
    let patches = [
        models::hemisphere().unwrap(),
        models::flat_ball_collar(false).unwrap(),
        models::hemisphere_stereographic().unwrap(),
        models::conformal(&models::hemisphere().unwrap(), "0.1*sin(r) + 0.05*cos(r)*cos(a)").unwrap(),
    ];
    for patch in &patches {
        for p in interior_samples(patch, 8, 5).unwrap() {
            let b = bach_identities(patch, &p).unwrap();
            assert!(b.divergence < 1e-7, "{}: {b:?}", patch.name);
            assert!(b.scale < 1e-9, "{}: {b:?}", patch.name);
        }
    }
}

#[test]
fn bach_forms_agree_at_constant_scalar_curvature() {
    let patches = [
        models::product_s2_flat().unwrap(),
        models::hemisphere().unwrap(),
        models::sheared_flat().unwrap(),
        models::hemisphere_stereographic().unwrap(),
    ];
    for patch in &patches {
        for p in interior_samples(patch, 8, 6).unwrap() {
            let geo = Geometry::at(patch, &p, 4).unwrap();
            let c = geo.scal.value();
            let (a, _) = geo.bach_direct().unwrap();
            let (a, b, t) = (
                a.values(),
                geo.bach_schouten_form().unwrap().values(),
                geo.bach_tracefree_form(c).unwrap().values(),
            );
            assert!(a.max_abs_diff(&b) < 1e-8 && a.max_abs_diff(&t) < 1e-8 && b.max_abs_diff(&t) < 1e-8);
        }
    }
    // S² × R² is not Bach-flat, so the comparison above is not vacuous
    let patch = models::product_s2_flat().unwrap();
    let p = interior_samples(&patch, 1, 6).unwrap().remove(0);
    assert!(Geometry::at(&patch, &p, 4).unwrap().bach_direct().unwrap().0.values().max_abs() > 1e-2);
}

#[test]
fn tracefree_form_refuses_varying_scalar_curvature() {
    let patch = perturbed();
    let p = interior_samples(&patch, 1, 9).unwrap().remove(0);
    let geo = Geometry::at(&patch, &p, 4).unwrap();
    assert!(geo.bach_tracefree_form(geo.scal.value() + 1.0).is_err());
}

#[test]
fn gauss_codazzi_on_every_model() {
    for patch in catalog_models().unwrap() {
        for p in boundary_samples(&patch, 50, 13).unwrap() {
            let gc = gauss_codazzi_check(&patch, &p).unwrap();
            assert!(gc.general_max() < 1e-8, "{}: {gc:?}", patch.name);
        }
    }
}

#[test]
fn model_boundary_values() {
    let hemi = models::hemisphere().unwrap();
    let ball = models::flat_ball_collar(false).unwrap();
    for (patch, p_coeff, h) in [(&hemi, 0.5, 0.0), (&ball, 0.0, 3.0)] {
        for p in boundary_samples(patch, 20, 14).unwrap() {
            let v = BoundaryGeometry::at(patch, &p, 3).unwrap().values();
            for i in 0..3 {
                for j in 0..3 {
                    let hij = v.shape.h[i][j];
                    assert!((v.schouten_tangential[i][j] - p_coeff * hij).abs() < 1e-9);
                    assert!((v.intrinsic_schouten[i][j] - 0.5 * hij).abs() < 1e-9);
                }
            }
            assert!((v.shape.mean_curvature - h).abs() < 1e-9);
            assert!(v.weyl_max < 1e-9);
            if h == 0.0 {
                assert!((v.p00 - 0.5).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn weyl_boundary_identities_on_umbilic_models() {
    let warped = models::warped_default(false).unwrap();
    let mut lhs: f64 = f64::MAX;
    let mut rhs: f64 = f64::MAX;
    for patch in [&warped, &models::warped_default(true).unwrap(), &models::hemisphere().unwrap()] {
        for p in boundary_samples(patch, 50, 15).unwrap() {
            let w = weyl_boundary_identities(patch, &p, 1e-9).unwrap();
            assert!(w.weyl_normal < 1e-8 && w.weyl_mixed < 1e-8 && w.norm_identity < 1e-8, "{w:?}");
            if std::ptr::eq(patch, &warped) {
                lhs = lhs.min(w.norm_lhs);
                rhs = rhs.min(w.norm_rhs);
            }
        }
    }
    assert!(lhs > 1e-3 && rhs > 1e-3, "norm identity is trivial: {lhs} {rhs}");
    let generic = perturbed();
    let p = boundary_samples(&generic, 1, 15).unwrap().remove(0);
    assert!(weyl_boundary_identities(&generic, &p, 1e-9).is_err());
}

#[test]
fn fermi_routes_agree_on_normal_form_models() {
    let mut compared = 0;
    for patch in catalog_models().unwrap() {
        if !is_normal_form(&patch) {
            continue;
        }
        for p in boundary_samples(&patch, 10, 16).unwrap() {
            let a = fermi_formula_coefficients(&patch, &p).unwrap();
            let b = fermi_geodesic_expansion(&patch, &p, 4).unwrap();
            assert!(a.max_diff(&b) < 1e-7, "{}: {}", patch.name, a.max_diff(&b));
        }
        compared += 1;
    }
    assert!(compared >= 6);
}

#[test]
fn fermi_coefficients_of_models() {
    // cos²r = 1 − r² + r⁴/3 and (1 − r)² = 1 − 2r + r² as normalized coefficients
    let hemi = models::hemisphere().unwrap();
    let ball = models::flat_ball_collar(false).unwrap();
    for (patch, series) in [(&hemi, [1.0, 0.0, -2.0, 0.0, 8.0]), (&ball, [1.0, -2.0, 2.0, 0.0, 0.0])] {
        for p in boundary_samples(patch, 5, 17).unwrap() {
            let e = fermi_geodesic_expansion(patch, &p, 4).unwrap();
            let h0 = e.coeffs[0];
            for (k, c) in series.iter().enumerate() {
                let want = h0.map(|row| row.map(|x| c * x));
                assert!(max_diff3(&e.coeffs[k], &want) < 1e-6, "{} order {k}", patch.name);
            }
        }
    }
}

#[test]
fn s_tensor_symmetric_trace_free() {
    for patch in catalog_models().unwrap() {
        for p in boundary_samples(&patch, 10, 18).unwrap() {
            let bg = BoundaryGeometry::at(&patch, &p, 3).unwrap();
            let s = bg.s_tensor().unwrap();
            let hinv = bg.shape().hinv;
            let tr: f64 = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| hinv[i][j] * s[i][j]).sum();
            assert!(tr.abs() < 1e-9, "{}", patch.name);
            for (i, row) in s.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    assert!((v - s[j][i]).abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn s_is_normal_derivative_of_schouten_when_totally_geodesic() {
    // dr² + h(x, r) with no linear term in r is totally geodesic; the cubic
    // terms make S nonzero
    let chart = Chart::new(["r", "a", "b", "c"], [[0.0, 0.5], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]]).unwrap();
    let cubic = MetricPatch::from_strings(
        "cubic_collar",
        chart,
        &[
            ["1", "0", "0", "0"],
            ["0", "1 + 0.3*r^2 + 0.5*r^3*a", "0.2*r^3*b", "0"],
            ["0", "0.2*r^3*b", "1 + 0.1*a^2 + 0.4*r^3", "0"],
            ["0", "0", "0", "1 - 0.2*r^2*b + 0.3*r^3*c"],
        ],
    )
    .unwrap();
    let patches = [cubic, models::warped_default(true).unwrap(), models::product_s2_flat().unwrap(), models::hemisphere().unwrap()];
    let mut nontrivial: f64 = 0.0;
    for patch in &patches {
        for p in boundary_samples(patch, 10, 19).unwrap() {
            let bg = BoundaryGeometry::at(patch, &p, 3).unwrap();
            let s = bg.s_tensor().unwrap();
            let dp = bg.normal_derivative_schouten().unwrap();
            assert!(max_diff3(&s, &dp) < 1e-8, "{}: {s:?} vs {dp:?}", patch.name);
            nontrivial = nontrivial.max(max_abs3(&s));
        }
    }
    assert!(nontrivial > 1e-3);
}

#[test]
fn s_conformal_law() {
    let patch = perturbed();
    let samples = boundary_samples(&patch, 6, 20).unwrap();
    for k in 0..10 {
        let w = random_conformal_factor(&patch, 100 + k, 0.2);
        let r = conformal_law_residuals(&patch, &w, &samples, None).unwrap();
        assert!(r.s < 1e-8, "{w}: {}", r.s);
        assert!(r.s_scale > 1e-4);
    }
}

#[test]
fn h3_needs_totally_geodesic_boundary() {
    let ball = models::flat_ball_collar(false).unwrap();
    let b = boundary_samples(&ball, 3, 21).unwrap();
    let i = interior_samples(&ball, 3, 21).unwrap();
    let err = bdry_geom::boundary::h3_identity_check(&ball, &b, &i).unwrap_err();
    assert!(err.to_string().contains("totally geodesic"), "{err}");
    for patch in [models::hemisphere().unwrap(), models::flat_half().unwrap(), models::product_s2_flat().unwrap()] {
        let b = boundary_samples(&patch, 10, 21).unwrap();
        let i = interior_samples(&patch, 10, 21).unwrap();
        let r = bdry_geom::boundary::h3_identity_check(&patch, &b, &i).unwrap();
        assert!(r.residual < 1e-9, "{}: {r:?}", patch.name);
    }
}

#[test]
fn catalog_is_positive_definite_on_grid() {
    for patch in catalog_models().unwrap() {
        models::check_on_grid(&patch, 16).unwrap_or_else(|e| panic!("{}: {e}", patch.name));
    }
}

#[test]
fn model_cases_have_no_weyl_and_no_s() {
    for patch in [models::hemisphere().unwrap(), models::flat_ball_collar(false).unwrap()] {
        for p in interior_samples(&patch, 20, 22).unwrap() {
            assert!(curvature_point(&patch, &p, false).unwrap().weyl.max_abs() < 1e-9);
        }
        for p in boundary_samples(&patch, 20, 22).unwrap() {
            assert!(max_abs3(&s_tensor(&patch, &p).unwrap()) < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn warped_models_are_umbilic(
        p in prop::collection::vec(-0.4f64..0.4, 4),
        q in prop::collection::vec(-0.3f64..0.3, 4),
    ) {
        let psi = format!("{}*a*b + {}*r + {}*r^2*c + {}*sin(b)", p[0], p[1], p[2], p[3]);
        let k = [
            [format!("1 + {}*a^2", q[0]), format!("{}*b*c", 0.2 * q[3]), "0".to_string()],
            [format!("{}*b*c", 0.2 * q[3]), format!("1 + {}*b^2", q[1]), "0".to_string()],
            ["0".to_string(), "0".to_string(), format!("1 + {}*cos(a)", q[2])],
        ];
        let k: [[&str; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| k[i][j].as_str()));
        let patch = models::warped_umbilic(&psi, &k).unwrap();
        let b = boundary_samples(&patch, 10, 23).unwrap();
        prop_assert!(umbilicity_residual(&patch, &b).unwrap() < 1e-10);
    }
}
