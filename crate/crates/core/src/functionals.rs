//! Integral functionals over a chart patch: volume, `E_b = ∫R + 2∮H`, the
//! Yamabe quotient, `W = ¼∫|W|²` and `W_b = W + 2∮W_{i0j0}L^{ij}`; conformal
//! transformation checks; umbilicity-preserving variations and the check of
//! the first-variation formula `dW_b = −∫B·v + ∮S·v`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{max_abs3, BoundaryGeometry, Sym3};
use crate::curvature::Geometry;
use crate::error::{GeomError, Result};
use crate::expr::{parse_expr, seed_jets, ActiveAxes, Expr};
use crate::jet::{Jet, MAX_DIM};
use crate::metric::{invert_metric, metric_jets, MetricPatch, PointSample, SumField, TensorField};
use crate::models;
use crate::par::{pairwise_sum, try_map, Execution};
use crate::pointwise::PointCurvature;
use crate::quadrature::QuadratureRule;
use crate::tensor::{JetTensor, Tensor};

/// `8√3π`, the Yamabe quotient of the round hemisphere.
pub fn hemisphere_yamabe() -> f64 {
    8.0 * 3f64.sqrt() * PI
}

/// `∫ f √det g` with `f` evaluated at every node of `rule`.
pub fn integrate<F>(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution, density: F) -> Result<f64>
where
    F: Fn(&[f64; 4]) -> Result<f64> + Sync + Send,
{
    let nodes = rule.nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let g = patch.value_at(&x).map_err(|e| e.at(x))?;
        let det = crate::linalg::det4(&g);
        Ok(w * density(&x).map_err(|e| e.at(x))? * det.sqrt())
    })?;
    Ok(pairwise_sum(&vals))
}

/// `∮ f √det h` over the face `x⁰ = 0`.
pub fn boundary_integrate<F>(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution, density: F) -> Result<f64>
where
    F: Fn(&[f64; 4]) -> Result<f64> + Sync + Send,
{
    let nodes = rule.boundary_nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let g = patch.value_at(&x).map_err(|e| e.at(x))?;
        let h: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| g[i + 1][j + 1]));
        let det = crate::linalg::det3(&h);
        Ok(w * density(&x).map_err(|e| e.at(x))? * det.sqrt())
    })?;
    Ok(pairwise_sum(&vals))
}

/// Every scalar computed from one interior and one face sweep.
#[derive(Debug, Clone, Copy, Default, Serialize, PartialEq)]
pub struct Functionals {
    pub volume: f64,
    pub boundary_volume: f64,
    /// `∫ R dv`.
    pub scalar_integral: f64,
    /// `∮ H dσ`.
    pub mean_curvature_integral: f64,
    /// `∫R + 2∮H`.
    pub e_b: f64,
    pub yamabe_quotient: f64,
    /// `¼∫ W^{abcd}W_{abcd}`.
    pub weyl: f64,
    /// `2∮ W_{i0j0} L^{ij}`.
    pub weyl_boundary_term: f64,
    pub weyl_b: f64,
}

impl Functionals {
    pub fn named(&self) -> [(&'static str, f64); 9] {
        [
            ("volume", self.volume),
            ("boundary_volume", self.boundary_volume),
            ("scalar_integral", self.scalar_integral),
            ("mean_curvature_integral", self.mean_curvature_integral),
            ("e_b", self.e_b),
            ("yamabe_quotient", self.yamabe_quotient),
            ("weyl", self.weyl),
            ("weyl_boundary_term", self.weyl_boundary_term),
            ("weyl_b", self.weyl_b),
        ]
    }
}

fn interior_sweep(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<[f64; 3]> {
    let nodes = rule.nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let pc = metric_jets(patch, &x, 2, [true; 4])
            .and_then(|g| PointCurvature::from_jets(&g))
            .map_err(|e| e.at(x))?;
        let dv = w * pc.sqrt_det;
        Ok([dv, dv * pc.scal, dv * 0.25 * pc.weyl_norm_sq()])
    })?;
    Ok(std::array::from_fn(|c| pairwise_sum(&vals.iter().map(|v| v[c]).collect::<Vec<_>>())))
}

fn face_sweep(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<[f64; 3]> {
    let nodes = rule.boundary_nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let b = metric_jets(patch, &x, 2, [true; 4])
            .and_then(|g| PointCurvature::from_jets(&g))
            .and_then(|pc| pc.boundary())
            .map_err(|e| e.at(x))?;
        let ds = w * b.sqrt_det_h;
        Ok([ds, ds * b.mean_curvature, ds * b.weyl_dot_l])
    })?;
    Ok(std::array::from_fn(|c| pairwise_sum(&vals.iter().map(|v| v[c]).collect::<Vec<_>>())))
}

pub fn evaluate(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<Functionals> {
    let [volume, scalar_integral, weyl] = interior_sweep(patch, rule, exec)?;
    let [boundary_volume, mean_curvature_integral, wl] = face_sweep(patch, rule, exec)?;
    if !(volume > 0.0) {
        return Err(GeomError::Singular("zero volume"));
    }
    let e_b = scalar_integral + 2.0 * mean_curvature_integral;
    Ok(Functionals {
        volume,
        boundary_volume,
        scalar_integral,
        mean_curvature_integral,
        e_b,
        yamabe_quotient: e_b / volume.sqrt(),
        weyl,
        weyl_boundary_term: 2.0 * wl,
        weyl_b: weyl + 2.0 * wl,
    })
}

pub fn volume(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<f64> {
    integrate(patch, rule, exec, |_| Ok(1.0))
}

pub fn einstein_hilbert_boundary(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<f64> {
    Ok(evaluate(patch, rule, exec)?.e_b)
}

/// `Vol^{−1/2} (∫R + 2∮H)`.
pub fn yamabe_quotient(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<f64> {
    Ok(evaluate(patch, rule, exec)?.yamabe_quotient)
}

/// `(W, W_b)`.
pub fn weyl_energy(patch: &MetricPatch, rule: &QuadratureRule, exec: Execution) -> Result<(f64, f64)> {
    let f = evaluate(patch, rule, exec)?;
    Ok((f.weyl, f.weyl_b))
}

#[derive(Debug, Clone, Serialize)]
pub struct FunctionalReport {
    pub model: String,
    pub n: usize,
    pub values: Functionals,
    /// The same scalars with `n/2` nodes per axis.
    pub coarse: Functionals,
    /// `|value(n) − value(n/2)|` per scalar; Gauss rules converge fast
    /// enough that this bounds the error of the finer value.
    pub errors: Vec<(String, f64)>,
}

/// Functionals at `n` and `n/2` nodes per axis (`n ≥ 4`) with the
/// difference recorded as the error estimate.
pub fn functional_report(patch: &MetricPatch, n: usize, exec: Execution) -> Result<FunctionalReport> {
    if n < 4 {
        return Err(GeomError::InvalidParameter(format!("quadrature n = {n} is below 4")));
    }
    let values = evaluate(patch, &QuadratureRule::new(&patch.chart, n)?, exec)?;
    let coarse = evaluate(patch, &QuadratureRule::new(&patch.chart, n / 2)?, exec)?;
    let errors = values
        .named()
        .iter()
        .zip(coarse.named())
        .map(|((k, a), (_, b))| (k.to_string(), (a - b).abs()))
        .collect();
    Ok(FunctionalReport {
        model: patch.name.clone(),
        n,
        values,
        coarse,
        errors,
    })
}

/// `e^{2w} g` for `w` written in the chart's coordinate names.
pub fn conformal_rescale(patch: &MetricPatch, w: &str) -> Result<MetricPatch> {
    models::conformal(patch, w)
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ConformalLawResiduals {
    /// `sup |B(e^{2w}g) − e^{−2w}B(g)|` over interior samples.
    pub bach: f64,
    pub bach_scale: f64,
    /// `sup |S(e^{2w}g) − e^{−w}S(g)|` over boundary samples.
    pub s: f64,
    pub s_scale: f64,
    /// `|W_b(e^{2w}g) − W_b(g)| / max(1, |W_b(g)|)` when a rule is given.
    pub weyl_b_relative: Option<f64>,
    pub weyl_b: Option<(f64, f64)>,
}

pub fn conformal_law_residuals(
    patch: &MetricPatch,
    w: &str,
    samples: &[PointSample],
    quadrature: Option<(&QuadratureRule, Execution)>,
) -> Result<ConformalLawResiduals> {
    let names: Vec<String> = patch.chart.coords.to_vec();
    let w_expr = parse_expr(w, &names)?;
    let tilde = conformal_rescale(patch, w)?;
    let mut out = ConformalLawResiduals::default();
    for s in samples {
        let ew = w_expr.eval(&s.coords)?.exp();
        if s.is_boundary {
            let a = BoundaryGeometry::at(patch, s, 3)?.s_tensor()?;
            let b = BoundaryGeometry::at(&tilde, s, 3)?.s_tensor()?;
            let scaled: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| a[i][j] / ew));
            out.s = out.s.max(crate::boundary::max_diff3(&b, &scaled));
            out.s_scale = out.s_scale.max(max_abs3(&a));
        } else {
            let (a, _) = Geometry::at(patch, s, 4)?.bach_direct()?;
            let (b, _) = Geometry::at(&tilde, s, 4)?.bach_direct()?;
            let (a, b) = (a.values(), b.values());
            let scaled = a.map(|v| v / (ew * ew));
            out.bach = out.bach.max(b.max_abs_diff(&scaled));
            out.bach_scale = out.bach_scale.max(a.max_abs());
        }
    }
    if let Some((rule, exec)) = quadrature {
        let base = evaluate(patch, rule, exec)?.weyl_b;
        let resc = evaluate(&tilde, rule, exec)?.weyl_b;
        out.weyl_b = Some((base, resc));
        out.weyl_b_relative = Some((resc - base).abs() / base.abs().max(1.0));
    }
    Ok(out)
}

/// Symmetric, trace-free and divergence-free residuals of the Bach tensor.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BachIdentities {
    pub asymmetry: f64,
    pub trace: f64,
    pub divergence: f64,
    pub scale: f64,
}

pub fn bach_identities(patch: &MetricPatch, point: &PointSample) -> Result<BachIdentities> {
    let geo = Geometry::at(patch, point, 5)?;
    let (b, asymmetry) = geo.bach_direct()?;
    let gi = geo.ginv.values();
    let bv = b.values();
    let mut trace = 0.0;
    for a in 0..4 {
        for c in 0..4 {
            trace += gi[[a, c]] * bv[[a, c]];
        }
    }
    let div = geo.divergence2(&b)?;
    Ok(BachIdentities {
        asymmetry,
        trace: trace.abs(),
        divergence: div.iter().fold(0.0, |m, j| m.max(j.value().abs())),
        scale: bv.max_abs(),
    })
}

// ---------------------------------------------------------------------------
// variations

/// `1 − (35t⁴ − 84t⁵ + 70t⁶ − 20t⁷)` on `[0, 1]`, zero beyond: equal to 1
/// to third order at `t = 0` and 0 to third order at `t = 1`.
fn cutoff_poly(t: &Jet) -> Jet {
    let t4 = t.powi(4);
    let inner = (((t.scale(-20.0).add_scalar(70.0)) * t.clone()).add_scalar(-84.0) * t.clone()).add_scalar(35.0);
    (&t4 * &inner).scale(-1.0).add_scalar(1.0)
}

/// `256 (u(1−u))⁴` with `u` the position of `x` in `[lo, hi]`, zero outside.
fn bump(x: &Jet, lo: f64, hi: f64) -> Jet {
    let u = x.add_scalar(-lo).scale(1.0 / (hi - lo));
    if !(0.0..=1.0).contains(&u.value()) {
        return x.zeros_like();
    }
    let q = &u * &u.scale(-1.0).add_scalar(1.0);
    q.powi(4).scale(256.0)
}

#[derive(Debug, Clone)]
enum VariationKind {
    /// `χ(x⁰) (1 − 2λ(x)x⁰) β(x) [vΣ − ⅓ tr_h(vΣ) h]` in the tangential
    /// block, `λ = H/3` of the base. The linear factor (used in normal-form
    /// charts) makes `∇_ν v = 0` on the boundary.
    Boundary {
        base: Arc<dyn TensorField>,
        sigma: Arc<[[Expr; 3]; 3]>,
        eps: f64,
        normal_correction: bool,
    },
    /// `β(x) M` with `M` a constant symmetric matrix.
    Interior { matrix: [[f64; 4]; 4] },
}

/// A compactly supported symmetric 2-tensor `v` on the patch.
#[derive(Debug, Clone)]
pub struct VariationField {
    kind: VariationKind,
    /// Box containing the support; quadrature for the check runs on it.
    pub support: [[f64; 2]; 4],
}

impl VariationField {
    pub fn is_interior(&self) -> bool {
        matches!(self.kind, VariationKind::Interior { .. })
    }

    pub fn collar_width(&self) -> Option<f64> {
        match &self.kind {
            VariationKind::Boundary { eps, .. } => Some(*eps),
            VariationKind::Interior { .. } => None,
        }
    }

    fn inside(&self, x: &[f64; 4]) -> bool {
        (0..4).all(|a| x[a] >= self.support[a][0] && x[a] <= self.support[a][1])
    }
}

impl TensorField for VariationField {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor> {
        let zero = Jet::constant(0.0, MAX_DIM, order)?;
        if !self.inside(x) {
            return Ok(Tensor::filled(4, 2, zero));
        }
        let seeds = seed_jets(x, order, active)?;
        match &self.kind {
            VariationKind::Interior { matrix } => {
                let mut b = Jet::constant(1.0, MAX_DIM, order)?;
                for a in 0..4 {
                    b = &b * &bump(&seeds[a], self.support[a][0], self.support[a][1]);
                }
                Ok(Tensor::from_fn(4, 2, |i| b.scale(matrix[i[0]][i[1]])))
            }
            VariationKind::Boundary {
                base,
                sigma,
                eps,
                normal_correction,
            } => {
                let mut tang = active;
                tang[0] = false;
                let xb = [0.0, x[1], x[2], x[3]];
                let h_full = base.jets(&xb, order, tang)?;
                let h = Tensor::from_fn(3, 2, |i| h_full[[i[0] + 1, i[1] + 1]].clone());
                let hinv = invert_metric(&h)?;
                let mut along = Jet::constant(1.0, MAX_DIM, order)?;
                if *normal_correction {
                    // L = −½∂₀h on the face, as jets in the tangential directions
                    let mut with_normal = tang;
                    with_normal[0] = true;
                    let g1 = base.jets(&xb, order + 1, with_normal)?;
                    let mut hh = zero.clone();
                    for i in 0..3 {
                        for j in 0..3 {
                            let l = g1[[i + 1, j + 1]].derivative(0).restrict(0).scale(-0.5);
                            hh.add_product(&hinv[[i, j]], &l);
                        }
                    }
                    along = &along - &(&hh * &seeds[0]).scale(2.0 / 3.0);
                }
                let tseeds = seed_jets(x, order, tang)?;
                let vs: Vec<Vec<Jet>> = (0..3)
                    .map(|i| (0..3).map(|j| sigma[i][j].eval_with(&tseeds)).collect::<std::result::Result<_, _>>())
                    .collect::<std::result::Result<_, _>>()?;
                let mut tr = zero.clone();
                for i in 0..3 {
                    for j in 0..3 {
                        tr.add_product(&hinv[[i, j]], &vs[i][j]);
                    }
                }
                let t = seeds[0].scale(1.0 / eps);
                let mut factor = if t.value() < 1.0 { &cutoff_poly(&t) * &along } else { zero.clone() };
                for a in 1..4 {
                    factor = &factor * &bump(&seeds[a], self.support[a][0], self.support[a][1]);
                }
                Ok(Tensor::from_fn(4, 2, |i| {
                    if i[0] == 0 || i[1] == 0 {
                        return zero.clone();
                    }
                    let (a, b) = (i[0] - 1, i[1] - 1);
                    let mut p = vs[a][b].clone();
                    p.fma_product(-1.0 / 3.0, &tr, &h[[a, b]]);
                    &factor * &p
                }))
            }
        }
    }
}

/// Tolerance on the linearised umbilicity constraint for constructed variations.
pub const LP_TOL: f64 = 1e-9;

/// Trivially extended, trace-free boundary variation
/// `v = χ(x⁰/ε) β(x) [vΣ − ⅓(h^{kl}vΣ_kl) h]`, where `β` is a bump on the
/// tangential box `support` (so no lateral boundary terms arise) and `χ`
/// is the polynomial cutoff. `vΣ` is written in the tangential coordinates.
pub fn build_umbilic_variation(
    patch: &MetricPatch,
    v_sigma: &[[&str; 3]; 3],
    eps: f64,
    support: [[f64; 2]; 3],
) -> Result<VariationField> {
    let names: Vec<String> = patch.chart.coords.to_vec();
    let d = &patch.chart.domain;
    if !(eps > 0.0) || eps > d[0][1] {
        return Err(GeomError::InvalidParameter(format!(
            "collar width {eps} must lie in (0, {}]",
            d[0][1]
        )));
    }
    for a in 0..3 {
        let [lo, hi] = support[a];
        if !(lo < hi) || lo < d[a + 1][0] || hi > d[a + 1][1] {
            return Err(GeomError::InvalidParameter(format!(
                "variation support on axis {} must be a sub-interval of the chart",
                a + 1
            )));
        }
    }
    let mut parsed = Vec::with_capacity(9);
    for (i, row) in v_sigma.iter().enumerate() {
        for (j, src) in row.iter().enumerate() {
            let e = parse_expr(src, &names)?;
            if e.uses_axis(0) {
                return Err(GeomError::InvalidParameter(format!("vΣ[{i}][{j}] depends on {}", names[0])));
            }
            parsed.push(e);
        }
    }
    let sigma: [[Expr; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| parsed[3 * i + j].clone()));
    for i in 0..3 {
        for j in 0..i {
            if sigma[i][j] != sigma[j][i] {
                return Err(GeomError::InvalidParameter(format!("vΣ[{i}][{j}] and vΣ[{j}][{i}] differ")));
            }
        }
    }
    let probes: Vec<PointSample> = (0..5)
        .map(|k| {
            let s = 0.1 + 0.2 * k as f64;
            let t: [f64; 3] = std::array::from_fn(|a| support[a][0] + s * (support[a][1] - support[a][0]));
            PointSample::boundary(&patch.chart, t)
        })
        .collect::<Result<_>>()?;
    let umb = crate::boundary::umbilicity_residual(patch, &probes)?;
    if umb > 1e-9 {
        return Err(GeomError::Precondition {
            what: "umbilic boundary".into(),
            residual: umb,
        });
    }
    let mut normal_form = true;
    for p in &probes {
        let g = crate::metric::metric_at(patch, p, 1)?;
        normal_form &= crate::boundary::normal_form_residual(&g) <= 1e-12;
    }
    let v = VariationField {
        kind: VariationKind::Boundary {
            base: Arc::clone(&patch.field),
            sigma: Arc::new(sigma.clone()),
            eps,
            normal_correction: normal_form,
        },
        support: [[0.0, eps], support[0], support[1], support[2]],
    };
    // a nonzero vΣ must survive the trace projection
    let mut raw: f64 = 0.0;
    let mut projected: f64 = 0.0;
    for k in 0..5 {
        let s = 0.1 + 0.2 * k as f64;
        let x: [f64; 4] = std::array::from_fn(|a| if a == 0 { 0.0 } else { support[a - 1][0] + s * (support[a - 1][1] - support[a - 1][0]) });
        for i in 0..3 {
            for j in 0..3 {
                raw = raw.max(sigma[i][j].eval(&x)?.abs());
            }
        }
        let vj = v.jets(&x, 0, [false; 4])?;
        projected = projected.max(vj.values().max_abs());
    }
    if raw > 0.0 && projected <= 1e-10 * raw {
        return Err(GeomError::InvalidParameter(
            "vΣ is pure trace; the trace-free projection is zero".into(),
        ));
    }
    // outside normal form the construction is only valid where it keeps
    // the linearised constraint
    for p in &probes {
        let r = lp_residual(patch, &v, p)?;
        if r > LP_TOL * projected.max(1.0) {
            return Err(GeomError::Precondition {
                what: "umbilicity-preserving variation (normal-form chart or totally geodesic boundary)".into(),
                residual: r,
            });
        }
    }
    Ok(v)
}

/// `β(x) M` on a box strictly inside the chart.
pub fn interior_variation(patch: &MetricPatch, support: [[f64; 2]; 4], matrix: [[f64; 4]; 4]) -> Result<VariationField> {
    let d = &patch.chart.domain;
    for a in 0..4 {
        let [lo, hi] = support[a];
        if !(lo < hi) || lo < d[a][0] || hi > d[a][1] {
            return Err(GeomError::InvalidParameter(format!("interior support on axis {a} leaves the chart")));
        }
    }
    if support[0][0] <= d[0][0] {
        return Err(GeomError::InvalidParameter("interior support must stay off the boundary".into()));
    }
    for i in 0..4 {
        for j in 0..i {
            if matrix[i][j] != matrix[j][i] {
                return Err(GeomError::InvalidParameter("variation matrix must be symmetric".into()));
            }
        }
    }
    Ok(VariationField {
        kind: VariationKind::Interior { matrix },
        support,
    })
}

/// Random polynomial `vΣ` of degree ≤ 2 in the tangential coordinates
/// rescaled to `[−1, 1]` over the domain, coefficients in `[−1, 1]`, as
/// expression strings. The projection to its trace-free part happens in
/// [`build_umbilic_variation`].
pub fn random_sigma(patch: &MetricPatch, seed: u64) -> [[String; 3]; 3] {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = normalized_coords(patch);
    let mut v: [[String; 3]; 3] = Default::default();
    for i in 0..3 {
        for j in i..3 {
            let mut terms = vec![format!("{:?}", rng.gen_range(-1.0..1.0))];
            for a in 1..4 {
                terms.push(format!("{:?}*{}", rng.gen_range(-1.0..1.0), y[a]));
                for b in a..4 {
                    terms.push(format!("{:?}*{}*{}", rng.gen_range(-1.0..1.0), y[a], y[b]));
                }
            }
            let e = terms.join(" + ");
            v[i][j] = e.clone();
            v[j][i] = e;
        }
    }
    v
}

/// `(x^a − mid_a) / half_a` for each coordinate, as expression strings.
fn normalized_coords(patch: &MetricPatch) -> Vec<String> {
    let n = &patch.chart.coords;
    let d = &patch.chart.domain;
    (0..4)
        .map(|a| {
            let mid = 0.5 * (d[a][0] + d[a][1]);
            let half = 0.5 * (d[a][1] - d[a][0]);
            format!("(({} - {:?})/{:?})", n[a], mid, half)
        })
        .collect()
}

/// Random conformal factor on any chart: a quadratic polynomial in the
/// coordinates centred on the domain plus one `sin` term, scaled by
/// `amplitude`.
pub fn random_conformal_factor(patch: &MetricPatch, seed: u64, amplitude: f64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let y = normalized_coords(patch);
    let mut terms = vec![format!("{:?}", amplitude * rng.gen_range(-1.0..1.0))];
    for a in 0..4 {
        terms.push(format!("{:?}*{}", amplitude * rng.gen_range(-1.0..1.0), y[a]));
        for b in a..4 {
            terms.push(format!("{:?}*{}*{}", 0.5 * amplitude * rng.gen_range(-1.0..1.0), y[a], y[b]));
        }
    }
    let k = rng.gen_range(0..4);
    terms.push(format!("{:?}*sin({}+{}*{})", 0.5 * amplitude * rng.gen_range(-1.0..1.0), y[k], y[(k + 1) % 4], y[(k + 2) % 4]));
    terms.join(" + ")
}

/// Residual of the linearised umbilicity constraint
/// `½(∇_iv_{j0} + ∇_jv_{i0} − ∇_0v_{ij}) − ⅓Hv_{ij}
///  − ⅓([∇^αv_{α0} − ½∇_0 tr v − ½∇_0v_{00}] − L^{kl}v_{kl}) h_{ij}`
/// at a boundary point. Every 0 slot is along the inward unit normal, while
/// `H` and `L` keep the outward sign (flat ball: `L = h`).
pub fn lp_residual(patch: &MetricPatch, v: &VariationField, point: &PointSample) -> Result<f64> {
    let lp = lp_tensor(patch, v, point)?;
    Ok(max_abs3(&lp))
}

pub fn lp_tensor(patch: &MetricPatch, v: &VariationField, point: &PointSample) -> Result<Sym3> {
    let bg = BoundaryGeometry::at(patch, point, 2)?;
    let vj = v.jets(&point.coords, 1, [true; 4])?;
    let dv = bg.ambient.covariant_derivative(&vj)?.values();
    let vv = vj.values();
    let shape = bg.shape();
    let nu = shape.nu.map(|c| -c);
    let gi = bg.ambient.ginv.values();
    let hh = shape.mean_curvature;
    // contraction helpers with ν
    let d_tan0 = |i: usize, j: usize| (0..4).map(|a| nu[a] * dv[[j, a, i]]).sum::<f64>();
    let d0 = |a: usize, b: usize| (0..4).map(|m| nu[m] * dv[[a, b, m]]).sum::<f64>();
    let mut div0 = 0.0;
    let mut d0tr = 0.0;
    let mut d000 = 0.0;
    for al in 0..4 {
        for m in 0..4 {
            for a in 0..4 {
                div0 += gi[[al, m]] * nu[a] * dv[[al, a, m]];
                d0tr += gi[[al, a]] * nu[m] * dv[[al, a, m]];
            }
        }
    }
    for a in 0..4 {
        for b in 0..4 {
            d000 += nu[a] * nu[b] * d0(a, b);
        }
    }
    let lup = |k: usize, l: usize| {
        let mut s = 0.0;
        for p in 0..3 {
            for q in 0..3 {
                s += shape.hinv[k][p] * shape.hinv[l][q] * shape.l[p][q];
            }
        }
        s
    };
    let mut lv = 0.0;
    for k in 0..3 {
        for l in 0..3 {
            lv += lup(k, l) * vv[[k + 1, l + 1]];
        }
    }
    let bracket = div0 - 0.5 * d0tr - 0.5 * d000 - lv;
    Ok(std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            0.5 * (d_tan0(i + 1, j + 1) + d_tan0(j + 1, i + 1) - d0(i + 1, j + 1)) - hh / 3.0 * vv[[i + 1, j + 1]]
                - bracket / 3.0 * shape.h[i][j]
        })
    }))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VariationOptions {
    pub t_step: f64,
    /// Nodes per axis on the support box.
    pub n: usize,
    pub exec: ExecutionTag,
}

/// Serializable mirror of [`Execution`].
#[derive(Debug, Clone, Copy, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum ExecutionTag {
    Sequential,
    Parallel,
}

impl From<ExecutionTag> for Execution {
    fn from(t: ExecutionTag) -> Self {
        match t {
            ExecutionTag::Sequential => Execution::Sequential,
            ExecutionTag::Parallel => Execution::Parallel,
        }
    }
}

impl Default for VariationOptions {
    fn default() -> Self {
        Self {
            t_step: 1e-4,
            n: 8,
            exec: ExecutionTag::Parallel,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FirstVariation {
    /// Five-point central difference of `t ↦ W_b(g + tv)`.
    pub numeric: f64,
    /// `−∫B^{μν}v_{μν} dv + ∮S^{ij}v_{ij} dσ`.
    pub formula: f64,
    pub bach_term: f64,
    pub boundary_term: f64,
    pub absolute: f64,
    /// `absolute / max(|formula|, |numeric|, VARIATION_FLOOR)`.
    pub relative: f64,
    pub t_step: f64,
    pub n: usize,
}

/// Below this size both sides of the first-variation check count as zero
/// (Bach-flat, S-flat bases).
pub const VARIATION_FLOOR: f64 = 1e-6;

fn perturbed_patch(patch: &MetricPatch, v: &VariationField, t: f64) -> MetricPatch {
    MetricPatch::from_field(
        format!("{}+tv", patch.name),
        patch.chart.clone(),
        Arc::new(SumField {
            base: Arc::clone(&patch.field),
            field: Arc::new(v.clone()),
            t,
        }),
    )
}

fn shifted(g: &JetTensor, v: &JetTensor, t: f64) -> JetTensor {
    Tensor::from_fn(4, 2, |i| &g[i] + &v[i].scale(t))
}

/// `W_b(g + tv)` restricted to the support box of `v` (outside it
/// `g + tv = g`) for every `t` in `ts`. The jets of `g` and `v` are taken
/// once per node and shared by all `t`.
fn local_weyl_b(patch: &MetricPatch, v: &VariationField, rule: &QuadratureRule, ts: &[f64], exec: Execution) -> Result<Vec<f64>> {
    let nodes = rule.nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let g = metric_jets(patch, &x, 2, [true; 4]).map_err(|e| e.at(x))?;
        let vj = v.jets(&x, 2, [true; 4]).map_err(|e| e.at(x))?;
        ts.iter()
            .map(|&t| {
                let pc = PointCurvature::from_jets(&shifted(&g, &vj, t)).map_err(|e| e.at(x))?;
                Ok(w * pc.sqrt_det * 0.25 * pc.weyl_norm_sq())
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut out: Vec<f64> = (0..ts.len()).map(|c| pairwise_sum(&vals.iter().map(|r| r[c]).collect::<Vec<_>>())).collect();
    if v.is_interior() {
        return Ok(out);
    }
    let faces = rule.boundary_nodes();
    let vals = try_map(exec, faces.len(), |k| {
        let (x, w) = faces[k];
        let g = metric_jets(patch, &x, 2, [true; 4]).map_err(|e| e.at(x))?;
        let vj = v.jets(&x, 2, [true; 4]).map_err(|e| e.at(x))?;
        ts.iter()
            .map(|&t| {
                let b = PointCurvature::from_jets(&shifted(&g, &vj, t))
                    .and_then(|pc| pc.boundary())
                    .map_err(|e| e.at(x))?;
                Ok(w * b.sqrt_det_h * b.weyl_dot_l)
            })
            .collect::<Result<Vec<f64>>>()
    })?;
    for (c, o) in out.iter_mut().enumerate() {
        *o += 2.0 * pairwise_sum(&vals.iter().map(|r| r[c]).collect::<Vec<_>>());
    }
    Ok(out)
}

/// Five-point central differences for each step in `steps`, from one sweep.
fn numeric_derivatives(patch: &MetricPatch, v: &VariationField, rule: &QuadratureRule, steps: &[f64], exec: Execution) -> Result<Vec<f64>> {
    let ts: Vec<f64> = steps.iter().flat_map(|&h| [-2.0 * h, -h, h, 2.0 * h]).collect();
    let f = local_weyl_b(patch, v, rule, &ts, exec)?;
    Ok(steps
        .iter()
        .enumerate()
        .map(|(k, &h)| {
            let [m2, m1, p1, p2] = [f[4 * k], f[4 * k + 1], f[4 * k + 2], f[4 * k + 3]];
            (m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)
        })
        .collect())
}

/// Numeric derivative of `W_b` along `v` against the Bach/S formula, both by
/// quadrature on the support box of `v`.
pub fn first_variation_check(patch: &MetricPatch, v: &VariationField, opts: &VariationOptions) -> Result<FirstVariation> {
    let exec: Execution = opts.exec.into();
    let n = opts.n;
    let rule = QuadratureRule::on_box(v.support, n)?;
    let numeric = numeric_derivatives(patch, v, &rule, &[opts.t_step], exec)?[0];

    let nodes = rule.nodes();
    let vals = try_map(exec, nodes.len(), |k| {
        let (x, w) = nodes[k];
        let p = PointSample { coords: x, is_boundary: false };
        let geo = Geometry::at(patch, &p, 4).map_err(|e| e.at(x))?;
        let (b, _) = geo.bach_direct().map_err(|e| e.at(x))?;
        let b_up = geo.raise2(&b).values();
        let vv = v.jets(&x, 0, [false; 4])?.values();
        let mut s = 0.0;
        for a in 0..4 {
            for c in 0..4 {
                s += b_up[[a, c]] * vv[[a, c]];
            }
        }
        let gv = geo.g.values();
        let sqrt_det = crate::linalg::det4(&std::array::from_fn(|i| std::array::from_fn(|j| gv[[i, j]]))).sqrt();
        Ok(w * sqrt_det * s)
    })?;
    let bach_term = -pairwise_sum(&vals);

    let boundary_term = if v.is_interior() {
        0.0
    } else {
        let faces = rule.boundary_nodes();
        let vals = try_map(exec, faces.len(), |k| {
            let (x, w) = faces[k];
            let p = PointSample { coords: x, is_boundary: true };
            let bg = BoundaryGeometry::at(patch, &p, 3).map_err(|e| e.at(x))?;
            let s = bg.s_tensor().map_err(|e| e.at(x))?;
            let shape = bg.shape();
            let vv = v.jets(&x, 0, [false; 4])?.values();
            let mut acc = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    for k2 in 0..3 {
                        for l in 0..3 {
                            acc += shape.hinv[i][k2] * shape.hinv[j][l] * s[k2][l] * vv[[i + 1, j + 1]];
                        }
                    }
                }
            }
            Ok(w * crate::linalg::det3(&shape.h).sqrt() * acc)
        })?;
        pairwise_sum(&vals)
    };
    let formula = bach_term + boundary_term;
    let absolute = (numeric - formula).abs();
    let scale = numeric.abs().max(formula.abs()).max(VARIATION_FLOOR);
    Ok(FirstVariation {
        numeric,
        formula,
        bach_term,
        boundary_term,
        absolute,
        relative: absolute / scale,
        t_step: opts.t_step,
        n,
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StencilConvergence {
    pub steps: [f64; 3],
    pub derivatives: [f64; 3],
    /// `|D(h) − D(h/2)| / |D(h/2) − D(h/4)|`; about 16 for a fourth-order stencil.
    pub ratio: f64,
}

/// Convergence order of the five-point stencil along `v`, from three
/// successively halved steps starting at `h`.
pub fn stencil_convergence(patch: &MetricPatch, v: &VariationField, h: f64, n: usize, exec: Execution) -> Result<StencilConvergence> {
    let rule = QuadratureRule::on_box(v.support, n)?;
    let steps = [h, h / 2.0, h / 4.0];
    let dv = numeric_derivatives(patch, v, &rule, &steps, exec)?;
    let d = [dv[0], dv[1], dv[2]];
    Ok(StencilConvergence {
        steps,
        derivatives: d,
        ratio: (d[0] - d[1]).abs() / (d[1] - d[2]).abs(),
    })
}

/// Checks that `g + tv` stays positive definite on the support nodes for
/// `|t| ≤ t_max`.
pub fn check_variation_spd(patch: &MetricPatch, v: &VariationField, t_max: f64, n: usize) -> Result<()> {
    let rule = QuadratureRule::on_box(v.support, n)?;
    for t in [-t_max, t_max] {
        let p = perturbed_patch(patch, v, t);
        for (x, _) in rule.nodes().iter().chain(rule.boundary_nodes().iter()) {
            metric_jets(&p, x, 0, [false; 4]).map_err(|e| e.at(*x))?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Escobar probe

/// Random smooth conformal factors on the hemisphere chart, built from the
/// embedding coordinates of `S⁴ ⊂ R⁵` so they are smooth across the seams.
pub fn random_embedded_factors(seed: u64, count: usize, amplitude: f64) -> Vec<String> {
    let x = [
        "sin(r)",
        "cos(r)*cos(a)",
        "cos(r)*sin(a)*cos(b)",
        "cos(r)*sin(a)*sin(b)*cos(c)",
        "cos(r)*sin(a)*sin(b)*sin(c)",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut terms = Vec::new();
            for xi in &x {
                terms.push(format!("{:?}*{xi}", amplitude * rng.gen_range(-1.0..1.0)));
            }
            for i in 0..5 {
                for j in i..5 {
                    terms.push(format!("{:?}*{}*{}", 0.5 * amplitude * rng.gen_range(-1.0..1.0), x[i], x[j]));
                }
            }
            terms.join(" + ")
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EscobarProbe {
    pub target: f64,
    pub base_quotient: f64,
    pub quotients: Vec<f64>,
    pub min_quotient: f64,
    /// `min − target`; non-negative up to quadrature error.
    pub min_gap: f64,
}

/// Yamabe quotients of conformal rescalings of `patch`, which must lie in
/// the conformal class of the round hemisphere (checked through `W = 0` at
/// a few interior points).
pub fn escobar_bound_probe(patch: &MetricPatch, rule: &QuadratureRule, factors: &[String], exec: Execution) -> Result<EscobarProbe> {
    let d = &patch.chart.domain;
    for s in [0.2, 0.5, 0.8] {
        let x: [f64; 4] = std::array::from_fn(|a| d[a][0] + s * (d[a][1] - d[a][0]));
        let pc = PointCurvature::from_jets(&metric_jets(patch, &x, 2, [true; 4])?)?;
        let w = pc.weyl_norm_sq().abs().sqrt();
        if w > 1e-8 {
            return Err(GeomError::Precondition {
                what: "conformally flat base (hemisphere class)".into(),
                residual: w,
            });
        }
    }
    let base_quotient = yamabe_quotient(patch, rule, exec)?;
    let mut quotients = Vec::with_capacity(factors.len());
    for w in factors {
        quotients.push(yamabe_quotient(&conformal_rescale(patch, w)?, rule, exec)?);
    }
    let min_quotient = quotients.iter().copied().fold(base_quotient, f64::min);
    Ok(EscobarProbe {
        target: hemisphere_yamabe(),
        base_quotient,
        quotients,
        min_quotient,
        min_gap: min_quotient - hemisphere_yamabe(),
    })
}
