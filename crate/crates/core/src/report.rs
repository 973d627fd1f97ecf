//! Verification suites over one metric patch and the JSON report they fill.
//!
//! Each check records the largest residual seen over its samples against a
//! fixed tolerance. Checks whose precondition does not hold on the patch are
//! listed as skipped and do not fail the report.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::boundary::{
    fermi_christoffel_check, fermi_direct_coefficients, fermi_formula_coefficients, fermi_geodesic_expansion,
    h3_identity_check, max_diff3, umbilicity_residual, BoundaryGeometry, Sym3,
};
use crate::curvature::{curvature_point, Geometry};
use crate::error::{GeomError, Result};
use crate::functionals::{
    bach_identities, build_umbilic_variation, conformal_law_residuals, evaluate, first_variation_check,
    hemisphere_yamabe, interior_variation, lp_residual, random_conformal_factor, random_sigma, ExecutionTag,
    VariationField, VariationOptions, LP_TOL,
};
use crate::metric::{MetricPatch, PointSample};
use crate::models::{perturbed_flat, Perturbation};
use crate::par::{try_map, Execution};
use crate::quadrature::QuadratureRule;

pub const SCHEMA: u32 = 1;
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    CurvatureSymmetries,
    GaussCodazzi,
    WeylBoundary,
    ConformalLaws,
    Fermi,
    Variation,
    Functionals,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::CurvatureSymmetries,
        Suite::GaussCodazzi,
        Suite::WeylBoundary,
        Suite::ConformalLaws,
        Suite::Fermi,
        Suite::Variation,
        Suite::Functionals,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CurvatureSymmetries => "curvature-symmetries",
            Suite::GaussCodazzi => "gauss-codazzi",
            Suite::WeylBoundary => "weyl-boundary",
            Suite::ConformalLaws => "conformal-laws",
            Suite::Fermi => "fermi",
            Suite::Variation => "variation",
            Suite::Functionals => "functionals",
        }
    }

    /// `all` or a comma-separated list of suite names.
    pub fn parse_list(s: &str) -> Result<Vec<Suite>> {
        if s.trim() == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim) {
            let suite = Suite::ALL
                .iter()
                .copied()
                .find(|x| x.name() == part)
                .ok_or_else(|| GeomError::InvalidParameter(format!("unknown suite \"{part}\"")))?;
            if !out.contains(&suite) {
                out.push(suite);
            }
        }
        if out.is_empty() {
            return Err(GeomError::InvalidParameter("no suite selected".into()));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    /// Model name or metric-file path, echoed into the report.
    pub source: String,
    pub suites: Vec<Suite>,
    /// Sample points per pointwise check.
    pub points: usize,
    /// Jet order for the expansion checks.
    pub order: usize,
    /// Quadrature nodes per axis.
    pub quad: usize,
    pub seed: u64,
    /// Replaces every check's own tolerance when set.
    pub tol: Option<f64>,
    pub exec: ExecutionTag,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            source: String::new(),
            suites: Suite::ALL.to_vec(),
            points: 50,
            order: 4,
            quad: 16,
            seed: 7,
            tol: None,
            exec: ExecutionTag::Parallel,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GeomError::InvalidParameter(m));
        if self.points == 0 {
            return bad("--points must be at least 1".into());
        }
        if !(2..=MAX_ORDER).contains(&self.order) {
            return bad(format!("jet order {} outside 2..={MAX_ORDER}", self.order));
        }
        if self.quad < 4 {
            return bad(format!("quadrature n = {} is below 4", self.quad));
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return bad(format!("tolerance {t} must be positive"));
            }
        }
        if self.suites.is_empty() {
            return bad("no suite selected".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub suite: &'static str,
    /// The identity or statement being checked.
    pub anchor: &'static str,
    pub max_residual: f64,
    pub tolerance: f64,
    pub n_samples: usize,
    pub pass: bool,
    /// Why the check did not run, e.g. `"precondition: umbilic boundary"`.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub schema: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub model: String,
    pub config: SuiteConfig,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub wall_time_s: f64,
}

impl Report {
    pub fn failed(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// The report as JSON without the wall-time field, for comparing runs.
    pub fn deterministic_json(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(m) = v.as_object_mut() {
            m.remove("wall_time_s");
        }
        v
    }
}

/// An evaluation failure inside a named check.
#[derive(Debug, Clone)]
pub struct SuiteError {
    pub check: String,
    pub source: GeomError,
}

impl fmt::Display for SuiteError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "check {} failed to evaluate: {}", self.check, self.source)
    }
}

impl std::error::Error for SuiteError {}

/// Errors meaning "this identity does not apply here" rather than a failure.
pub fn precondition_reason(e: &GeomError) -> Option<String> {
    match e {
        GeomError::AtNode { source, .. } => precondition_reason(source),
        GeomError::Precondition { what, .. } => Some(format!("precondition: {what}")),
        GeomError::NotNormalForm { .. } => Some("precondition: chart in normal form".into()),
        GeomError::NotConstantScalar { .. } => Some("precondition: constant scalar curvature".into()),
        _ => None,
    }
}

struct Recorder<'a> {
    cfg: &'a SuiteConfig,
    suite: Suite,
    checks: Vec<Check>,
}

impl Recorder<'_> {
    fn tol(&self, own: f64) -> f64 {
        self.cfg.tol.unwrap_or(own)
    }

    fn skip(&mut self, name: &str, anchor: &'static str, tol: f64, reason: String) {
        self.checks.push(Check {
            name: name.to_string(),
            suite: self.suite.name(),
            anchor,
            max_residual: 0.0,
            tolerance: self.tol(tol),
            n_samples: 0,
            pass: true,
            skipped: Some(reason),
        });
    }

    /// Runs `f`, which returns `(max residual, samples)`.
    fn run<F>(&mut self, name: &str, anchor: &'static str, tol: f64, f: F) -> std::result::Result<(), SuiteError>
    where
        F: FnOnce() -> Result<(f64, usize)>,
    {
        match f() {
            Ok((residual, n)) => {
                let tolerance = self.tol(tol);
                self.checks.push(Check {
                    name: name.to_string(),
                    suite: self.suite.name(),
                    anchor,
                    max_residual: residual,
                    tolerance,
                    n_samples: n,
                    pass: residual <= tolerance,
                    skipped: None,
                });
                Ok(())
            }
            Err(e) => match precondition_reason(&e) {
                Some(reason) => {
                    self.skip(name, anchor, tol, reason);
                    Ok(())
                }
                None => Err(SuiteError {
                    check: name.to_string(),
                    source: e,
                }),
            },
        }
    }
}

fn sample_coords(patch: &MetricPatch, rng: &mut ChaCha8Rng, boundary: bool) -> [f64; 4] {
    let d = &patch.chart.domain;
    std::array::from_fn(|a| {
        if a == 0 && boundary {
            d[0][0]
        } else {
            let w = d[a][1] - d[a][0];
            d[a][0] + w * rng.gen_range(0.1..0.9)
        }
    })
}

/// Seeded interior sample points at least 10% of the width from every face.
pub fn interior_samples(patch: &MetricPatch, n: usize, seed: u64) -> Result<Vec<PointSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| PointSample::new(&patch.chart, sample_coords(patch, &mut rng, false))).collect()
}

/// Seeded points on the `x⁰ = 0` face.
pub fn boundary_samples(patch: &MetricPatch, n: usize, seed: u64) -> Result<Vec<PointSample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b0d1);
    (0..n)
        .map(|_| {
            let x = sample_coords(patch, &mut rng, true);
            PointSample::boundary(&patch.chart, [x[1], x[2], x[3]])
        })
        .collect()
}

/// Max of `f` over `samples`, evaluated in parallel.
fn sup<F>(exec: Execution, samples: &[PointSample], f: F) -> Result<(f64, usize)>
where
    F: Fn(&PointSample) -> Result<f64> + Sync + Send,
{
    let vals = try_map(exec, samples.len(), |k| f(&samples[k]).map_err(|e| e.at(samples[k].coords)))?;
    Ok((vals.into_iter().fold(0.0, f64::max), samples.len()))
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn run_suites(patch: &MetricPatch, cfg: &SuiteConfig) -> std::result::Result<Report, SuiteError> {
    cfg.validate().map_err(|e| SuiteError {
        check: "config".into(),
        source: e,
    })?;
    let start = Instant::now();
    let mut checks = Vec::new();
    for &suite in &cfg.suites {
        let mut rec = Recorder {
            cfg,
            suite,
            checks: Vec::new(),
        };
        match suite {
            Suite::CurvatureSymmetries => curvature_suite(patch, &mut rec)?,
            Suite::GaussCodazzi => gauss_codazzi_suite(patch, &mut rec)?,
            Suite::WeylBoundary => weyl_boundary_suite(patch, &mut rec)?,
            Suite::ConformalLaws => conformal_suite(patch, &mut rec)?,
            Suite::Fermi => fermi_suite(patch, &mut rec)?,
            Suite::Variation => variation_suite(patch, &mut rec)?,
            Suite::Functionals => functional_suite(patch, &mut rec)?,
        }
        checks.extend(rec.checks);
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        schema: SCHEMA,
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        model: patch.name.clone(),
        config: cfg.clone(),
        checks,
        pass,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

type SuiteResult = std::result::Result<(), SuiteError>;

fn eval_err(check: &str) -> impl FnOnce(GeomError) -> SuiteError + '_ {
    move |source| SuiteError {
        check: check.to_string(),
        source,
    }
}

// ---------------------------------------------------------------------------

/// The Bach-tensor checks need order-5 jets; they use at most this many
/// points.
const BACH_POINTS: usize = 10;

fn curvature_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let pts = interior_samples(patch, rec.cfg.points, rec.cfg.seed).map_err(eval_err("sampling"))?;
    let cps = try_map(exec, pts.len(), |k| curvature_point(patch, &pts[k], false).map_err(|e| e.at(pts[k].coords)))
        .map_err(eval_err("curvature"))?;
    let n = cps.len();
    rec.run("riemann-symmetries", "algebraic symmetries and first Bianchi identity of Rm", 1e-9, || {
        Ok((cps.iter().map(|c| c.rm_symmetry_residual()).fold(0.0, f64::max), n))
    })?;
    rec.run("weyl-trace-free", "every trace of W vanishes", 1e-9, || {
        Ok((cps.iter().map(|c| c.weyl_trace_residual()).fold(0.0, f64::max), n))
    })?;
    rec.run("schouten-decomposition", "Rm = W + P ⊘ g", 1e-9, || {
        Ok((cps.iter().map(|c| c.decomposition_residual()).fold(0.0, f64::max), n))
    })?;

    let few = &pts[..pts.len().min(BACH_POINTS)];
    rec.run("bach-identities", "B is symmetric, trace-free and divergence-free", 1e-7, || {
        sup(exec, few, |p| {
            let b = bach_identities(patch, p)?;
            Ok(b.asymmetry.max(b.trace).max(b.divergence))
        })
    })?;

    let scal: Vec<f64> = cps.iter().map(|c| c.scal).collect();
    let spread = scal.iter().fold(0.0f64, |m, v| m.max((v - scal[0]).abs()));
    if spread > 1e-9 {
        rec.skip(
            "bach-forms-agree",
            "direct, Schouten and trace-free Ricci forms of B agree at constant R",
            1e-8,
            "precondition: constant scalar curvature".into(),
        );
    } else {
        let c = scal[0];
        rec.run(
            "bach-forms-agree",
            "direct, Schouten and trace-free Ricci forms of B agree at constant R",
            1e-8,
            || {
                sup(exec, few, |p| {
                    let geo = Geometry::at(patch, p, 4)?;
                    let (a, _) = geo.bach_direct()?;
                    let (a, b, t) = (
                        a.values(),
                        geo.bach_schouten_form()?.values(),
                        geo.bach_tracefree_form(c)?.values(),
                    );
                    Ok(a.max_abs_diff(&b).max(a.max_abs_diff(&t)).max(b.max_abs_diff(&t)))
                })
            },
        )?;
    }

    let einstein = cps.iter().all(|c| c.tracefree_ricci.max_abs() <= 1e-9);
    let conf_flat = cps.iter().all(|c| c.weyl.max_abs() <= 1e-9);
    if einstein || conf_flat {
        rec.run("bach-flat", "Einstein and conformally flat metrics are Bach-flat", 1e-9, || {
            sup(exec, few, |p| {
                let geo = Geometry::at(patch, p, 4)?;
                let (a, _) = geo.bach_direct()?;
                let mut m = a.values().max_abs().max(geo.bach_schouten_form()?.values().max_abs());
                if spread <= 1e-9 {
                    m = m.max(geo.bach_tracefree_form(scal[0])?.values().max_abs());
                }
                Ok(m)
            })
        })?;
    } else {
        rec.skip(
            "bach-flat",
            "Einstein and conformally flat metrics are Bach-flat",
            1e-9,
            "precondition: Einstein or conformally flat".into(),
        );
    }
    Ok(())
}

fn tangential_schouten_target(f: f64, h: &Sym3) -> Sym3 {
    std::array::from_fn(|i| std::array::from_fn(|j| f * h[i][j]))
}

fn gauss_codazzi_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let pts = boundary_samples(patch, rec.cfg.points, rec.cfg.seed).map_err(eval_err("sampling"))?;
    let gcs = try_map(exec, pts.len(), |k| {
        let bg = BoundaryGeometry::at(patch, &pts[k], 3)?;
        Ok((bg.gauss_codazzi()?, bg.values()))
    })
    .map_err(eval_err("gauss-codazzi"))?;
    let n = gcs.len();
    let max_of = |f: &dyn Fn(&crate::boundary::GaussCodazzi) -> f64| gcs.iter().map(|(g, _)| f(g)).fold(0.0, f64::max);

    rec.run("gauss", "Gauss equation R_ikjl = R^Σ_ikjl − L_ij L_kl + L_il L_jk", 1e-8, || {
        Ok((max_of(&|g| g.gauss), n))
    })?;
    rec.run("codazzi", "Codazzi equation R_ijkν + ∇_j L_ik − ∇_i L_jk = 0", 1e-8, || {
        Ok((max_of(&|g| g.codazzi), n))
    })?;
    rec.run("gauss-first-trace", "once-traced Gauss equation", 1e-8, || {
        Ok((max_of(&|g| g.gauss_first_trace), n))
    })?;
    rec.run("gauss-second-trace", "twice-traced Gauss equation in Schouten form", 1e-8, || {
        Ok((max_of(&|g| g.gauss_second_trace), n))
    })?;
    rec.run("ricci-normal", "contracted Codazzi equation R_jν + ∇_j H − ∇^i L_ij = 0", 1e-8, || {
        Ok((max_of(&|g| g.ricci_normal), n))
    })?;
    rec.run("schouten-normal", "normal Schouten component from the Gauss equation", 1e-8, || {
        Ok((max_of(&|g| g.p00_general), n))
    })?;

    let umb = max_of(&|g| g.umbilicity);
    if umb <= 1e-9 {
        rec.run("ricci-normal-umbilic", "R_jν + ⅔∇_j H = 0 on umbilic boundaries", 1e-8, || {
            Ok((max_of(&|g| g.ricci_normal_umbilic), n))
        })?;
        rec.run("schouten-normal-umbilic", "P_νν = R/6 − R^Σ/4 + H²/6 on umbilic boundaries", 1e-8, || {
            Ok((max_of(&|g| g.p00_umbilic), n))
        })?;
    } else {
        for (name, anchor) in [
            ("ricci-normal-umbilic", "R_jν + ⅔∇_j H = 0 on umbilic boundaries"),
            ("schouten-normal-umbilic", "P_νν = R/6 − R^Σ/4 + H²/6 on umbilic boundaries"),
        ] {
            rec.skip(name, anchor, 1e-8, "precondition: umbilic boundary".into());
        }
    }

    // model cases: hemisphere (P = ½g, H = 0) and round ball (P = 0, H = 3)
    const MODEL_ANCHOR: &str = "model boundary values of the hemisphere and the ball";
    let model = match patch.name.as_str() {
        "hemisphere" => Some((0.5, 0.0)),
        "flat_ball" | "flat_ball_collar" => Some((0.0, 3.0)),
        _ => None,
    };
    match model {
        Some((p_factor, h_target)) => {
            rec.run("model-boundary-values", MODEL_ANCHOR, 1e-9, || {
                sup(exec, &pts, |p| {
                    let bg = BoundaryGeometry::at(patch, p, 2)?;
                    let v = bg.values();
                    let g = bg.ambient.g.values();
                    let sch = bg.ambient.schouten.values();
                    let mut m = sch.max_abs_diff(&g.map(|x| p_factor * x));
                    m = m.max(max_diff3(&v.intrinsic_schouten, &tangential_schouten_target(0.5, &v.shape.h)));
                    m = m.max((v.shape.mean_curvature - h_target).abs());
                    Ok(m.max(v.weyl_max))
                })
            })?;
            if p_factor == 0.5 {
                rec.run("hemisphere-schouten-normal", "P_νν = ½ on the hemisphere", 1e-9, || {
                    Ok((gcs.iter().map(|(_, v)| (v.p00 - 0.5).abs()).fold(0.0, f64::max), n))
                })?;
            }
        }
        None => rec.skip(
            "model-boundary-values",
            MODEL_ANCHOR,
            1e-9,
            "not applicable: model has no closed-form boundary values".into(),
        ),
    }
    Ok(())
}

fn weyl_boundary_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let pts = boundary_samples(patch, rec.cfg.points, rec.cfg.seed).map_err(eval_err("sampling"))?;
    let checks: [(&str, &'static str); 3] = [
        ("weyl-normal", "W_νiνj = P_ij − P^Σ_ij + H²/18 h_ij on umbilic boundaries"),
        ("weyl-mixed", "W_ijkν = 0 on umbilic boundaries"),
        ("weyl-norm", "|W_ijkl|² = 4|P − P^Σ + H²/18 h|² on umbilic boundaries"),
    ];
    let ids = match try_map(exec, pts.len(), |k| {
        BoundaryGeometry::at(patch, &pts[k], 3)?.weyl_identities(1e-9).map_err(|e| e.at(pts[k].coords))
    }) {
        Ok(v) => v,
        Err(e) => match precondition_reason(&e) {
            Some(reason) => {
                for (name, anchor) in checks {
                    rec.skip(name, anchor, 1e-8, reason.clone());
                }
                return Ok(());
            }
            None => return Err(eval_err("weyl-boundary")(e)),
        },
    };
    let n = ids.len();
    rec.run(checks[0].0, checks[0].1, 1e-8, || Ok((ids.iter().map(|i| i.weyl_normal).fold(0.0, f64::max), n)))?;
    rec.run(checks[1].0, checks[1].1, 1e-8, || Ok((ids.iter().map(|i| i.weyl_mixed).fold(0.0, f64::max), n)))?;
    rec.run(checks[2].0, checks[2].1, 1e-8, || {
        Ok((ids.iter().map(|i| i.norm_identity.max(i.norm_identity_weyl)).fold(0.0, f64::max), n))
    })?;
    Ok(())
}

/// Random conformal factors per check and their amplitude.
const CONFORMAL_FACTORS: usize = 10;
const CONFORMAL_INVARIANCE_FACTORS: usize = 5;
const CONFORMAL_AMPLITUDE: f64 = 0.2;
const CONFORMAL_POINTS: usize = 6;

fn conformal_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let m = rec.cfg.points.min(CONFORMAL_POINTS);
    let mut pts = interior_samples(patch, m, rec.cfg.seed).map_err(eval_err("sampling"))?;
    pts.extend(boundary_samples(patch, m, rec.cfg.seed).map_err(eval_err("sampling"))?);
    let ws: Vec<String> = (0..CONFORMAL_FACTORS as u64)
        .map(|k| random_conformal_factor(patch, rec.cfg.seed.wrapping_mul(1000) + k, CONFORMAL_AMPLITUDE))
        .collect();
    let laws = try_map(exec, ws.len(), |k| conformal_law_residuals(patch, &ws[k], &pts, None))
        .map_err(eval_err("conformal-laws"))?;
    let n = ws.len() * m;
    rec.run("bach-conformal-law", "B(e^{2w}g) = e^{−2w} B(g)", 1e-7, || {
        Ok((laws.iter().map(|l| l.bach).fold(0.0, f64::max), n))
    })?;
    rec.run("s-conformal-law", "S(e^{2w}g) = e^{−w} S(g)", 1e-7, || {
        Ok((laws.iter().map(|l| l.s).fold(0.0, f64::max), n))
    })?;
    // W_b is invariant node by node, so a coarser rule suffices here
    let rule = QuadratureRule::new(&patch.chart, (rec.cfg.quad / 2).max(4)).map_err(eval_err("weyl-b-invariance"))?;
    rec.run("weyl-b-invariance", "W_b is conformally invariant", 1e-6, || {
        let mut worst = 0.0f64;
        for w in &ws[..CONFORMAL_INVARIANCE_FACTORS] {
            let r = conformal_law_residuals(patch, w, &[], Some((&rule, exec)))?;
            worst = worst.max(r.weyl_b_relative.unwrap_or(f64::NAN));
        }
        Ok((worst, CONFORMAL_INVARIANCE_FACTORS))
    })?;
    Ok(())
}

/// Expansion checks need order-6 jets; they use at most this many points.
const FERMI_POINTS: usize = 10;

/// `h⁽ᵏ⁾ / h⁽⁰⁾` for the hemisphere (`cos² r`) and the ball (`(1 − r)²`).
fn model_fermi_ratios(name: &str) -> Option<[f64; 5]> {
    match name {
        "hemisphere" => Some([1.0, 0.0, -2.0, 0.0, 8.0]),
        "flat_ball" | "flat_ball_collar" => Some([1.0, -2.0, 2.0, 0.0, 0.0]),
        _ => None,
    }
}

fn fermi_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let order = rec.cfg.order.min(4);
    let m = rec.cfg.points.min(FERMI_POINTS);
    let pts = boundary_samples(patch, m, rec.cfg.seed).map_err(eval_err("sampling"))?;
    rec.run(
        "fermi-formula-vs-geodesic",
        "curvature formulas for h⁽⁰⁾…h⁽⁴⁾ against the geodesic normal exponential map",
        1e-7,
        || {
            sup(exec, &pts, |p| {
                let f = fermi_formula_coefficients(patch, p)?;
                let g = fermi_geodesic_expansion(patch, p, order)?;
                Ok(f.max_diff(&g))
            })
        },
    )?;
    rec.run("fermi-formula-vs-direct", "curvature formulas for h⁽ᵏ⁾ against the metric jets", 1e-7, || {
        sup(exec, &pts, |p| {
            let f = fermi_formula_coefficients(patch, p)?;
            let d = fermi_direct_coefficients(patch, p, order)?;
            Ok(f.max_diff(&d))
        })
    })?;
    rec.run(
        "fermi-christoffel",
        "Christoffel symbols at the origin of boundary normal coordinates",
        1e-9,
        || {
            sup(exec, &pts, |p| {
                let c = fermi_christoffel_check(patch, p)?;
                Ok(c.tangential.max(c.normal_l).max(c.mixed_l).max(c.gamma_0i0).max(c.gamma_000))
            })
        },
    )?;
    let interior = interior_samples(patch, m, rec.cfg.seed).map_err(eval_err("sampling"))?;
    rec.run(
        "h3-identity",
        "h⁽³⁾ = −4S for constant R and totally geodesic boundary",
        1e-9,
        || Ok((h3_identity_check(patch, &pts, &interior)?.residual, pts.len())),
    )?;
    const MODEL_ANCHOR: &str = "expansion coefficients of cos²(r) and (1 − r)² warps";
    match model_fermi_ratios(&patch.name) {
        Some(ratios) => rec.run("fermi-model-coefficients", MODEL_ANCHOR, 1e-6, || {
            sup(exec, &pts, |p| {
                let g = fermi_geodesic_expansion(patch, p, 4)?;
                let h0 = g.coeffs[0];
                Ok(g.coeffs
                    .iter()
                    .zip(ratios)
                    .map(|(c, r)| max_diff3(c, &tangential_schouten_target(r, &h0)))
                    .fold(0.0, f64::max))
            })
        })?,
        None => rec.skip(
            "fermi-model-coefficients",
            MODEL_ANCHOR,
            1e-6,
            "not applicable: model has no closed-form expansion".into(),
        ),
    }
    Ok(())
}

/// Relative agreement demanded of the built-in sign self-test.
pub const SELF_TEST_TOL: f64 = 1e-6;

/// First-variation check on a fixed umbilic model with a non-zero Bach
/// term. A sign error in `B`, `S` or the boundary orientation shows up here
/// as a relative mismatch of order `|∫Bv| / |∮Sv|` (a few percent).
pub fn convention_self_test(exec: Execution) -> Result<f64> {
    let patch = perturbed_flat(0.05, 7, Perturbation::Umbilic)?;
    let sigma = random_sigma(&patch, 3);
    let v = build_umbilic_variation(&patch, &as_refs(&sigma), 0.3, [[0.2, 0.8]; 3])?;
    let exec = match exec {
        Execution::Sequential => ExecutionTag::Sequential,
        Execution::Parallel => ExecutionTag::Parallel,
    };
    let r = first_variation_check(&patch, &v, &VariationOptions { n: 6, exec, ..Default::default() })?;
    Ok(r.relative)
}

pub fn as_refs(s: &[[String; 3]; 3]) -> [[&str; 3]; 3] {
    std::array::from_fn(|i| std::array::from_fn(|j| s[i][j].as_str()))
}

/// The variations used by the variation suite and subcommand: `count − 1`
/// boundary variations with random `vΣ`, then one interior variation.
pub fn standard_variations(patch: &MetricPatch, seed: u64, count: usize) -> Result<Vec<VariationField>> {
    let d = &patch.chart.domain;
    let mid = |a: usize| {
        let (lo, hi) = (d[a][0], d[a][1]);
        [lo + 0.2 * (hi - lo), lo + 0.8 * (hi - lo)]
    };
    let support = [mid(1), mid(2), mid(3)];
    let eps = 0.3 * (d[0][1] - d[0][0]).min(1.0);
    let mut out = Vec::with_capacity(count);
    for k in 0..count.saturating_sub(1) {
        let sigma = random_sigma(patch, seed.wrapping_add(k as u64));
        out.push(build_umbilic_variation(patch, &as_refs(&sigma), eps, support)?);
    }
    if count > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1a7e_5107);
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in i..4 {
                m[i][j] = rng.gen_range(-0.5..0.5);
                m[j][i] = m[i][j];
            }
        }
        out.push(interior_variation(patch, [mid(0), mid(1), mid(2), mid(3)], m)?);
    }
    Ok(out)
}

pub const VARIATION_COUNT: usize = 5;

fn variation_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    rec.run(
        "convention-self-test",
        "first variation of W_b on a fixed umbilic model",
        SELF_TEST_TOL,
        || Ok((convention_self_test(exec)?, 1)),
    )?;
    const LP: &str = "linearised umbilicity constraint on constructed variations";
    const D2: &str = "dW_b(v) = −∫B·v + ∮S·v";
    const D2_INT: &str = "dW_b(v) = −∫B·v for interior variations";
    let probes = boundary_samples(patch, 5, rec.cfg.seed).map_err(eval_err("sampling"))?;
    let umb = umbilicity_residual(patch, &probes).map_err(eval_err("variation"))?;
    if umb > 1e-9 {
        let reason = "precondition: umbilic boundary".to_string();
        rec.skip("variation-constraint", LP, LP_TOL, reason.clone());
        rec.skip("first-variation-boundary", D2, 1e-5, reason.clone());
        rec.skip("first-variation-interior", D2_INT, 1e-5, reason);
        return Ok(());
    }
    let vs = match standard_variations(patch, rec.cfg.seed, VARIATION_COUNT) {
        Ok(v) => v,
        Err(e) => {
            if let Some(reason) = precondition_reason(&e) {
                rec.skip("variation-constraint", LP, LP_TOL, reason.clone());
                rec.skip("first-variation-boundary", D2, 1e-5, reason.clone());
                rec.skip("first-variation-interior", D2_INT, 1e-5, reason);
                return Ok(());
            }
            return Err(eval_err("variation-constraint")(e));
        }
    };
    let boundary: Vec<&VariationField> = vs.iter().filter(|v| !v.is_interior()).collect();
    rec.run("variation-constraint", LP, LP_TOL, || {
        let mut worst = 0.0f64;
        for v in &boundary {
            let faces: Vec<PointSample> = (0..5)
                .map(|k| {
                    let s = 0.1 + 0.2 * k as f64;
                    let t: [f64; 3] =
                        std::array::from_fn(|a| v.support[a + 1][0] + s * (v.support[a + 1][1] - v.support[a + 1][0]));
                    PointSample::boundary(&patch.chart, t)
                })
                .collect::<Result<_>>()?;
            for p in &faces {
                worst = worst.max(lp_residual(patch, v, p)?);
            }
        }
        Ok((worst, 5 * boundary.len()))
    })?;
    let opts = VariationOptions {
        exec: rec.cfg.exec,
        ..Default::default()
    };
    let spd = |v: &VariationField| crate::functionals::check_variation_spd(patch, v, 2.0 * opts.t_step, opts.n);
    rec.run("first-variation-boundary", D2, 1e-5, || {
        let mut worst = 0.0f64;
        for v in &boundary {
            spd(v)?;
            worst = worst.max(first_variation_check(patch, v, &opts)?.relative);
        }
        Ok((worst, boundary.len()))
    })?;
    rec.run("first-variation-interior", D2_INT, 1e-5, || {
        let mut worst = 0.0f64;
        let mut n = 0;
        for v in vs.iter().filter(|v| v.is_interior()) {
            spd(v)?;
            worst = worst.max(first_variation_check(patch, v, &opts)?.relative);
            n += 1;
        }
        Ok((worst, n))
    })?;
    Ok(())
}

/// Closed-form functional values of the model cases.
pub fn closed_form_targets(name: &str) -> Option<Vec<(&'static str, f64)>> {
    let pi2 = PI * PI;
    match name {
        "hemisphere" => Some(vec![
            ("volume", 4.0 * pi2 / 3.0),
            ("e_b", 16.0 * pi2),
            ("yamabe_quotient", hemisphere_yamabe()),
        ]),
        "flat_ball" => Some(vec![
            ("volume", pi2 / 2.0),
            ("e_b", 12.0 * pi2),
            ("yamabe_quotient", 12.0 * pi2 / (pi2 / 2.0).sqrt()),
        ]),
        "flat_half" => Some(vec![
            ("volume", 1.0),
            ("e_b", 0.0),
            ("weyl", 0.0),
            ("weyl_b", 0.0),
        ]),
        _ => None,
    }
}

fn functional_suite(patch: &MetricPatch, rec: &mut Recorder) -> SuiteResult {
    let exec: Execution = rec.cfg.exec.into();
    let n = rec.cfg.quad;
    let fine = QuadratureRule::new(&patch.chart, n)
        .and_then(|r| evaluate(patch, &r, exec))
        .map_err(eval_err("functionals"))?;
    let coarse = QuadratureRule::new(&patch.chart, n / 2)
        .and_then(|r| evaluate(patch, &r, exec))
        .map_err(eval_err("functionals"))?;
    rec.run("quadrature-doubling", "functional values stable under doubling the rule", 1e-7, || {
        let scale = fine.named().iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
        let worst = fine
            .named()
            .iter()
            .zip(coarse.named())
            .map(|((_, a), (_, b))| (a - b).abs() / a.abs().max(1e-6 * scale).max(1e-300))
            .fold(0.0, f64::max);
        Ok((worst, fine.named().len()))
    })?;
    const TARGETS: &str = "closed-form volume, E_b and Yamabe quotient of the model cases";
    match closed_form_targets(&patch.name) {
        Some(targets) => rec.run("closed-form-targets", TARGETS, 1e-4, || {
            let vals = fine.named();
            let worst = targets
                .iter()
                .map(|(k, t)| {
                    let v = vals.iter().find(|(n, _)| n == k).map(|(_, v)| *v).unwrap_or(f64::NAN);
                    if *t == 0.0 { v.abs() } else { rel(v, *t) }
                })
                .fold(0.0, f64::max);
            Ok((worst, targets.len()))
        })?,
        None => rec.skip("closed-form-targets", TARGETS, 1e-4, "not applicable: no closed form".into()),
    }
    let pts = boundary_samples(patch, 5, rec.cfg.seed).map_err(eval_err("sampling"))?;
    let umb = umbilicity_residual(patch, &pts).map_err(eval_err("weyl-b-equals-weyl"))?;
    const WB: &str = "W_b = W on umbilic boundaries";
    if umb <= 1e-9 {
        rec.run("weyl-b-equals-weyl", WB, 1e-10, || Ok(((fine.weyl_b - fine.weyl).abs(), 1)))?;
    } else {
        rec.skip("weyl-b-equals-weyl", WB, 1e-10, "precondition: umbilic boundary".into());
    }
    Ok(())
}
