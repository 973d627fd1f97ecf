//! Built-in model geometries with known boundary data. Every model puts the
//! boundary on the face `x⁰ = 0` with `x⁰` increasing inward; all but the
//! perturbed, sheared, stereographic and conformal models are in normal
//! form `dr² + h(r, x)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::expr::parse_expr;
use crate::metric::{Chart, ConformalField, MetricPatch, PolynomialField};

/// Margin keeping hyperspherical charts away from their coordinate seams.
pub const SEAM_MARGIN: f64 = 1e-3;

const S3_ANGLES: [[f64; 2]; 3] = [
    [SEAM_MARGIN, PI - SEAM_MARGIN],
    [SEAM_MARGIN, PI - SEAM_MARGIN],
    [0.0, 2.0 * PI],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    /// Arbitrary polynomial; the boundary is not umbilic.
    Generic,
    /// Polynomial divisible by `(x⁰)²`; the boundary is totally geodesic.
    Umbilic,
}

/// Model name plus parameters, as addressed from the CLI or a metric file.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub model: String,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
}

impl ModelSpec {
    pub fn named(model: &str) -> Self {
        Self {
            model: model.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| GeomError::InvalidParameter(format!("{key} must be a number"))),
        }
    }

    fn text(&self, key: &str) -> Result<Option<String>> {
        match self.params.get(key) {
            None => Ok(None),
            Some(serde_json::Value::String(s)) => Ok(Some(s.clone())),
            // numeric literals are valid expressions too
            Some(serde_json::Value::Number(n)) => Ok(Some(n.to_string())),
            Some(_) => Err(GeomError::InvalidParameter(format!("{key} must be a string"))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.params.get(key) {
            None => Ok(false),
            Some(serde_json::Value::Bool(b)) => Ok(*b),
            Some(v) => v
                .as_f64()
                .map(|x| x != 0.0)
                .ok_or_else(|| GeomError::InvalidParameter(format!("{key} must be a boolean"))),
        }
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        match self.params.keys().find(|k| !allowed.contains(&k.as_str())) {
            Some(k) => Err(GeomError::InvalidParameter(format!(
                "model {} has no parameter {k} (allowed: {})",
                self.model,
                allowed.join(", ")
            ))),
            None => Ok(()),
        }
    }
}

pub struct ModelInfo {
    pub name: &'static str,
    pub summary: &'static str,
    pub params: &'static str,
}

pub const CATALOG: &[ModelInfo] = &[
    ModelInfo {
        name: "flat_half",
        summary: "identity metric on [0,1]^4",
        params: "",
    },
    ModelInfo {
        name: "flat_ball_collar",
        summary: "dr^2 + (1-r)^2 g_S3, r in [0, 1/2]; L = h, H = 3",
        params: "full_ball (bool): extend r to the centre",
    },
    ModelInfo {
        name: "hemisphere",
        summary: "dr^2 + cos^2(r) g_S3, r in [0, pi/2); R = 12, totally geodesic",
        params: "",
    },
    ModelInfo {
        name: "warped_umbilic",
        summary: "dr^2 + exp(2 psi) k(x); umbilic with L = -psi_r h",
        params: "psi (expr in r,a,b,c), k11..k33 (exprs in a,b,c), totally_geodesic (bool)",
    },
    ModelInfo {
        name: "perturbed_flat",
        summary: "delta + eps Q(x), Q a seeded random symmetric cubic",
        params: "eps (default 0.05), seed (default 7), mode (generic | umbilic)",
    },
    ModelInfo {
        name: "product_s2_flat",
        summary: "dr^2 + cos^2(r) da^2 + db^2 + dc^2 = S^2 x R^2; R = 2, totally geodesic, W != 0",
        params: "",
    },
    ModelInfo {
        name: "sheared_flat",
        summary: "constant non-diagonal flat metric (not in normal form)",
        params: "",
    },
    ModelInfo {
        name: "hemisphere_stereographic",
        summary: "4|dx|^2/(1+|x|^2)^2 on x0 >= 0 (not in normal form)",
        params: "",
    },
    ModelInfo {
        name: "conformal",
        summary: "exp(2w) times another model",
        params: "base (model name), w (expr in the base coordinates)",
    },
];

fn s3_metric(f: &str) -> [[String; 4]; 4] {
    let z = || "0".to_string();
    [
        ["1".into(), z(), z(), z()],
        [z(), f.to_string(), z(), z()],
        [z(), z(), format!("{f}*sin(a)^2"), z()],
        [z(), z(), z(), format!("{f}*sin(a)^2*sin(b)^2")],
    ]
}

fn from_owned(name: &str, chart: Chart, g: &[[String; 4]; 4]) -> Result<MetricPatch> {
    let refs: [[&str; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| g[i][j].as_str()));
    MetricPatch::from_strings(name, chart, &refs)
}

pub fn flat_half() -> Result<MetricPatch> {
    let chart = Chart::new(["x0", "x1", "x2", "x3"], [[0.0, 1.0]; 4])?;
    let g: [[String; 4]; 4] =
        std::array::from_fn(|i| std::array::from_fn(|j| if i == j { "1".into() } else { "0".into() }));
    from_owned("flat_half", chart, &g)
}

/// Polar collar of the unit ball; with `full_ball` the chart reaches to
/// within [`SEAM_MARGIN`] of the centre.
pub fn flat_ball_collar(full_ball: bool) -> Result<MetricPatch> {
    let rmax = if full_ball { 1.0 - SEAM_MARGIN } else { 0.5 };
    let chart = Chart::new(
        ["r", "a", "b", "c"],
        [[0.0, rmax], S3_ANGLES[0], S3_ANGLES[1], S3_ANGLES[2]],
    )?;
    let name = if full_ball { "flat_ball" } else { "flat_ball_collar" };
    Ok(from_owned(name, chart, &s3_metric("(1-r)^2"))?.with_params([("full_ball".to_string(), full_ball as u8 as f64)]))
}

pub fn hemisphere() -> Result<MetricPatch> {
    let chart = Chart::new(
        ["r", "a", "b", "c"],
        [[0.0, FRAC_PI_2 - SEAM_MARGIN], S3_ANGLES[0], S3_ANGLES[1], S3_ANGLES[2]],
    )?;
    from_owned("hemisphere", chart, &s3_metric("cos(r)^2"))
}

pub const WARPED_PSI: &str = "0.2*a*b - 0.4*r + 0.3*r^2*(1 + 0.5*a) + 0.2*r*b";
pub const WARPED_PSI_GEODESIC: &str = "0.2*a*b + 0.3*r^2*(1 + 0.5*a) - 0.2*r^3*c";
pub const WARPED_K: [[&str; 3]; 3] = [
    ["1 + 0.3*b*c", "0.2*a", "0"],
    ["0.2*a", "1 + 0.2*c^2", "0.1*a*b"],
    ["0", "0.1*a*b", "1 + 0.25*a^2"],
];

/// `dr² + e^{2ψ(r,x)} k(x)` on `[0, ½] × [0, 1]³`.
pub fn warped_umbilic(psi: &str, k: &[[&str; 3]; 3]) -> Result<MetricPatch> {
    let chart = Chart::new(["r", "a", "b", "c"], [[0.0, 0.5], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]])?;
    let names: Vec<String> = chart.coords.to_vec();
    parse_expr(psi, &names)?;
    for (i, row) in k.iter().enumerate() {
        for (j, kij) in row.iter().enumerate() {
            if parse_expr(kij, &names)?.uses_axis(0) {
                return Err(GeomError::InvalidParameter(format!("k[{}][{}] must not depend on r", i + 1, j + 1)));
            }
        }
    }
    let z = || "0".to_string();
    let g: [[String; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| match (i, j) {
            (0, 0) => "1".to_string(),
            (0, _) | (_, 0) => z(),
            _ => format!("exp(2*({psi}))*({})", k[i - 1][j - 1]),
        })
    });
    from_owned("warped_umbilic", chart, &g)
}

pub fn warped_default(totally_geodesic: bool) -> Result<MetricPatch> {
    let psi = if totally_geodesic { WARPED_PSI_GEODESIC } else { WARPED_PSI };
    let mut p = warped_umbilic(psi, &WARPED_K)?;
    if totally_geodesic {
        p.name = "warped_geodesic".into();
    }
    Ok(p)
}

pub const COEFF_RANGE: f64 = 0.5;

/// `δ + ε Q(x)` on `[0, 1]⁴`. Coefficients of `Q` are uniform in
/// `[−COEFF_RANGE, COEFF_RANGE]`, one per monomial of degree ≤ 3 and component; in umbilic
/// mode `Q = (x⁰)² Q₁` with `Q₁` affine.
pub fn perturbed_flat(eps: f64, seed: u64, mode: Perturbation) -> Result<MetricPatch> {
    if !eps.is_finite() {
        return Err(GeomError::InvalidParameter("eps must be finite".into()));
    }
    let chart = Chart::new(["x0", "x1", "x2", "x3"], [[0.0, 1.0]; 4])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_degree = match mode {
        Perturbation::Generic => 3,
        Perturbation::Umbilic => 1,
    };
    let mut terms = vec![([0u8; 4], identity())];
    for e0 in 0..=max_degree {
        for e1 in 0..=max_degree - e0 {
            for e2 in 0..=max_degree - e0 - e1 {
                for e3 in 0..=max_degree - e0 - e1 - e2 {
                    let mut c = [[0.0; 4]; 4];
                    for i in 0..4 {
                        for j in i..4 {
                            let v = eps * rng.gen_range(-COEFF_RANGE..COEFF_RANGE);
                            c[i][j] = v;
                            c[j][i] = v;
                        }
                    }
                    let mut e = [e0 as u8, e1 as u8, e2 as u8, e3 as u8];
                    if mode == Perturbation::Umbilic {
                        e[0] += 2;
                    }
                    terms.push((e, c));
                }
            }
        }
    }
    let field = PolynomialField { terms };
    let patch = MetricPatch::from_field("perturbed_flat", chart, Arc::new(field)).with_params([
        ("eps".to_string(), eps),
        ("seed".to_string(), seed as f64),
        ("umbilic".to_string(), (mode == Perturbation::Umbilic) as u8 as f64),
    ]);
    check_on_grid(&patch, 5)?;
    Ok(patch)
}

fn identity() -> [[f64; 4]; 4] {
    std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }))
}

/// SPD check of the metric values on a `(m+1)⁴` grid including the faces.
pub fn check_on_grid(patch: &MetricPatch, m: usize) -> Result<()> {
    let d = &patch.chart.domain;
    let t = |k: usize| k as f64 / m as f64;
    for i in 0..=m {
        for j in 0..=m {
            for k in 0..=m {
                for l in 0..=m {
                    let s = [t(i), t(j), t(k), t(l)];
                    let x: [f64; 4] = std::array::from_fn(|a| d[a][0] + s[a] * (d[a][1] - d[a][0]));
                    crate::metric::metric_jets(patch, &x, 0, [false; 4])?;
                }
            }
        }
    }
    Ok(())
}

/// `S² × R²` written as `dr² + cos²r da² + db² + dc²`.
pub fn product_s2_flat() -> Result<MetricPatch> {
    let chart = Chart::new(["r", "a", "b", "c"], [[0.0, 1.2], [0.0, 2.0 * PI], [0.0, 1.0], [0.0, 1.0]])?;
    MetricPatch::from_strings(
        "product_s2_flat",
        chart,
        &[
            ["1", "0", "0", "0"],
            ["0", "cos(r)^2", "0", "0"],
            ["0", "0", "1", "0"],
            ["0", "0", "0", "1"],
        ],
    )
}

/// Euclidean metric pulled back by a fixed linear map preserving `x⁰ = 0`.
pub fn sheared_flat() -> Result<MetricPatch> {
    let chart = Chart::new(["x0", "x1", "x2", "x3"], [[0.0, 1.0]; 4])?;
    // g = MᵀM
    let m = [[1.0, 0.0, 0.0, 0.0], [0.3, 1.0, 0.0, 0.0], [0.2, -0.1, 1.2, 0.0], [0.1, 0.4, 0.0, 0.9]];
    let g: [[String; 4]; 4] = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let v: f64 = (0..4).map(|k| m[k][i] * m[k][j]).sum();
            format!("{v:?}")
        })
    });
    from_owned("sheared_flat", chart, &g)
}

/// Stereographic image of the hemisphere: the half-space `x⁰ ≥ 0` with the
/// round metric `4|dx|²/(1+|x|²)²`.
pub fn hemisphere_stereographic() -> Result<MetricPatch> {
    let chart = Chart::new(["x0", "x1", "x2", "x3"], [[0.0, 1.0], [-1.0, 1.0], [-1.0, 1.0], [-1.0, 1.0]])?;
    let f = "4/(1 + x0^2 + x1^2 + x2^2 + x3^2)^2";
    let g: [[String; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { f.into() } else { "0".into() }));
    from_owned("hemisphere_stereographic", chart, &g)
}

/// `e^{2w} g`. Jets stay exact: the factor is expanded as a jet and
/// multiplied into the base jets.
pub fn conformal(base: &MetricPatch, w: &str) -> Result<MetricPatch> {
    let names: Vec<String> = base.chart.coords.to_vec();
    let w = parse_expr(w, &names)?;
    let mut params = base.params.clone();
    params.insert("conformal".into(), 1.0);
    Ok(MetricPatch {
        name: format!("conformal({})", base.name),
        chart: base.chart.clone(),
        field: Arc::new(ConformalField {
            base: Arc::clone(&base.field),
            w,
        }),
        exprs: None,
        params,
    })
}

pub fn builtin_model(spec: &ModelSpec) -> Result<MetricPatch> {
    match spec.model.as_str() {
        "flat_half" => {
            spec.check_keys(&[])?;
            flat_half()
        }
        "flat_ball_collar" | "flat_ball" => {
            spec.check_keys(&["full_ball"])?;
            flat_ball_collar(spec.model == "flat_ball" || spec.flag("full_ball")?)
        }
        "hemisphere" => {
            spec.check_keys(&[])?;
            hemisphere()
        }
        "warped_umbilic" => {
            let keys = [
                "psi",
                "totally_geodesic",
                "k11",
                "k12",
                "k13",
                "k22",
                "k23",
                "k33",
            ];
            spec.check_keys(&keys)?;
            let tg = spec.flag("totally_geodesic")?;
            let psi = spec
                .text("psi")?
                .unwrap_or_else(|| if tg { WARPED_PSI_GEODESIC } else { WARPED_PSI }.to_string());
            let mut k: [[String; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| WARPED_K[i][j].to_string()));
            for i in 0..3 {
                for j in i..3 {
                    if let Some(e) = spec.text(&format!("k{}{}", i + 1, j + 1))? {
                        k[i][j] = e.clone();
                        k[j][i] = e;
                    }
                }
            }
            let kr: [[&str; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| k[i][j].as_str()));
            warped_umbilic(&psi, &kr)
        }
        "perturbed_flat" => {
            spec.check_keys(&["eps", "seed", "mode"])?;
            let seed = spec.real("seed", 7.0)?;
            if seed < 0.0 || seed.fract() != 0.0 {
                return Err(GeomError::InvalidParameter("seed must be a non-negative integer".into()));
            }
            let mode = match spec.text("mode")?.as_deref() {
                None | Some("generic") => Perturbation::Generic,
                Some("umbilic") => Perturbation::Umbilic,
                Some(m) => return Err(GeomError::InvalidParameter(format!("unknown perturbation mode {m}"))),
            };
            perturbed_flat(spec.real("eps", 0.05)?, seed as u64, mode)
        }
        "product_s2_flat" => {
            spec.check_keys(&[])?;
            product_s2_flat()
        }
        "sheared_flat" => {
            spec.check_keys(&[])?;
            sheared_flat()
        }
        "hemisphere_stereographic" => {
            spec.check_keys(&[])?;
            hemisphere_stereographic()
        }
        "conformal" => {
            spec.check_keys(&["base", "w"])?;
            let base = spec.text("base")?.unwrap_or_else(|| "hemisphere".into());
            if base == "conformal" {
                return Err(GeomError::InvalidParameter("conformal base must be a plain model".into()));
            }
            let w = spec.text("w")?.unwrap_or_else(|| "0".into());
            conformal(&builtin_model(&ModelSpec::named(&base))?, &w)
        }
        other => Err(GeomError::UnknownModel(other.to_string())),
    }
}

/// The models every suite runs over by default.
pub fn catalog_models() -> Result<Vec<MetricPatch>> {
    Ok(vec![
        flat_half()?,
        flat_ball_collar(false)?,
        hemisphere()?,
        warped_default(false)?,
        warped_default(true)?,
        perturbed_flat(0.05, 7, Perturbation::Generic)?,
        perturbed_flat(0.05, 7, Perturbation::Umbilic)?,
        product_s2_flat()?,
        sheared_flat()?,
        hemisphere_stereographic()?,
        conformal(&hemisphere()?, "0.1*sin(r) + 0.05*cos(r)*cos(a)")?,
    ])
}
