//! Charts with a boundary face, metric patches and jet evaluation of the
//! metric components.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeomError, Result};
use crate::expr::{parse_expr, seed_jets, ActiveAxes, Expr, ALL_AXES};
use crate::jet::{binomial, Jet, MAX_DIM, MAX_ORDER};
use crate::linalg;
use crate::tensor::{JetTensor, Tensor};

/// Coordinate chart: four named coordinates on a box, with the boundary on
/// the lower face of axis 0 (which increases inward).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub coords: [String; MAX_DIM],
    pub domain: [[f64; 2]; MAX_DIM],
}

impl Chart {
    pub fn new(coords: [&str; MAX_DIM], domain: [[f64; 2]; MAX_DIM]) -> Result<Self> {
        let coords = coords.map(str::to_string);
        Self::from_parts(coords, domain)
    }

    pub fn from_parts(coords: [String; MAX_DIM], domain: [[f64; 2]; MAX_DIM]) -> Result<Self> {
        for (a, [lo, hi]) in domain.iter().enumerate() {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(GeomError::InvalidMetric(format!(
                    "empty or non-finite interval on axis {a}"
                )));
            }
        }
        if domain[0][0] != 0.0 {
            return Err(GeomError::InvalidMetric(
                "the boundary face x0 = 0 must be the lower edge of axis 0".into(),
            ));
        }
        for (i, c) in coords.iter().enumerate() {
            let valid = c.chars().next().is_some_and(|ch| ch.is_ascii_alphabetic() || ch == '_')
                && c.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_');
            if !valid || c == "pi" || coords[..i].contains(c) {
                return Err(GeomError::InvalidMetric(format!("bad coordinate name \"{c}\"")));
            }
        }
        Ok(Self { coords, domain })
    }

    pub fn contains(&self, x: &[f64; MAX_DIM]) -> bool {
        self.domain.iter().zip(x).all(|([lo, hi], v)| {
            let slack = 1e-12 * (hi - lo);
            *v >= lo - slack && *v <= hi + slack
        })
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.domain[axis][1] - self.domain[axis][0]
    }

    /// Point at fractional position `s ∈ [0,1]^4` of the domain box.
    pub fn lerp(&self, s: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        std::array::from_fn(|a| self.domain[a][0] + s[a] * self.width(a))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSample {
    pub coords: [f64; MAX_DIM],
    pub is_boundary: bool,
}

impl PointSample {
    pub fn new(chart: &Chart, coords: [f64; MAX_DIM]) -> Result<Self> {
        if !chart.contains(&coords) {
            return Err(GeomError::OutOfDomain { point: coords });
        }
        Ok(Self {
            coords,
            is_boundary: coords[0] == 0.0,
        })
    }

    pub fn boundary(chart: &Chart, tangential: [f64; 3]) -> Result<Self> {
        Self::new(chart, [0.0, tangential[0], tangential[1], tangential[2]])
    }
}

/// Anything that yields jets of a symmetric 4×4 tensor field.
pub trait TensorField: Send + Sync + fmt::Debug {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor>;

    fn values(&self, x: &[f64; MAX_DIM]) -> Result<[[f64; 4]; 4]> {
        let t = self.jets(x, 0, [false; MAX_DIM])?;
        Ok(std::array::from_fn(|i| std::array::from_fn(|j| t[[i, j]].value())))
    }
}

pub type ComponentExprs = [[Expr; MAX_DIM]; MAX_DIM];

#[derive(Debug, Clone)]
pub struct ExprField {
    pub comps: Arc<ComponentExprs>,
}

fn symmetric_from_upper(mut upper: Vec<Jet>) -> JetTensor {
    // `upper` holds (i, j) with i <= j in row order
    let mut slots: Vec<Option<Jet>> = upper.drain(..).map(Some).collect();
    let pos = |i: usize, j: usize| {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        i * MAX_DIM - i * (i + 1) / 2 + j
    };
    Tensor::from_fn(MAX_DIM, 2, |k| {
        let p = pos(k[0], k[1]);
        if k[0] <= k[1] {
            slots[p].take().expect("upper entry used once")
        } else {
            Jet::constant_unchecked(0.0, 1, 0)
        }
    })
    .mirror_lower()
}

impl Tensor<Jet> {
    fn mirror_lower(mut self) -> JetTensor {
        for i in 0..MAX_DIM {
            for j in 0..i {
                self[[i, j]] = self[[j, i]].clone();
            }
        }
        self
    }
}

impl TensorField for ExprField {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor> {
        let seeds = seed_jets(x, order, active)?;
        let mut upper = Vec::with_capacity(10);
        for i in 0..MAX_DIM {
            for j in i..MAX_DIM {
                upper.push(self.comps[i][j].eval_with(&seeds)?);
            }
        }
        Ok(symmetric_from_upper(upper))
    }

    fn values(&self, x: &[f64; MAX_DIM]) -> Result<[[f64; 4]; 4]> {
        let mut out = [[0.0; 4]; 4];
        for i in 0..MAX_DIM {
            for j in i..MAX_DIM {
                let v = self.comps[i][j].eval(x)?;
                out[i][j] = v;
                out[j][i] = v;
            }
        }
        Ok(out)
    }
}

/// `e^{2w} · base`.
#[derive(Debug, Clone)]
pub struct ConformalField {
    pub base: Arc<dyn TensorField>,
    pub w: Expr,
}

impl TensorField for ConformalField {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor> {
        let factor = self.w.eval_jet(x, order, active)?.scale(2.0).exp();
        Ok(self.base.jets(x, order, active)?.map(|c| &factor * c))
    }
}

/// `base + t · field`.
#[derive(Debug, Clone)]
pub struct SumField {
    pub base: Arc<dyn TensorField>,
    pub field: Arc<dyn TensorField>,
    pub t: f64,
}

impl TensorField for SumField {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor> {
        let mut g = self.base.jets(x, order, active)?;
        if self.t != 0.0 {
            let v = self.field.jets(x, order, active)?;
            for i in 0..MAX_DIM {
                for j in 0..MAX_DIM {
                    g[[i, j]].axpy(self.t, &v[[i, j]]);
                }
            }
        }
        Ok(g)
    }
}

/// `Σ_α c_α x^α` with symmetric 4×4 coefficient matrices; jets are the exact
/// Taylor coefficients, computed monomial by monomial.
#[derive(Debug, Clone)]
pub struct PolynomialField {
    pub terms: Vec<([u8; MAX_DIM], [[f64; 4]; 4])>,
}

impl PolynomialField {
    /// Sup of `|coefficient|` times the largest monomial value on `domain`.
    pub fn bound(&self, domain: &[[f64; 2]; MAX_DIM]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let m: f64 = (0..MAX_DIM)
                    .map(|a| domain[a][0].abs().max(domain[a][1].abs()).powi(e[a] as i32))
                    .product();
                m * c.iter().flatten().fold(0.0f64, |x, y| x.max(y.abs()))
            })
            .sum()
    }
}

impl TensorField for PolynomialField {
    fn jets(&self, x: &[f64; MAX_DIM], order: usize, active: ActiveAxes) -> Result<JetTensor> {
        let proto = Jet::constant(0.0, MAX_DIM, order)?;
        let indices = proto.indices();
        let mut coeffs = vec![[[0.0; 4]; 4]; indices.len()];
        for (e, c) in &self.terms {
            for (slot, beta) in coeffs.iter_mut().zip(indices) {
                let mut f = 1.0;
                for a in 0..MAX_DIM {
                    let (ea, ba) = (e[a] as usize, beta.0[a] as usize);
                    if ba > ea || (ba > 0 && !active[a]) {
                        f = 0.0;
                        break;
                    }
                    f *= binomial(ea, ba) * x[a].powi((ea - ba) as i32);
                }
                if f == 0.0 {
                    continue;
                }
                for i in 0..4 {
                    for j in i..4 {
                        slot[i][j] += f * c[i][j];
                    }
                }
            }
        }
        Ok(Tensor::from_fn(MAX_DIM, 2, |k| {
            let (i, j) = (k[0].min(k[1]), k[0].max(k[1]));
            let v = coeffs.iter().map(|m| m[i][j]).collect();
            Jet::from_coeffs(MAX_DIM, order, v).expect("shape checked above")
        }))
    }
}

/// A chart together with metric components.
#[derive(Debug, Clone)]
pub struct MetricPatch {
    pub name: String,
    pub chart: Chart,
    pub field: Arc<dyn TensorField>,
    /// Component expressions when the metric is expression-defined.
    pub exprs: Option<Arc<ComponentExprs>>,
    pub params: BTreeMap<String, f64>,
}

impl MetricPatch {
    pub fn from_exprs(name: impl Into<String>, chart: Chart, comps: ComponentExprs) -> Result<Self> {
        for i in 0..MAX_DIM {
            for j in 0..i {
                if comps[i][j] != comps[j][i] {
                    return Err(GeomError::InvalidMetric(format!(
                        "components g[{i}][{j}] and g[{j}][{i}] differ"
                    )));
                }
            }
        }
        let comps = Arc::new(comps);
        Ok(Self {
            name: name.into(),
            chart,
            field: Arc::new(ExprField {
                comps: Arc::clone(&comps),
            }),
            exprs: Some(comps),
            params: BTreeMap::new(),
        })
    }

    /// Parse component strings against the chart's coordinate names.
    pub fn from_strings(name: impl Into<String>, chart: Chart, g: &[[&str; 4]; 4]) -> Result<Self> {
        let comps = parse_components(&chart, |i, j| g[i][j].to_string())?;
        Self::from_exprs(name, chart, comps)
    }

    pub fn from_field(name: impl Into<String>, chart: Chart, field: Arc<dyn TensorField>) -> Self {
        Self {
            name: name.into(),
            chart,
            field,
            exprs: None,
            params: BTreeMap::new(),
        }
    }

    pub fn with_params(mut self, params: impl IntoIterator<Item = (String, f64)>) -> Self {
        self.params.extend(params);
        self
    }

    pub fn point(&self, coords: [f64; MAX_DIM]) -> Result<PointSample> {
        PointSample::new(&self.chart, coords)
    }

    /// Metric value matrix with the SPD check.
    pub fn value_at(&self, x: &[f64; MAX_DIM]) -> Result<[[f64; 4]; 4]> {
        let g = self.field.values(x)?;
        check_spd(&g, x)?;
        Ok(g)
    }
}

fn parse_components(chart: &Chart, src: impl Fn(usize, usize) -> String) -> Result<ComponentExprs> {
    let mut out: Vec<Expr> = Vec::with_capacity(16);
    for i in 0..MAX_DIM {
        for j in 0..MAX_DIM {
            out.push(parse_expr(&src(i, j), &chart.coords)?);
        }
    }
    let mut it = out.into_iter();
    Ok(std::array::from_fn(|_| std::array::from_fn(|_| it.next().unwrap())))
}

fn check_spd(g: &[[f64; 4]; 4], x: &[f64; MAX_DIM]) -> Result<()> {
    if g.iter().flatten().all(|v| v.is_finite()) && linalg::cholesky(g).is_some() {
        return Ok(());
    }
    Err(GeomError::NonPositiveDefinite {
        point: *x,
        eigenvalues: linalg::symmetric_eigenvalues(g).to_vec(),
    })
}

/// Metric component jets at `point`, seeded on every axis.
pub fn metric_at(patch: &MetricPatch, point: &PointSample, order: usize) -> Result<JetTensor> {
    metric_jets(patch, &point.coords, order, ALL_AXES)
}

pub fn metric_jets(
    patch: &MetricPatch,
    x: &[f64; MAX_DIM],
    order: usize,
    active: ActiveAxes,
) -> Result<JetTensor> {
    if order > MAX_ORDER {
        return Err(crate::jet::JetError::OrderOutOfRange(order).into());
    }
    if !patch.chart.contains(x) {
        return Err(GeomError::OutOfDomain { point: *x });
    }
    let g = patch.field.jets(x, order, active)?;
    let values: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| g[[i, j]].value()));
    check_spd(&values, x)?;
    Ok(g)
}

/// Jet-valued inverse of a square jet matrix by Gauss–Jordan elimination.
/// Pivots are taken on the diagonal, which is safe for SPD value parts.
pub fn invert_metric(g: &JetTensor) -> Result<JetTensor> {
    let n = g.n();
    let order = g.order();
    let dim = g.data()[0].dim();
    let mut a: Vec<Vec<Jet>> = (0..n).map(|i| (0..n).map(|j| g[[i, j]].truncate(order)).collect()).collect();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Jet::constant_unchecked(if i == j { 1.0 } else { 0.0 }, dim, order))
                .collect()
        })
        .collect();
    for k in 0..n {
        let p = a[k][k].recip().map_err(|_| GeomError::Singular("metric inversion"))?;
        for j in 0..n {
            a[k][j] = &a[k][j] * &p;
            inv[k][j] = &inv[k][j] * &p;
        }
        for r in 0..n {
            if r == k || a[r][k].max_abs() == 0.0 {
                continue;
            }
            let f = a[r][k].clone();
            for j in 0..n {
                let (ak, ik) = (a[k][j].clone(), inv[k][j].clone());
                a[r][j].fma_product(-1.0, &f, &ak);
                inv[r][j].fma_product(-1.0, &f, &ik);
            }
        }
    }
    let mut out = Tensor::from_fn(n, 2, |i| inv[i[0]][i[1]].clone());
    // symmetrize away roundoff asymmetry
    for i in 0..n {
        for j in 0..i {
            let mut s = out[[i, j]].clone();
            s.axpy(1.0, &out[[j, i]]);
            let s = s.scale(0.5);
            out[[i, j]] = s.clone();
            out[[j, i]] = s;
        }
    }
    Ok(out)
}

/// User-supplied metric definition document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricDefinition {
    pub name: String,
    pub coords: Vec<String>,
    pub domain: Vec<[f64; 2]>,
    pub g: Vec<Vec<String>>,
    #[serde(default)]
    pub boundary_axis: usize,
}

impl MetricDefinition {
    pub fn into_patch(self) -> Result<MetricPatch> {
        let bad = |m: &str| GeomError::InvalidMetric(m.to_string());
        if self.boundary_axis != 0 {
            return Err(bad("boundary_axis must be 0"));
        }
        let coords: [String; 4] = self
            .coords
            .clone()
            .try_into()
            .map_err(|_| bad("exactly four coordinate names are required"))?;
        let domain: [[f64; 2]; 4] = self
            .domain
            .clone()
            .try_into()
            .map_err(|_| bad("exactly four domain intervals are required"))?;
        if self.g.len() != 4 || self.g.iter().any(|r| r.len() != 4) {
            return Err(bad("g must be a 4x4 array"));
        }
        let chart = Chart::from_parts(coords, domain)?;
        let comps = parse_components(&chart, |i, j| self.g[i][j].clone())?;
        MetricPatch::from_exprs(self.name, chart, comps)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jet::MultiIndex;

    fn flat() -> MetricPatch {
        let chart = Chart::new(["x", "y", "z", "w"], [[0.0, 1.0]; 4]).unwrap();
        let g: [[&str; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { "1" } else { "0" }));
        MetricPatch::from_strings("flat", chart, &g).unwrap()
    }

    #[test]
    fn flat_metric_is_identity() {
        let p = flat();
        let g = metric_at(&p, &p.point([0.3, 0.2, 0.1, 0.9]).unwrap(), 3).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g[[i, j]].value(), if i == j { 1.0 } else { 0.0 });
                assert!(g[[i, j]].coeffs()[1..].iter().all(|c| *c == 0.0));
            }
        }
        let inv = invert_metric(&g).unwrap();
        assert_eq!(inv, g);
    }

    #[test]
    fn negative_component_is_rejected() {
        let chart = Chart::new(["x", "y", "z", "w"], [[0.0, 1.0]; 4]).unwrap();
        let mut g: [[&str; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { "1" } else { "0" }));
        g[0][0] = "-1";
        let p = MetricPatch::from_strings("bad", chart, &g).unwrap();
        let err = metric_at(&p, &p.point([0.5; 4]).unwrap(), 2).unwrap_err();
        match err {
            GeomError::NonPositiveDefinite { eigenvalues, .. } => assert_eq!(eigenvalues[0], -1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_definition_is_rejected() {
        let doc = r#"{"name":"t","coords":["a","b","c","d"],"domain":[[0,1],[0,1],[0,1],[0,1]],
            "g":[["1","a","0","0"],["0","1","0","0"],["0","0","1","0"],["0","0","0","1"]],"boundary_axis":0}"#;
        let def: MetricDefinition = serde_json::from_str(doc).unwrap();
        assert!(matches!(def.into_patch(), Err(GeomError::InvalidMetric(_))));
    }

    #[test]
    fn constant_diagonal_inverse() {
        let chart = Chart::new(["x", "y", "z", "w"], [[0.0, 1.0]; 4]).unwrap();
        let g: [[&str; 4]; 4] = std::array::from_fn(|i| {
            std::array::from_fn(|j| match (i, j) {
                (0, 0) => "1",
                _ if i == j => "1.5^2",
                _ => "0",
            })
        });
        let p = MetricPatch::from_strings("c", chart, &g).unwrap();
        let inv = invert_metric(&metric_at(&p, &p.point([0.1; 4]).unwrap(), 2).unwrap()).unwrap();
        assert_eq!(inv[[0, 0]].value(), 1.0);
        assert!((inv[[2, 2]].value() - 1.0 / 2.25).abs() < 1e-15);
        assert_eq!(inv[[1, 2]].value(), 0.0);
        assert_eq!(inv[[3, 3]].coeff(&MultiIndex([1, 0, 0, 0])).unwrap(), 0.0);
    }

    #[test]
    fn out_of_domain_point() {
        let p = flat();
        assert!(matches!(p.point([1.5, 0.0, 0.0, 0.0]), Err(GeomError::OutOfDomain { .. })));
        assert!(p.point([0.0, 0.5, 0.5, 0.5]).unwrap().is_boundary);
    }
}
