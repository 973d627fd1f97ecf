//! Geometry of the boundary face `x⁰ = 0`: normal and shape data, intrinsic
//! curvature, Gauss–Codazzi residuals, the S-tensor, the Weyl identities for
//! umbilic boundaries and the normal (Fermi) expansion of the metric.
//!
//! The outward normal is `ν = −g^{0a}∂_a / √g^{00}` because `x⁰` grows
//! inward. Tensors labelled with a `0` slot mean contraction with `ν`,
//! except in the expansion coefficients, whose `0` is the inward `∂_r`.

use serde::Serialize;

use crate::curvature::Geometry;
use crate::error::{GeomError, Result};
use crate::expr::TANGENTIAL_AXES;
use crate::jet::{factorial, Jet, MultiIndex, MAX_ORDER};
use crate::linalg;
use crate::metric::{metric_at, metric_jets, MetricPatch, PointSample};
use crate::tensor::{JetTensor, RealTensor, Tensor};

pub type Sym3 = [[f64; 3]; 3];

fn zero(order: usize) -> Jet {
    Jet::constant_unchecked(0.0, 4, order)
}

fn sym3(t: &RealTensor) -> Sym3 {
    std::array::from_fn(|i| std::array::from_fn(|j| t[[i, j]]))
}

/// Sup-norm of the difference of two 3×3 arrays.
pub fn max_diff3(a: &Sym3, b: &Sym3) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            m = m.max((a[i][j] - b[i][j]).abs());
        }
    }
    m
}

pub fn max_abs3(a: &Sym3) -> f64 {
    max_diff3(a, &[[0.0; 3]; 3])
}

/// `h`-norm `|A|² = h^{ik}h^{jl}A_{ij}A_{kl}`.
pub fn norm_sq3(a: &Sym3, hinv: &Sym3) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    s += hinv[i][k] * hinv[j][l] * a[i][j] * a[k][l];
                }
            }
        }
    }
    s
}

fn trace3(a: &Sym3, hinv: &Sym3) -> f64 {
    (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| hinv[i][j] * a[i][j]).sum()
}

#[derive(Debug, Clone, Serialize)]
pub struct ShapeData {
    /// Outward unit normal (contravariant components).
    pub nu: [f64; 4],
    pub l: Sym3,
    pub mean_curvature: f64,
    /// `H/3`.
    pub lambda: f64,
    pub h: Sym3,
    pub hinv: Sym3,
    /// `|g(ν,ν) − 1|`.
    pub normalization_residual: f64,
}

impl ShapeData {
    /// `h`-norm of `L − (H/3)h`.
    pub fn umbilicity(&self) -> f64 {
        let tf: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| self.l[i][j] - self.lambda * self.h[i][j]));
        norm_sq3(&tf, &self.hinv).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct IntrinsicData {
    pub h: Sym3,
    pub rm: RealTensor,
    pub ric: Sym3,
    pub scal: f64,
    pub schouten: Sym3,
    /// Weyl part of the 3-dimensional curvature (identically zero).
    pub weyl_max: f64,
}

/// Jet-level boundary geometry at one boundary point.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    pub point: PointSample,
    pub ambient: Geometry,
    pub sigma: Geometry,
    /// Outward unit normal, jets of order `k`.
    pub nu: Vec<Jet>,
    /// `L_ij` jets of order `k − 1`.
    pub l: JetTensor,
    /// `H` jets of order `k − 1`.
    pub mean_curvature: Jet,
}

impl BoundaryGeometry {
    pub fn at(patch: &MetricPatch, point: &PointSample, order: usize) -> Result<Self> {
        if !point.is_boundary {
            return Err(GeomError::NotOnBoundary { point: point.coords });
        }
        let ambient = Geometry::at(patch, point, order)?;
        let h = Tensor::from_fn(3, 2, |i| ambient.g[[i[0] + 1, i[1] + 1]].clone());
        let sigma = Geometry::new(h, &[1, 2, 3])?;
        let g00 = &ambient.ginv[[0, 0]];
        let inv_sqrt = g00.powf(-0.5)?;
        let nu: Vec<Jet> = (0..4).map(|a| -(&ambient.ginv[[a, 0]] * &inv_sqrt)).collect();
        let s = inv_sqrt.truncate(order - 1);
        let l = Tensor::from_fn(3, 2, |i| &ambient.gamma[[0, i[0] + 1, i[1] + 1]] * &s);
        let hinv = sigma.ginv.truncate(order - 1);
        let mut hh = zero(order - 1);
        for i in 0..3 {
            for j in 0..3 {
                hh.add_product(&hinv[[i, j]], &l[[i, j]]);
            }
        }
        Ok(Self {
            point: *point,
            ambient,
            sigma,
            nu,
            l,
            mean_curvature: hh,
        })
    }

    fn nu_vals(&self) -> [f64; 4] {
        std::array::from_fn(|a| self.nu[a].value())
    }

    pub fn shape(&self) -> ShapeData {
        let nu = self.nu_vals();
        let g = self.ambient.g.values();
        let mut norm = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                norm += g[[a, b]] * nu[a] * nu[b];
            }
        }
        let hh = self.mean_curvature.value();
        ShapeData {
            nu,
            l: sym3(&self.l.values()),
            mean_curvature: hh,
            lambda: hh / 3.0,
            h: sym3(&self.sigma.g.values()),
            hinv: sym3(&self.sigma.ginv.values()),
            normalization_residual: (norm - 1.0).abs(),
        }
    }

    pub fn intrinsic(&self) -> IntrinsicData {
        IntrinsicData {
            h: sym3(&self.sigma.g.values()),
            rm: self.sigma.rm.values(),
            ric: sym3(&self.sigma.ric.values()),
            scal: self.sigma.scal.value(),
            schouten: sym3(&self.sigma.schouten.values()),
            weyl_max: self.sigma.weyl.values().max_abs(),
        }
    }

    /// Ambient 2-tensor restricted to tangential slots.
    fn tangential(t: &RealTensor) -> Sym3 {
        std::array::from_fn(|i| std::array::from_fn(|j| t[[i + 1, j + 1]]))
    }

    /// `T(ν, ∂_i, ν, ∂_j)` for a covariant 4-tensor.
    fn normal_pair(t: &RealTensor, nu: &[f64; 4]) -> Sym3 {
        std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        s += t[[a, i + 1, b, j + 1]] * nu[a] * nu[b];
                    }
                }
                s
            })
        })
    }

    pub fn gauss_codazzi(&self) -> Result<GaussCodazzi> {
        let nu = self.nu_vals();
        let rm = self.ambient.rm.values();
        let rs = self.sigma.rm.values();
        let shape = self.shape();
        let (l, hinv) = (&shape.l, &shape.hinv);
        let hh = shape.mean_curvature;

        let mut gauss: f64 = 0.0;
        for i in 0..3 {
            for k in 0..3 {
                for j in 0..3 {
                    for m in 0..3 {
                        let r = rm[[i + 1, k + 1, j + 1, m + 1]] - rs[[i, k, j, m]] + l[i][j] * l[k][m]
                            - l[i][m] * l[j][k];
                        gauss = gauss.max(r.abs());
                    }
                }
            }
        }

        // ∇^Σ L with the derivative index last
        let dl = self.sigma.covariant_derivative(&self.l)?.values();
        let mut codazzi: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let r0: f64 = (0..4).map(|a| rm[[i + 1, j + 1, k + 1, a]] * nu[a]).sum();
                    let r = r0 + dl[[i, k, j]] - dl[[j, k, i]];
                    codazzi = codazzi.max(r.abs());
                }
            }
        }

        let ric = self.ambient.ric.values();
        let r_scal = self.ambient.scal.value();
        let r0i0j = Self::normal_pair(&rm, &nu);
        let ric_s = sym3(&self.sigma.ric.values());
        let l_sq: Sym3 = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = 0.0;
                for k in 0..3 {
                    for m in 0..3 {
                        s += l[i][k] * hinv[k][m] * l[m][j];
                    }
                }
                s
            })
        });
        let mut first: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let r = ric[[i + 1, j + 1]] - r0i0j[i][j] - (ric_s[i][j] - hh * l[i][j] + l_sq[i][j]);
                first = first.max(r.abs());
            }
        }
        let norm_l = norm_sq3(l, hinv);
        let ric00: f64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| ric[[a, b]] * nu[a] * nu[b]).sum();
        let r_sigma = self.sigma.scal.value();
        let second = (r_scal - 2.0 * ric00 - (r_sigma - hh * hh + norm_l)).abs();

        // R_{j0} = −∇_j H + ∇^i L_{ij}
        let dh: Vec<f64> = (0..3).map(|j| self.sigma.partial(&self.mean_curvature, j).value()).collect();
        let mut ricci_normal: f64 = 0.0;
        let mut ricci_normal_umbilic: f64 = 0.0;
        for j in 0..3 {
            let rj0: f64 = (0..4).map(|a| ric[[j + 1, a]] * nu[a]).sum();
            let mut div = 0.0;
            for i in 0..3 {
                for k in 0..3 {
                    div += hinv[i][k] * dl[[i, j, k]];
                }
            }
            ricci_normal = ricci_normal.max((rj0 + dh[j] - div).abs());
            ricci_normal_umbilic = ricci_normal_umbilic.max((rj0 + 2.0 / 3.0 * dh[j]).abs());
        }

        let p = self.ambient.schouten.values();
        let p00: f64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| p[[a, b]] * nu[a] * nu[b]).sum();
        let p00_general = (p00 - (r_scal / 6.0 - r_sigma / 4.0 + (hh * hh - norm_l) / 4.0)).abs();
        let p00_umbilic = (p00 - (r_scal / 6.0 - r_sigma / 4.0 + hh * hh / 6.0)).abs();

        Ok(GaussCodazzi {
            gauss,
            codazzi,
            gauss_first_trace: first,
            gauss_second_trace: second,
            ricci_normal,
            ricci_normal_umbilic,
            p00_general,
            p00_umbilic,
            p00,
            umbilicity: shape.umbilicity(),
        })
    }

    /// `∇W` values (derivative index last); needs metric jets of order 3.
    fn nabla_weyl(&self) -> Result<RealTensor> {
        if self.ambient.order < 3 {
            return Err(GeomError::InsufficientOrder {
                what: "S-tensor",
                need: 3,
                have: self.ambient.order,
            });
        }
        Ok(self.ambient.covariant_derivative(&self.ambient.weyl)?.values())
    }

    /// `S_ij = ∇^α W_{αi0j} + ∇^α W_{αj0i} − ∇^0 W_{0i0j} + (4/3) H W_{0i0j}`
    /// with the `0` slots along the outward normal and `H` taken with respect
    /// to the inward normal, i.e. `H = −h^{ij}L_ij` in the convention of
    /// [`ShapeData`]. This is the combination obeying `S ↦ e^{−w}S`.
    pub fn s_tensor(&self) -> Result<Sym3> {
        let p = self.s_tensor_parts()?;
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| p.divergence[i][j] - p.normal[i][j] - 4.0 / 3.0 * p.mean_curvature_weyl[i][j])
        }))
    }

    pub fn s_tensor_parts(&self) -> Result<STensorParts> {
        let dw = self.nabla_weyl()?;
        let nu = self.nu_vals();
        let gi = self.ambient.ginv.values();
        let w = self.ambient.weyl.values();
        let hh = self.mean_curvature.value();
        let w0 = Self::normal_pair(&w, &nu);
        let div1: Sym3 = std::array::from_fn(|i| {
            std::array::from_fn(|j| {
                let mut s = 0.0;
                for al in 0..4 {
                    for mu in 0..4 {
                        if gi[[al, mu]] == 0.0 {
                            continue;
                        }
                        for a in 0..4 {
                            s += gi[[al, mu]] * dw[[al, i + 1, a, j + 1, mu]] * nu[a];
                        }
                    }
                }
                s
            })
        });
        Ok(STensorParts {
            divergence: std::array::from_fn(|i| std::array::from_fn(|j| div1[i][j] + div1[j][i])),
            normal: std::array::from_fn(|i| {
                std::array::from_fn(|j| {
                    let mut s = 0.0;
                    for mu in 0..4 {
                        for a in 0..4 {
                            for b in 0..4 {
                                s += nu[mu] * nu[a] * nu[b] * dw[[a, i + 1, b, j + 1, mu]];
                            }
                        }
                    }
                    s
                })
            }),
            mean_curvature_weyl: std::array::from_fn(|i| std::array::from_fn(|j| hh * w0[i][j])),
        })
    }

    /// `∇^0 P_ij = ν^μ ∇_μ P_ij`.
    pub fn normal_derivative_schouten(&self) -> Result<Sym3> {
        let dp = self.ambient.covariant_derivative(&self.ambient.schouten)?.values();
        let nu = self.nu_vals();
        Ok(std::array::from_fn(|i| {
            std::array::from_fn(|j| (0..4).map(|m| nu[m] * dp[[i + 1, j + 1, m]]).sum())
        }))
    }

    /// The three identities for umbilic boundaries. Fails with a
    /// precondition error when the boundary is not umbilic within `tol`.
    pub fn weyl_identities(&self, tol: f64) -> Result<WeylIdentities> {
        let shape = self.shape();
        let umb = shape.umbilicity();
        if umb > tol {
            return Err(GeomError::Precondition {
                what: "umbilic boundary".into(),
                residual: umb,
            });
        }
        let nu = shape.nu;
        let hinv = &shape.hinv;
        let w = self.ambient.weyl.values();
        let w0 = Self::normal_pair(&w, &nu);
        let p = Self::tangential(&self.ambient.schouten.values());
        let ps = sym3(&self.sigma.schouten.values());
        let hh = shape.mean_curvature;
        let a: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| p[i][j] - ps[i][j] + hh * hh / 18.0 * shape.h[i][j]));
        let first = max_diff3(&w0, &a);
        let mut second: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let v: f64 = (0..4).map(|b| w[[i + 1, j + 1, k + 1, b]] * nu[b]).sum();
                    second = second.max(v.abs());
                }
            }
        }
        // |W_ijkl|² with h-norms
        let wt = Tensor::from_fn(3, 4, |i| w[[i[0] + 1, i[1] + 1, i[2] + 1, i[3] + 1]]);
        let hinv_t = Tensor::from_fn(3, 2, |i| hinv[i[0]][i[1]]);
        let lhs = wt.norm_sq_with(&hinv_t);
        let rhs = 4.0 * norm_sq3(&a, hinv);
        let rhs_weyl = 4.0 * norm_sq3(&w0, hinv);
        Ok(WeylIdentities {
            weyl_normal: first,
            weyl_mixed: second,
            norm_identity: (lhs - rhs).abs(),
            norm_identity_weyl: (lhs - rhs_weyl).abs(),
            norm_lhs: lhs,
            norm_rhs: rhs,
            umbilicity: umb,
        })
    }

    /// The ambient inverse metric restricted to values.
    pub fn values(&self) -> BoundaryValues {
        let shape = self.shape();
        let intrinsic = self.intrinsic();
        let nu = shape.nu;
        let p = self.ambient.schouten.values();
        let p00 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| p[[a, b]] * nu[a] * nu[b]).sum();
        BoundaryValues {
            schouten_tangential: Self::tangential(&p),
            p00,
            weyl_max: self.ambient.weyl.values().max_abs(),
            scal: self.ambient.scal.value(),
            shape,
            intrinsic_schouten: intrinsic.schouten,
            intrinsic_scal: intrinsic.scal,
        }
    }
}

/// The three pieces of the S-tensor: `∇^α W_{αi0j} + (i↔j)`, `∇^0 W_{0i0j}`
/// and `H W_{0i0j}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct STensorParts {
    pub divergence: Sym3,
    pub normal: Sym3,
    pub mean_curvature_weyl: Sym3,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryValues {
    pub shape: ShapeData,
    pub schouten_tangential: Sym3,
    pub p00: f64,
    pub weyl_max: f64,
    pub scal: f64,
    pub intrinsic_schouten: Sym3,
    pub intrinsic_scal: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GaussCodazzi {
    pub gauss: f64,
    pub codazzi: f64,
    pub gauss_first_trace: f64,
    pub gauss_second_trace: f64,
    /// `R_{j0} + ∇_j H − ∇^i L_{ij}`.
    pub ricci_normal: f64,
    /// `R_{j0} + ⅔∇_j H` (umbilic boundaries only).
    pub ricci_normal_umbilic: f64,
    pub p00_general: f64,
    /// `P₀₀ − (R/6 − R^Σ/4 + H²/6)` (umbilic boundaries only).
    pub p00_umbilic: f64,
    pub p00: f64,
    pub umbilicity: f64,
}

impl GaussCodazzi {
    /// Largest residual among the identities that hold for every metric.
    pub fn general_max(&self) -> f64 {
        [
            self.gauss,
            self.codazzi,
            self.gauss_first_trace,
            self.gauss_second_trace,
            self.ricci_normal,
            self.p00_general,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeylIdentities {
    /// `W_{0i0j} − (P_ij − P^Σ_ij + H²/18 h_ij)`.
    pub weyl_normal: f64,
    /// `W_{ijk0}`.
    pub weyl_mixed: f64,
    /// `|W_ijkl|² − 4|P − P^Σ + H²/18 h|²`.
    pub norm_identity: f64,
    /// `|W_ijkl|² − 4|W_0i0j|²`.
    pub norm_identity_weyl: f64,
    pub norm_lhs: f64,
    pub norm_rhs: f64,
    pub umbilicity: f64,
}

/// Sup over samples of the `h`-norm of `L − (H/3)h`.
pub fn umbilicity_residual(patch: &MetricPatch, samples: &[PointSample]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in samples {
        let g = metric_at(patch, s, 1)?;
        let shape = shape_from_first_order(&g)?;
        worst = worst.max(shape.umbilicity());
    }
    Ok(worst)
}

pub fn shape_operator(patch: &MetricPatch, point: &PointSample) -> Result<ShapeData> {
    if !point.is_boundary {
        return Err(GeomError::NotOnBoundary { point: point.coords });
    }
    shape_from_first_order(&metric_at(patch, point, 1)?)
}

/// Shape data from metric jets of order ≥ 1.
fn shape_from_first_order(g: &JetTensor) -> Result<ShapeData> {
    let gv: [[f64; 4]; 4] = std::array::from_fn(|i| std::array::from_fn(|j| g[[i, j]].value()));
    let gi = linalg::invert(&gv).ok_or(GeomError::Singular("metric inversion"))?;
    let dg = |a: usize, b: usize, c: usize| g[[a, b]].coeffs()[1 + c];
    let s = gi[0][0].sqrt();
    let nu: [f64; 4] = std::array::from_fn(|a| -gi[a][0] / s);
    let l: Sym3 = std::array::from_fn(|i| {
        std::array::from_fn(|j| {
            let (i, j) = (i + 1, j + 1);
            let g0: f64 = (0..4).map(|d| gi[0][d] * 0.5 * (dg(d, j, i) + dg(d, i, j) - dg(i, j, d))).sum();
            g0 / s
        })
    });
    let h: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| gv[i + 1][j + 1]));
    let hinv = linalg::invert(&h).ok_or(GeomError::Singular("induced metric"))?;
    let hh = trace3(&l, &hinv);
    let mut norm = 0.0;
    for a in 0..4 {
        for b in 0..4 {
            norm += gv[a][b] * nu[a] * nu[b];
        }
    }
    Ok(ShapeData {
        nu,
        l,
        mean_curvature: hh,
        lambda: hh / 3.0,
        h,
        hinv,
        normalization_residual: (norm - 1.0).abs(),
    })
}

pub fn intrinsic_curvature(patch: &MetricPatch, point: &PointSample) -> Result<IntrinsicData> {
    Ok(BoundaryGeometry::at(patch, point, 2)?.intrinsic())
}

pub fn gauss_codazzi_check(patch: &MetricPatch, point: &PointSample) -> Result<GaussCodazzi> {
    BoundaryGeometry::at(patch, point, 2)?.gauss_codazzi()
}

pub fn s_tensor(patch: &MetricPatch, point: &PointSample) -> Result<Sym3> {
    BoundaryGeometry::at(patch, point, 3)?.s_tensor()
}

pub fn weyl_boundary_identities(patch: &MetricPatch, point: &PointSample, tol: f64) -> Result<WeylIdentities> {
    BoundaryGeometry::at(patch, point, 2)?.weyl_identities(tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Formula,
    Geodesic,
    /// Read directly off the metric jets (normal-form charts only).
    Direct,
}

#[derive(Debug, Clone, Serialize)]
pub struct FermiExpansion {
    pub base: [f64; 4],
    pub route: Route,
    /// `h⁽ᵏ⁾ = ∂_r^k h_ij` at `r = 0`.
    pub coeffs: Vec<Sym3>,
}

impl FermiExpansion {
    pub fn max_diff(&self, other: &FermiExpansion) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .fold(0.0, |m, (a, b)| m.max(max_diff3(a, b)))
    }
}

/// Deviation from `g₀₀ = 1, g₀ᵢ = 0` in every jet coefficient.
pub fn normal_form_residual(g: &JetTensor) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..4 {
        let j = &g[[0, a]];
        for (n, c) in j.coeffs().iter().enumerate() {
            let target = if a == 0 && n == 0 { 1.0 } else { 0.0 };
            worst = worst.max((c - target).abs());
        }
    }
    worst
}

const NORMAL_FORM_TOL: f64 = 1e-12;

fn require_normal_form(g: &JetTensor) -> Result<()> {
    let residual = normal_form_residual(g);
    if residual > NORMAL_FORM_TOL {
        return Err(GeomError::NotNormalForm { residual });
    }
    Ok(())
}

/// Expansion coefficients read off the tangential metric jets.
pub fn fermi_direct_coefficients(patch: &MetricPatch, point: &PointSample, order: usize) -> Result<FermiExpansion> {
    let g = metric_at(patch, point, order)?;
    require_normal_form(&g)?;
    let coeffs = (0..=order)
        .map(|k| {
            std::array::from_fn(|i| {
                std::array::from_fn(|j| g[[i + 1, j + 1]].partial(&MultiIndex([k as u8, 0, 0, 0])).unwrap())
            })
        })
        .collect();
    Ok(FermiExpansion {
        base: point.coords,
        route: Route::Direct,
        coeffs,
    })
}

/// `h⁽⁰⁾ … h⁽⁴⁾` from curvature, for charts in normal form.
pub fn fermi_formula_coefficients(patch: &MetricPatch, point: &PointSample) -> Result<FermiExpansion> {
    if !point.is_boundary {
        return Err(GeomError::NotOnBoundary { point: point.coords });
    }
    let geo = Geometry::at(patch, point, 4)?;
    require_normal_form(&geo.g)?;
    let g = geo.g.values();
    let h: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| g[[i + 1, j + 1]]));
    let hinv = linalg::invert(&h).ok_or(GeomError::Singular("induced metric"))?;
    // L = −½ ∂₀ h, and index 0 below is the inward ∂_r
    let l: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| -0.5 * geo.g[[i + 1, j + 1]].coeffs()[1]));
    let rm = geo.rm.values();
    let drm_j = geo.covariant_derivative(&geo.rm)?;
    let ddrm = geo.covariant_derivative(&drm_j)?.values();
    let drm = drm_j.values();
    let r = |i: usize, j: usize| rm[[0, i + 1, 0, j + 1]];
    let dr = |i: usize, j: usize| drm[[0, i + 1, 0, j + 1, 0]];
    let ddr = |i: usize, j: usize| ddrm[[0, i + 1, 0, j + 1, 0, 0]];
    // L^k_j = h^{km} L_mj
    let lup = |k: usize, j: usize| (0..3).map(|m| hinv[k][m] * l[m][j]).sum::<f64>();
    let mut h1 = [[0.0; 3]; 3];
    let mut h2 = [[0.0; 3]; 3];
    let mut h3 = [[0.0; 3]; 3];
    let mut h4 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            h1[i][j] = -2.0 * l[i][j];
            let mut t2 = -2.0 * r(i, j);
            let mut t3 = -2.0 * dr(i, j);
            let mut t4 = -2.0 * ddr(i, j);
            for k in 0..3 {
                t2 += 2.0 * l[i][k] * lup(k, j);
                t3 += 4.0 * lup(k, i) * r(j, k) + 4.0 * lup(k, j) * r(i, k);
                t4 += 6.0 * dr(i, k) * lup(k, j) + 6.0 * dr(j, k) * lup(k, i);
                for m in 0..3 {
                    t4 -= 4.0 * r(i, k) * lup(k, m) * lup(m, j) + 4.0 * r(j, k) * lup(k, m) * lup(m, i);
                    t4 += 8.0 * r(i, k) * hinv[k][m] * r(j, m);
                }
            }
            h2[i][j] = t2;
            h3[i][j] = t3;
            h4[i][j] = t4;
        }
    }
    Ok(FermiExpansion {
        base: point.coords,
        route: Route::Formula,
        coeffs: vec![h, h1, h2, h3, h4],
    })
}

/// Expansion by integrating the normal geodesic map in jets: with
/// `u = (r, y)`, `F(u) = exp_{(0, p+y)}(r N(y))` is obtained by Picard
/// iteration on `F_rr = −Γ(F)(F_r, F_r)`, and `h_ij = g(F)(∂_iF, ∂_jF)`.
pub fn fermi_geodesic_expansion(patch: &MetricPatch, point: &PointSample, order: usize) -> Result<FermiExpansion> {
    if !point.is_boundary {
        return Err(GeomError::NotOnBoundary { point: point.coords });
    }
    if order + 2 > MAX_ORDER {
        return Err(GeomError::InsufficientOrder {
            what: "geodesic expansion (order + 2 metric jets)",
            need: order + 2,
            have: MAX_ORDER,
        });
    }
    let k = order + 1;
    let p = point.coords;
    // the chart must reach a little way inward for the expansion to make sense
    if patch.chart.domain[0][1] <= 0.0 {
        return Err(GeomError::DomainTooSmall("no collar in the x0 direction".into()));
    }
    let ambient = Geometry::at(patch, point, order + 2)?;
    let gamma = ambient.gamma.truncate(k);
    let g_amb = ambient.g.truncate(k);

    // inward unit normal along the boundary, as jets in y
    let gb = metric_jets(patch, &p, k, TANGENTIAL_AXES)?;
    let gb_inv = crate::metric::invert_metric(&gb)?;
    let s = gb_inv[[0, 0]].powf(-0.5)?;
    let normal: Vec<Jet> = (0..4).map(|a| &gb_inv[[a, 0]] * &s).collect();

    let r = Jet::variable(&[0.0; 4], 0, 4, k)?;
    let base: Vec<Jet> = (0..4)
        .map(|a| {
            let mut b = normal[a].clone() * r.clone();
            if a > 0 {
                b += &Jet::variable(&[0.0; 4], a, 4, k)?;
            }
            Ok(b)
        })
        .collect::<Result<_>>()?;
    let mut z = base.clone();
    for _ in 0..k + 1 {
        let powers = crate::jet::MonomialPowers::new(&z, k);
        let dz: Vec<Jet> = z.iter().map(|c| c.derivative(0)).collect();
        let mut next = Vec::with_capacity(4);
        for a in 0..4 {
            let mut acc = zero(k - 1);
            for b in 0..4 {
                for c in 0..4 {
                    let gam = powers.apply(&gamma[[a, b, c]]).truncate(k - 1);
                    let mut t = &gam * &dz[b];
                    t = &t * &dz[c];
                    acc -= &t;
                }
            }
            let twice = pad(&acc, k).integrate(0).integrate(0);
            next.push(&base[a] + &twice);
        }
        z = next;
    }
    // h_ij(u) = g_ab(p + Z) ∂_i Z^a ∂_j Z^b
    let powers = crate::jet::MonomialPowers::new(&z, k);
    let gz = Tensor::from_fn(4, 2, |i| powers.apply(&g_amb[[i[0], i[1]]]).truncate(order));
    let dz: Vec<Vec<Jet>> = (1..4).map(|i| z.iter().map(|c| c.derivative(i)).collect()).collect();
    let mut coeffs = vec![[[0.0; 3]; 3]; order + 1];
    for i in 0..3 {
        for j in i..3 {
            let mut hij = zero(order);
            for a in 0..4 {
                for b in 0..4 {
                    let t = &gz[[a, b]] * &dz[i][a];
                    hij.add_product(&t, &dz[j][b]);
                }
            }
            for (m, c) in coeffs.iter_mut().enumerate() {
                let v = hij.coeff(&MultiIndex([m as u8, 0, 0, 0]))? * factorial(m);
                c[i][j] = v;
                c[j][i] = v;
            }
        }
    }
    if coeffs.iter().flatten().flatten().any(|v| !v.is_finite()) {
        return Err(GeomError::DomainTooSmall("geodesic expansion diverged".into()));
    }
    Ok(FermiExpansion {
        base: p,
        route: Route::Geodesic,
        coeffs,
    })
}

/// Zero-extend a jet to a higher order.
fn pad(j: &Jet, order: usize) -> Jet {
    let mut c = j.coeffs().to_vec();
    c.resize(crate::jet::space_len(j.dim(), order), 0.0);
    Jet::from_coeffs(j.dim(), order, c).expect("valid shape")
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct H3Check {
    pub residual: f64,
    pub h3_max: f64,
    pub s_max: f64,
}

/// Orientation factor applied to `S` (outward normal) before comparing with
/// `h⁽³⁾` (inward `r`): `S` is odd under `ν → −ν`.
pub const S_TO_INWARD: f64 = -1.0;

/// `h⁽³⁾ + 4S` over boundary samples for constant-R, totally geodesic
/// metrics. `S` is re-expressed in the inward orientation of `h⁽³⁾` first.
pub fn h3_identity_check(patch: &MetricPatch, boundary: &[PointSample], interior: &[PointSample]) -> Result<H3Check> {
    let mut r_values = Vec::new();
    for s in interior.iter().chain(boundary) {
        let geo = Geometry::at(patch, s, 2)?;
        r_values.push(geo.scal.value());
    }
    let (lo, hi) = r_values.iter().fold((f64::MAX, f64::MIN), |(a, b), v| (a.min(*v), b.max(*v)));
    if hi - lo > 1e-6 {
        return Err(GeomError::Precondition {
            what: "constant scalar curvature".into(),
            residual: hi - lo,
        });
    }
    let mut out = H3Check {
        residual: 0.0,
        h3_max: 0.0,
        s_max: 0.0,
    };
    for b in boundary {
        let shape = shape_operator(patch, b)?;
        let lmax = max_abs3(&shape.l);
        if lmax > 1e-9 {
            return Err(GeomError::Precondition {
                what: "totally geodesic boundary".into(),
                residual: lmax,
            });
        }
        let geo = fermi_geodesic_expansion(patch, b, 3)?;
        let s = s_tensor(patch, b)?;
        let h3 = &geo.coeffs[3];
        for i in 0..3 {
            for j in 0..3 {
                out.residual = out.residual.max((h3[i][j] + 4.0 * S_TO_INWARD * s[i][j]).abs());
            }
        }
        out.h3_max = out.h3_max.max(max_abs3(h3));
        out.s_max = out.s_max.max(max_abs3(&s));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChristoffelCheck {
    /// `Γ^k_ij` in boundary-normal coordinates.
    pub tangential: f64,
    /// `Γ^0_ij − L_ij`.
    pub normal_l: f64,
    /// `Γ^0_ij − ⅓H δ_ij` (umbilic form).
    pub normal_umbilic: f64,
    /// `Γ^j_i0 + ⅓Hδ^j_i` (umbilic form).
    pub mixed_umbilic: f64,
    /// `Γ^j_i0 + L^j_i`.
    pub mixed_l: f64,
    pub gamma_0i0: f64,
    pub gamma_000: f64,
}

/// Christoffel symbols after an internal change of boundary coordinates
/// `x^i = p^i + A y − ½ Γ^Σ(Ay, Ay)` with `AᵀhA = I`, so the new boundary
/// coordinates are geodesic normal at the base point.
pub fn fermi_christoffel_check(patch: &MetricPatch, point: &PointSample) -> Result<ChristoffelCheck> {
    let bg = BoundaryGeometry::at(patch, point, 2)?;
    require_normal_form(&bg.ambient.g)?;
    let shape = bg.shape();
    let chol = linalg::cholesky(&shape.h).ok_or(GeomError::Singular("induced metric"))?;
    // h = C Cᵀ, so A = C^{−T}
    let cinv = linalg::invert(&chol).ok_or(GeomError::Singular("induced metric"))?;
    let a: Sym3 = std::array::from_fn(|i| std::array::from_fn(|j| cinv[j][i]));
    let ainv = linalg::invert(&a).ok_or(GeomError::Singular("frame"))?;
    let gam = bg.ambient.gamma.values();
    let gs = bg.sigma.gamma.values();
    // Jacobian J = diag(1, A); second derivatives of x^i: −Γ^Σ^i_kl A^k_m A^l_n
    let mut jac = [[0.0; 4]; 4];
    jac[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            jac[i + 1][j + 1] = a[i][j];
        }
    }
    let mut jinv = [[0.0; 4]; 4];
    jinv[0][0] = 1.0;
    for i in 0..3 {
        for j in 0..3 {
            jinv[i + 1][j + 1] = ainv[i][j];
        }
    }
    let second = |d: usize, b: usize, c: usize| -> f64 {
        if d == 0 || b == 0 || c == 0 {
            return 0.0;
        }
        let (d, m, n) = (d - 1, b - 1, c - 1);
        let mut s = 0.0;
        for k in 0..3 {
            for l in 0..3 {
                s -= gs[[d, k, l]] * a[k][m] * a[l][n];
            }
        }
        s
    };
    let new_gamma = |al: usize, b: usize, c: usize| -> f64 {
        let mut s = 0.0;
        for d in 0..4 {
            let mut inner = second(d, b, c);
            for e in 0..4 {
                for f in 0..4 {
                    inner += gam[[d, e, f]] * jac[e][b] * jac[f][c];
                }
            }
            s += jinv[al][d] * inner;
        }
        s
    };
    let hh = shape.mean_curvature;
    // L in the new frame is AᵀLA, and the new h is the identity
    let mut l_new = [[0.0; 3]; 3];
    for m in 0..3 {
        for n in 0..3 {
            for i in 0..3 {
                for j in 0..3 {
                    l_new[m][n] += a[i][m] * shape.l[i][j] * a[j][n];
                }
            }
        }
    }
    let mut out = ChristoffelCheck {
        tangential: 0.0,
        normal_l: 0.0,
        normal_umbilic: 0.0,
        mixed_umbilic: 0.0,
        mixed_l: 0.0,
        gamma_0i0: 0.0,
        gamma_000: new_gamma(0, 0, 0).abs(),
    };
    for i in 0..3 {
        out.gamma_0i0 = out.gamma_0i0.max(new_gamma(0, i + 1, 0).abs());
        for j in 0..3 {
            let d = if i == j { 1.0 } else { 0.0 };
            let g0 = new_gamma(0, i + 1, j + 1);
            out.normal_l = out.normal_l.max((g0 - l_new[i][j]).abs());
            out.normal_umbilic = out.normal_umbilic.max((g0 - hh / 3.0 * d).abs());
            let mixed = new_gamma(j + 1, i + 1, 0);
            out.mixed_umbilic = out.mixed_umbilic.max((mixed + hh / 3.0 * d).abs());
            out.mixed_l = out.mixed_l.max((mixed + l_new[j][i]).abs());
            for k in 0..3 {
                out.tangential = out.tangential.max(new_gamma(k + 1, i + 1, j + 1).abs());
            }
        }
    }
    Ok(out)
}
