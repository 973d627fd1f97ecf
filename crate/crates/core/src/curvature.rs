//! Interior curvature in the jet algebra: Christoffel symbols, Riemann,
//! Ricci, Schouten, Weyl, covariant derivatives and the Bach tensor.
//!
//! All tensors are covariant unless stated otherwise. A covariant derivative
//! appends its derivative index last, so `∇_μ∇_ν T` is stored as
//! `T[.., ν, μ]`.

use crate::error::{GeomError, Result};
use crate::jet::Jet;
use crate::metric::{invert_metric, metric_at, MetricPatch, PointSample};
use crate::tensor::{kulkarni_nomizu_jets, JetTensor, RealTensor, Tensor};

fn zero(dim: usize, order: usize) -> Jet {
    Jet::constant_unchecked(0.0, dim, order)
}

/// Jet-valued curvature of a metric on an `n`-dimensional index range
/// (`n = 4` for the ambient chart, `n = 3` for the boundary).
#[derive(Debug, Clone)]
pub struct Geometry {
    pub n: usize,
    /// Jet axis that carries coordinate index `i`.
    pub axes: Vec<usize>,
    pub order: usize,
    pub g: JetTensor,
    pub ginv: JetTensor,
    /// `Γ^a_{bc}` stored as `[a][b][c]`, order `k − 1`.
    pub gamma: JetTensor,
    gamma_nonzero: Vec<bool>,
    /// Order `k − 2` from here on.
    pub rm: JetTensor,
    pub ric: JetTensor,
    pub scal: Jet,
    pub tracefree_ricci: JetTensor,
    pub schouten: JetTensor,
    pub weyl: JetTensor,
}

impl Geometry {
    /// Ambient geometry of `patch` at `point` from metric jets of `order`.
    pub fn at(patch: &MetricPatch, point: &PointSample, order: usize) -> Result<Self> {
        let g = metric_at(patch, point, order)?;
        Self::new(g, &[0, 1, 2, 3])
    }

    pub fn new(g: JetTensor, axes: &[usize]) -> Result<Self> {
        let n = g.n();
        assert_eq!(axes.len(), n, "one jet axis per coordinate");
        let k = g.order();
        if k < 2 {
            return Err(GeomError::InsufficientOrder {
                what: "curvature",
                need: 2,
                have: k,
            });
        }
        let dim = g.data()[0].dim();
        let ginv = invert_metric(&g)?;

        // dg[a][b][c] = ∂_c g_ab
        let dg = Tensor::from_fn(n, 3, |i| g[[i[0], i[1]]].derivative(axes[i[2]]));
        // Γ_{d b c} = ½(∂_b g_dc + ∂_c g_db − ∂_d g_bc)
        let low = Tensor::from_fn(n, 3, |i| {
            let (d, b, c) = (i[0], i[1], i[2]);
            let mut s = dg[[d, c, b]].clone();
            s += &dg[[d, b, c]];
            s -= &dg[[b, c, d]];
            s.scale(0.5)
        });
        let ginv_k1 = ginv.truncate(k - 1);
        let gamma = Tensor::from_fn(n, 3, |i| {
            let mut s = zero(dim, k - 1);
            for d in 0..n {
                s.add_product(&ginv_k1[[i[0], d]], &low[[d, i[1], i[2]]]);
            }
            s
        });
        let gamma_nonzero = gamma.data().iter().map(|j| j.max_abs() != 0.0).collect();

        // R^ρ_{σμν} for μ < ν
        let gk2 = gamma.truncate(k - 2);
        let up = |rho: usize, sigma: usize, mu: usize, nu: usize| {
            let mut s = gamma[[rho, nu, sigma]].derivative(axes[mu]);
            s -= &gamma[[rho, mu, sigma]].derivative(axes[nu]);
            for l in 0..n {
                s.add_product(&gk2[[rho, mu, l]], &gk2[[l, nu, sigma]]);
                s.fma_product(-1.0, &gk2[[rho, nu, l]], &gk2[[l, mu, sigma]]);
            }
            s
        };
        let mut upper = Tensor::filled(n, 4, zero(dim, k - 2));
        for rho in 0..n {
            for sigma in 0..n {
                for mu in 0..n {
                    for nu in mu + 1..n {
                        upper[[rho, sigma, mu, nu]] = up(rho, sigma, mu, nu);
                    }
                }
            }
        }
        let gk = g.truncate(k - 2);
        let mut rm = Tensor::filled(n, 4, zero(dim, k - 2));
        for rho in 0..n {
            for sigma in 0..n {
                for mu in 0..n {
                    for nu in mu + 1..n {
                        let mut s = zero(dim, k - 2);
                        for l in 0..n {
                            s.add_product(&gk[[rho, l]], &upper[[l, sigma, mu, nu]]);
                        }
                        rm[[rho, sigma, nu, mu]] = -&s;
                        rm[[rho, sigma, mu, nu]] = s;
                    }
                }
            }
        }

        let ginv_k2 = ginv.truncate(k - 2);
        let ric = Tensor::from_fn(n, 2, |i| {
            let mut s = zero(dim, k - 2);
            for a in 0..n {
                for c in 0..n {
                    s.add_product(&ginv_k2[[a, c]], &rm[[a, i[0], c, i[1]]]);
                }
            }
            s
        });
        let mut scal = zero(dim, k - 2);
        for b in 0..n {
            for d in 0..n {
                scal.add_product(&ginv_k2[[b, d]], &ric[[b, d]]);
            }
        }
        let nf = n as f64;
        let tracefree_ricci = Tensor::from_fn(n, 2, |i| {
            let mut e = ric[[i[0], i[1]]].clone();
            e.fma_product(-1.0 / nf, &scal, &gk[[i[0], i[1]]]);
            e
        });
        let schouten = Tensor::from_fn(n, 2, |i| {
            let mut p = ric[[i[0], i[1]]].clone();
            p.fma_product(-1.0 / (2.0 * (nf - 1.0)), &scal, &gk[[i[0], i[1]]]);
            p.scale(1.0 / (nf - 2.0))
        });
        let kn = kulkarni_nomizu_jets(&schouten, &gk);
        let weyl = Tensor::from_fn(n, 4, |i| &rm[i] - &kn[i]);

        Ok(Self {
            n,
            axes: axes.to_vec(),
            order: k,
            g,
            ginv,
            gamma,
            gamma_nonzero,
            rm,
            ric,
            scal,
            tracefree_ricci,
            schouten,
            weyl,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.data()[0].dim()
    }

    /// Coordinate partial derivative along coordinate index `i`.
    pub fn partial(&self, t: &Jet, i: usize) -> Jet {
        t.derivative(self.axes[i])
    }

    /// `∇T` for a covariant tensor; the derivative index is appended last.
    pub fn covariant_derivative(&self, t: &JetTensor) -> Result<JetTensor> {
        let m = t.order();
        if m == 0 {
            return Err(GeomError::InsufficientOrder {
                what: "covariant derivative",
                need: 1,
                have: 0,
            });
        }
        let q = (m - 1).min(self.order - 1);
        let gam = self.gamma.truncate(q);
        let tt = t.truncate(q);
        let n = self.n;
        let r = t.rank();
        Ok(Tensor::from_fn(n, r + 1, |idx| {
            let e = idx[r];
            let base = &idx[..r];
            let mut out = t[base].derivative(self.axes[e]).truncate(q);
            let mut probe = base.to_vec();
            for s in 0..r {
                let a = base[s];
                for l in 0..n {
                    let gi = gam.flat(&[l, e, a]);
                    if !self.gamma_nonzero[gi] {
                        continue;
                    }
                    probe[s] = l;
                    out.fma_product(-1.0, &gam.data()[gi], &tt[probe.as_slice()]);
                }
                probe[s] = a;
            }
            out
        }))
    }

    /// `T^{ab} = g^{ac} g^{bd} T_{cd}`.
    pub fn raise2(&self, t: &JetTensor) -> JetTensor {
        let n = self.n;
        let q = t.order();
        let gi = self.ginv.truncate(q);
        let half = Tensor::from_fn(n, 2, |i| {
            let mut s = zero(self.dim(), q);
            for c in 0..n {
                s.add_product(&gi[[i[0], c]], &t[[c, i[1]]]);
            }
            s
        });
        Tensor::from_fn(n, 2, |i| {
            let mut s = zero(self.dim(), q);
            for d in 0..n {
                s.add_product(&gi[[i[1], d]], &half[[i[0], d]]);
            }
            s
        })
    }

    /// `Σ_{γδ} A^{γδ} T_{α γ β δ}` for a rank-4 `T`.
    fn contract_middle(&self, a_up: &JetTensor, t: &JetTensor) -> JetTensor {
        let n = self.n;
        let q = a_up.order().min(t.order());
        Tensor::from_fn(n, 2, |i| {
            let mut s = zero(self.dim(), q);
            for c in 0..n {
                for d in 0..n {
                    s.add_product(&a_up[[c, d]], &t[[i[0], c, i[1], d]]);
                }
            }
            s
        })
    }

    /// `ΔT_{ab} = g^{μν} ∇_μ∇_ν T_{ab}` for a symmetric 2-tensor.
    fn laplacian2(&self, t: &JetTensor) -> Result<JetTensor> {
        let dd = self.covariant_derivative(&self.covariant_derivative(t)?)?;
        let q = dd.order();
        let gi = self.ginv.truncate(q);
        Ok(Tensor::from_fn(self.n, 2, |i| {
            let mut s = zero(self.dim(), q);
            for m in 0..self.n {
                for v in 0..self.n {
                    s.add_product(&gi[[m, v]], &dd[[i[0], i[1], v, m]]);
                }
            }
            s
        }))
    }

    fn need(&self, what: &'static str, need: usize) -> Result<()> {
        if self.order < need {
            return Err(GeomError::InsufficientOrder {
                what,
                need,
                have: self.order,
            });
        }
        Ok(())
    }

    /// `∇^δ W_{αγβδ}`, the divergence on the last slot.
    pub fn weyl_divergence(&self) -> Result<JetTensor> {
        self.need("Weyl divergence", 3)?;
        let dw = self.covariant_derivative(&self.weyl)?;
        let q = dw.order();
        let gi = self.ginv.truncate(q);
        let n = self.n;
        Ok(Tensor::from_fn(n, 3, |i| {
            let mut s = zero(self.dim(), q);
            for d in 0..n {
                for v in 0..n {
                    s.add_product(&gi[[d, v]], &dw[[i[0], i[1], i[2], d, v]]);
                }
            }
            s
        }))
    }

    /// Bach tensor `∇^γ∇^δ W_{αγβδ} + P^{γδ} W_{αγβδ}` (jets of order
    /// `k − 4`), symmetrized, with the pre-symmetrization asymmetry.
    pub fn bach_direct(&self) -> Result<(JetTensor, f64)> {
        self.need("Bach tensor", 4)?;
        // ∇^γ∇^δ W_{αγβδ} = ∇^γ D_{αγβ} with D the divergence on the last slot
        let div = self.weyl_divergence()?;
        let ddiv = self.covariant_derivative(&div)?;
        let q = ddiv.order();
        let gi = self.ginv.truncate(q);
        let n = self.n;
        let p_up = self.raise2(&self.schouten.truncate(q));
        let pw = self.contract_middle(&p_up, &self.weyl.truncate(q));
        let raw = Tensor::from_fn(n, 2, |i| {
            let mut s = pw[[i[0], i[1]]].clone();
            for c in 0..n {
                for m in 0..n {
                    s.add_product(&gi[[c, m]], &ddiv[[i[0], c, i[1], m]]);
                }
            }
            s
        });
        Ok(symmetrize(&raw))
    }

    /// `ΔP − (1/6)∇∇R + R_{αγβδ}P^{γδ} − R_{αγ}P^γ_β + P^{γδ}W_{αγβδ}`.
    pub fn bach_schouten_form(&self) -> Result<JetTensor> {
        self.need("Bach tensor", 4)?;
        let n = self.n;
        let lap = self.laplacian2(&self.schouten)?;
        let q = lap.order();
        let hess_r = self.hessian(&self.scal)?;
        let p_up = self.raise2(&self.schouten.truncate(q));
        let rp = self.contract_middle(&p_up, &self.rm.truncate(q));
        let wp = self.contract_middle(&p_up, &self.weyl.truncate(q));
        let gi = self.ginv.truncate(q);
        let (ric, p) = (self.ric.truncate(q), self.schouten.truncate(q));
        // P^γ_β = g^{γa} P_{aβ}
        let p_mixed = Tensor::from_fn(n, 2, |i| {
            let mut s = zero(self.dim(), q);
            for a in 0..n {
                s.add_product(&gi[[i[0], a]], &p[[a, i[1]]]);
            }
            s
        });
        Ok(Tensor::from_fn(n, 2, |i| {
            let (a, b) = (i[0], i[1]);
            let mut s = lap[[a, b]].clone();
            s.axpy(-1.0 / 6.0, &hess_r[[a, b]]);
            s += &rp[[a, b]];
            s += &wp[[a, b]];
            for c in 0..n {
                s.fma_product(-1.0, &ric[[a, c]], &p_mixed[[c, b]]);
            }
            s
        }))
    }

    /// Bach tensor from the trace-free Ricci tensor, valid when the scalar
    /// curvature is the constant `c`. The returned tensor is
    /// `½ΔE + E^{γδ}W_{αγβδ} − E_α^γ E_{βγ} + ¼|E|²g − (c/6)E`, which matches the
    /// sign of the other two forms (principal part `−¼ΔΔg`).
    pub fn bach_tracefree_form(&self, c: f64) -> Result<JetTensor> {
        self.need("Bach tensor", 4)?;
        let residual = (self.scal.value() - c).abs();
        if residual > 1e-6 {
            return Err(GeomError::NotConstantScalar { c, residual });
        }
        let n = self.n;
        let lap = self.laplacian2(&self.tracefree_ricci)?;
        let q = lap.order();
        let e = self.tracefree_ricci.truncate(q);
        let e_up = self.raise2(&e);
        let ew = self.contract_middle(&e_up, &self.weyl.truncate(q));
        let gi = self.ginv.truncate(q);
        let g = self.g.truncate(q);
        let mut norm = zero(self.dim(), q);
        for a in 0..n {
            for b in 0..n {
                norm.add_product(&e_up[[a, b]], &e[[a, b]]);
            }
        }
        Ok(Tensor::from_fn(n, 2, |i| {
            let (a, b) = (i[0], i[1]);
            let mut s = lap[[a, b]].scale(-0.5);
            s -= &ew[[a, b]];
            for x in 0..n {
                for y in 0..n {
                    let mut t = &gi[[x, y]] * &e[[a, x]];
                    t = &t * &e[[b, y]];
                    s += &t;
                }
            }
            s.fma_product(-0.25, &norm, &g[[a, b]]);
            s.axpy(c / 6.0, &e[[a, b]]);
            -s
        }))
    }

    /// Covariant Hessian `∇_b∇_a f` stored `[a][b]`.
    pub fn hessian(&self, f: &Jet) -> Result<JetTensor> {
        let grad = Tensor::from_fn(self.n, 1, |i| self.partial(f, i[0]));
        self.covariant_derivative(&grad)
    }

    /// `∇^β T_{αβ}` for a 2-tensor with jets of order ≥ 1.
    pub fn divergence2(&self, t: &JetTensor) -> Result<Vec<Jet>> {
        let dt = self.covariant_derivative(t)?;
        let q = dt.order();
        let gi = self.ginv.truncate(q);
        Ok((0..self.n)
            .map(|a| {
                let mut s = zero(self.dim(), q);
                for b in 0..self.n {
                    for m in 0..self.n {
                        s.add_product(&gi[[b, m]], &dt[[a, b, m]]);
                    }
                }
                s
            })
            .collect())
    }

    pub fn point(&self) -> CurvaturePoint {
        CurvaturePoint {
            gamma: self.gamma.values(),
            rm: self.rm.values(),
            ric: self.ric.values(),
            scal: self.scal.value(),
            tracefree_ricci: self.tracefree_ricci.values(),
            schouten: self.schouten.values(),
            weyl: self.weyl.values(),
            g: self.g.values(),
            ginv: self.ginv.values(),
            bach: None,
            bach_asymmetry: None,
        }
    }
}

/// Symmetric part and the max asymmetry of a jet 2-tensor (values only).
pub fn symmetrize(t: &JetTensor) -> (JetTensor, f64) {
    let n = t.n();
    let mut asym: f64 = 0.0;
    let out = Tensor::from_fn(n, 2, |i| {
        let (a, b) = (&t[[i[0], i[1]]], &t[[i[1], i[0]]]);
        asym = asym.max((a.value() - b.value()).abs());
        (a + b).scale(0.5)
    });
    (out, asym)
}

/// Curvature values at one point.
#[derive(Debug, Clone)]
pub struct CurvaturePoint {
    pub g: RealTensor,
    pub ginv: RealTensor,
    pub gamma: RealTensor,
    pub rm: RealTensor,
    pub ric: RealTensor,
    pub scal: f64,
    pub tracefree_ricci: RealTensor,
    pub schouten: RealTensor,
    pub weyl: RealTensor,
    pub bach: Option<RealTensor>,
    pub bach_asymmetry: Option<f64>,
}

/// Curvature at `point`; with `with_bach` the Bach tensor is included
/// (needs metric jets of order 4).
pub fn curvature_point(patch: &MetricPatch, point: &PointSample, with_bach: bool) -> Result<CurvaturePoint> {
    let geo = Geometry::at(patch, point, if with_bach { 4 } else { 2 })?;
    let mut cp = geo.point();
    if with_bach {
        let (b, asym) = geo.bach_direct()?;
        cp.bach = Some(b.values());
        cp.bach_asymmetry = Some(asym);
    }
    Ok(cp)
}

impl CurvaturePoint {
    /// Largest violation of the algebraic Riemann symmetries.
    pub fn rm_symmetry_residual(&self) -> f64 {
        let r = &self.rm;
        let n = r.n();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let v = r[[a, b, c, d]];
                        worst = worst
                            .max((v + r[[b, a, c, d]]).abs())
                            .max((v + r[[a, b, d, c]]).abs())
                            .max((v - r[[c, d, a, b]]).abs())
                            .max((v + r[[a, c, d, b]] + r[[a, d, b, c]]).abs());
                    }
                }
            }
        }
        worst
    }

    /// Largest single trace of W.
    pub fn weyl_trace_residual(&self) -> f64 {
        let n = self.weyl.n();
        let mut worst: f64 = 0.0;
        for b in 0..n {
            for d in 0..n {
                let s: f64 = (0..n)
                    .flat_map(|a| (0..n).map(move |c| (a, c)))
                    .map(|(a, c)| self.ginv[[a, c]] * self.weyl[[a, b, c, d]])
                    .sum();
                worst = worst.max(s.abs());
            }
        }
        worst
    }

    pub fn trace(&self, t: &RealTensor) -> f64 {
        let n = t.n();
        (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| self.ginv[[a, b]] * t[[a, b]])
            .sum()
    }

    /// `|Rm − (W + P⊘g)|` sup.
    pub fn decomposition_residual(&self) -> f64 {
        let kn = crate::tensor::kulkarni_nomizu(&self.schouten, &self.g);
        let n = self.rm.n();
        let recon = Tensor::from_fn(n, 4, |i| self.weyl[i] + kn[i]);
        recon.max_abs_diff(&self.rm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::Chart;

    fn patch(g: [[&str; 4]; 4], domain: [[f64; 2]; 4]) -> MetricPatch {
        let chart = Chart::new(["r", "a", "b", "c"], domain).unwrap();
        MetricPatch::from_strings("t", chart, &g).unwrap()
    }

    fn round_s4() -> MetricPatch {
        patch(
            [
                ["1", "0", "0", "0"],
                ["0", "cos(r)^2", "0", "0"],
                ["0", "0", "cos(r)^2*sin(a)^2", "0"],
                ["0", "0", "0", "cos(r)^2*sin(a)^2*sin(b)^2"],
            ],
            [[0.0, 1.5], [0.1, 3.0], [0.1, 3.0], [0.0, 6.0]],
        )
    }

    #[test]
    fn polar_christoffels() {
        let p = patch(
            [["1", "0", "0", "0"], ["0", "r^2", "0", "0"], ["0", "0", "1", "0"], ["0", "0", "0", "1"]],
            [[0.0, 2.0], [0.0, 1.0], [0.0, 1.0], [0.0, 1.0]],
        );
        let geo = Geometry::at(&p, &p.point([0.7, 0.2, 0.3, 0.4]).unwrap(), 2).unwrap();
        let gam = geo.gamma.values();
        assert!((gam[[0, 1, 1]] + 0.7).abs() < 1e-14);
        assert!((gam[[1, 0, 1]] - 1.0 / 0.7).abs() < 1e-14);
        assert!((gam[[1, 1, 0]] - 1.0 / 0.7).abs() < 1e-14);
        assert!(geo.rm.values().max_abs() < 1e-13);
    }

    #[test]
    fn sphere_has_unit_sectional_curvature() {
        let p = round_s4();
        let geo = Geometry::at(&p, &p.point([0.4, 1.0, 1.2, 2.0]).unwrap(), 4).unwrap();
        let cp = geo.point();
        let g = &cp.g;
        for i in 0..4 {
            for k in 0..4 {
                for j in 0..4 {
                    for l in 0..4 {
                        let expect = g[[i, j]] * g[[k, l]] - g[[i, l]] * g[[k, j]];
                        assert!((cp.rm[[i, k, j, l]] - expect).abs() < 1e-12);
                    }
                }
            }
        }
        assert!((cp.scal - 12.0).abs() < 1e-12);
        assert!(cp.weyl.max_abs() < 1e-12);
        for i in 0..4 {
            for j in 0..4 {
                assert!((cp.schouten[[i, j]] - 0.5 * g[[i, j]]).abs() < 1e-12);
                assert!((cp.ric[[i, j]] - 3.0 * g[[i, j]]).abs() < 1e-12);
            }
        }
        let (b, asym) = geo.bach_direct().unwrap();
        assert!(b.values().max_abs() < 1e-10 && asym < 1e-10);
        assert!(geo.bach_schouten_form().unwrap().values().max_abs() < 1e-10);
        assert!(geo.bach_tracefree_form(12.0).unwrap().values().max_abs() < 1e-10);
        assert!(matches!(geo.bach_tracefree_form(0.0), Err(GeomError::NotConstantScalar { .. })));
    }

    #[test]
    fn metric_is_parallel() {
        let p = round_s4();
        let geo = Geometry::at(&p, &p.point([0.4, 1.0, 1.2, 2.0]).unwrap(), 3).unwrap();
        let dg = geo.covariant_derivative(&geo.g).unwrap();
        assert!(dg.values().max_abs() < 1e-13);
    }
}
