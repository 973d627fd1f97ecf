//! Plain-float curvature through second order, used by the quadrature
//! integrands where only values of Γ, Rm and W are needed.

use crate::error::{GeomError, Result};
use crate::jet::MultiIndex;
use crate::linalg;
use crate::tensor::JetTensor;

pub type M4 = [[f64; 4]; 4];
pub type T3 = [[[f64; 4]; 4]; 4];
pub type T4 = [[[[f64; 4]; 4]; 4]; 4];

#[derive(Debug, Clone)]
pub struct PointCurvature {
    pub g: M4,
    pub ginv: M4,
    pub sqrt_det: f64,
    /// `Γ^a_{bc}` as `[a][b][c]`.
    pub gamma: T3,
    pub rm: T4,
    pub ric: M4,
    pub scal: f64,
    pub schouten: M4,
    pub weyl: T4,
}

fn second(j: &crate::jet::Jet, c: usize, d: usize) -> f64 {
    let mut e = [0u8; 4];
    e[c] += 1;
    e[d] += 1;
    j.partial(&MultiIndex(e)).unwrap_or(0.0)
}

impl PointCurvature {
    /// From metric jets of order ≥ 2 seeded on all four axes.
    pub fn from_jets(g: &JetTensor) -> Result<Self> {
        if g.order() < 2 {
            return Err(GeomError::InsufficientOrder {
                what: "pointwise curvature",
                need: 2,
                have: g.order(),
            });
        }
        let mut gv = [[0.0; 4]; 4];
        let mut dg = [[[0.0; 4]; 4]; 4];
        let mut ddg = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in a..4 {
                let j = &g[[a, b]];
                let c = j.coeffs();
                gv[a][b] = c[0];
                gv[b][a] = c[0];
                for e in 0..4 {
                    dg[a][b][e] = c[1 + e];
                    dg[b][a][e] = c[1 + e];
                    for f in e..4 {
                        let v = second(j, e, f);
                        ddg[a][b][e][f] = v;
                        ddg[a][b][f][e] = v;
                        ddg[b][a][e][f] = v;
                        ddg[b][a][f][e] = v;
                    }
                }
            }
        }
        let det = linalg::det4(&gv);
        let ginv = linalg::invert(&gv).ok_or(GeomError::Singular("metric inversion"))?;

        let mut low = [[[0.0; 4]; 4]; 4];
        let mut dlow = [[[[0.0; 4]; 4]; 4]; 4];
        for d in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    low[d][b][c] = 0.5 * (dg[d][c][b] + dg[d][b][c] - dg[b][c][d]);
                    for e in 0..4 {
                        dlow[d][b][c][e] = 0.5 * (ddg[d][c][b][e] + ddg[d][b][c][e] - ddg[b][c][d][e]);
                    }
                }
            }
        }
        // ∂_e g^{ad} = −g^{ap} ∂_e g_{pq} g^{qd}
        let mut dginv = [[[0.0; 4]; 4]; 4];
        for e in 0..4 {
            let mut tmp = [[0.0; 4]; 4];
            for a in 0..4 {
                for q in 0..4 {
                    tmp[a][q] = (0..4).map(|p| ginv[a][p] * dg[p][q][e]).sum();
                }
            }
            for a in 0..4 {
                for d in 0..4 {
                    dginv[a][d][e] = -(0..4).map(|q| tmp[a][q] * ginv[q][d]).sum::<f64>();
                }
            }
        }
        let mut gamma = [[[0.0; 4]; 4]; 4];
        let mut dgamma = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in b..4 {
                    let mut s = 0.0;
                    let mut ds = [0.0; 4];
                    for d in 0..4 {
                        s += ginv[a][d] * low[d][b][c];
                        for e in 0..4 {
                            ds[e] += dginv[a][d][e] * low[d][b][c] + ginv[a][d] * dlow[d][b][c][e];
                        }
                    }
                    gamma[a][b][c] = s;
                    gamma[a][c][b] = s;
                    dgamma[a][b][c] = ds;
                    dgamma[a][c][b] = ds;
                }
            }
        }
        let mut up = [[[[0.0; 4]; 4]; 4]; 4];
        for rho in 0..4 {
            for sigma in 0..4 {
                for mu in 0..4 {
                    for nu in mu + 1..4 {
                        let mut s = dgamma[rho][nu][sigma][mu] - dgamma[rho][mu][sigma][nu];
                        for l in 0..4 {
                            s += gamma[rho][mu][l] * gamma[l][nu][sigma] - gamma[rho][nu][l] * gamma[l][mu][sigma];
                        }
                        up[rho][sigma][mu][nu] = s;
                        up[rho][sigma][nu][mu] = -s;
                    }
                }
            }
        }
        let mut rm = [[[[0.0; 4]; 4]; 4]; 4];
        for rho in 0..4 {
            for sigma in 0..4 {
                for mu in 0..4 {
                    for nu in 0..4 {
                        rm[rho][sigma][mu][nu] = (0..4).map(|l| gv[rho][l] * up[l][sigma][mu][nu]).sum();
                    }
                }
            }
        }
        let mut ric = [[0.0; 4]; 4];
        for b in 0..4 {
            for d in 0..4 {
                let mut s = 0.0;
                for a in 0..4 {
                    for c in 0..4 {
                        s += ginv[a][c] * rm[a][b][c][d];
                    }
                }
                ric[b][d] = s;
            }
        }
        let scal: f64 = (0..4).flat_map(|b| (0..4).map(move |d| (b, d))).map(|(b, d)| ginv[b][d] * ric[b][d]).sum();
        let mut schouten = [[0.0; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                schouten[a][b] = 0.5 * (ric[a][b] - scal / 6.0 * gv[a][b]);
            }
        }
        let (p, gg) = (&schouten, &gv);
        let mut weyl = [[[[0.0; 4]; 4]; 4]; 4];
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        let kn = p[a][c] * gg[b][d] + p[b][d] * gg[a][c] - p[a][d] * gg[b][c] - p[b][c] * gg[a][d];
                        weyl[a][b][c][d] = rm[a][b][c][d] - kn;
                    }
                }
            }
        }
        Ok(Self {
            g: gv,
            ginv,
            sqrt_det: det.sqrt(),
            gamma,
            rm,
            ric,
            scal,
            schouten,
            weyl,
        })
    }

    /// `W^{abcd} W_{abcd}`.
    pub fn weyl_norm_sq(&self) -> f64 {
        let gi = &self.ginv;
        let w = &self.weyl;
        // raise one slot at a time
        let mut t = *w;
        for slot in 0..4 {
            let mut out = [[[[0.0; 4]; 4]; 4]; 4];
            for a in 0..4 {
                for b in 0..4 {
                    for c in 0..4 {
                        for d in 0..4 {
                            let idx = [a, b, c, d];
                            let mut s = 0.0;
                            for k in 0..4 {
                                let mut j = idx;
                                j[slot] = k;
                                s += gi[idx[slot]][k] * t[j[0]][j[1]][j[2]][j[3]];
                            }
                            out[a][b][c][d] = s;
                        }
                    }
                }
            }
            t = out;
        }
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                for c in 0..4 {
                    for d in 0..4 {
                        s += t[a][b][c][d] * w[a][b][c][d];
                    }
                }
            }
        }
        s
    }

    /// Boundary quantities at a point of `x⁰ = 0`.
    pub fn boundary(&self) -> Result<PointBoundary> {
        let g = &self.g;
        let h: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| g[i + 1][j + 1]));
        let hinv = linalg::invert(&h).ok_or(GeomError::Singular("induced metric"))?;
        let det_h = linalg::det3(&h);
        if !(det_h > 0.0) {
            return Err(GeomError::Singular("induced metric"));
        }
        let g00 = self.ginv[0][0];
        let s = g00.sqrt();
        let nu: [f64; 4] = std::array::from_fn(|a| -self.ginv[a][0] / s);
        let l: [[f64; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|j| self.gamma[0][i + 1][j + 1] / s));
        let mut hh = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                hh += hinv[i][j] * l[i][j];
            }
        }
        let mut w0 = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let mut v = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        v += self.weyl[i + 1][a][j + 1][b] * nu[a] * nu[b];
                    }
                }
                w0[i][j] = v;
            }
        }
        // W_{i0j0} L^{ij}
        let mut wl = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let mut lup = 0.0;
                for a in 0..3 {
                    for b in 0..3 {
                        lup += hinv[i][a] * hinv[j][b] * l[a][b];
                    }
                }
                wl += w0[i][j] * lup;
            }
        }
        Ok(PointBoundary {
            h,
            hinv,
            sqrt_det_h: det_h.sqrt(),
            nu,
            l,
            mean_curvature: hh,
            weyl_normal: w0,
            weyl_dot_l: wl,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PointBoundary {
    pub h: [[f64; 3]; 3],
    pub hinv: [[f64; 3]; 3],
    pub sqrt_det_h: f64,
    pub nu: [f64; 4],
    pub l: [[f64; 3]; 3],
    pub mean_curvature: f64,
    /// `W_{i0j0}` with the outward normal in the 0 slots.
    pub weyl_normal: [[f64; 3]; 3],
    pub weyl_dot_l: f64,
}
