//! Tensor-product Gauss–Legendre rules on chart boxes and on the boundary
//! face. Gauss nodes are interior, so coordinate seams on the box faces are
//! never evaluated.

use gauss_quad::GaussLegendre;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::metric::Chart;

#[derive(Debug, Clone, Serialize)]
pub struct QuadratureRule {
    pub n: usize,
    pub domain: [[f64; 2]; 4],
    /// Per-axis `(node, weight)` pairs mapped to the domain.
    #[serde(skip)]
    axes: [Vec<(f64, f64)>; 4],
}

/// Gauss–Legendre nodes and weights on `[a, b]`, sorted by node.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    if n < 2 {
        return Err(GeomError::InvalidParameter(format!("quadrature needs n >= 2, got {n}")));
    }
    let rule = GaussLegendre::new(n).map_err(|e| GeomError::InvalidParameter(e.to_string()))?;
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    let mut pts: Vec<(f64, f64)> = rule.as_node_weight_pairs().iter().map(|&(x, w)| (c + h * x, h * w)).collect();
    pts.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(pts)
}

impl QuadratureRule {
    pub fn new(chart: &Chart, n: usize) -> Result<Self> {
        Self::on_box(chart.domain, n)
    }

    pub fn on_box(domain: [[f64; 2]; 4], n: usize) -> Result<Self> {
        let axes = [0, 1, 2, 3].map(|a| gauss_legendre(n, domain[a][0], domain[a][1]));
        let [a0, a1, a2, a3] = axes;
        Ok(Self {
            n,
            domain,
            axes: [a0?, a1?, a2?, a3?],
        })
    }

    /// Same node count on a sub-box (for integrands with known support).
    pub fn restricted(&self, domain: [[f64; 2]; 4]) -> Result<Self> {
        Self::on_box(domain, self.n)
    }

    pub fn doubled(&self) -> Result<Self> {
        Self::on_box(self.domain, 2 * self.n)
    }

    pub fn volume(&self) -> f64 {
        self.domain.iter().map(|[a, b]| b - a).product()
    }

    /// Interior nodes with product weights, in lexicographic order.
    pub fn nodes(&self) -> Vec<([f64; 4], f64)> {
        let mut out = Vec::with_capacity(self.n.pow(4));
        for &(x0, w0) in &self.axes[0] {
            for &(x1, w1) in &self.axes[1] {
                for &(x2, w2) in &self.axes[2] {
                    for &(x3, w3) in &self.axes[3] {
                        out.push(([x0, x1, x2, x3], w0 * w1 * w2 * w3));
                    }
                }
            }
        }
        out
    }

    /// Nodes on the face `x⁰ = 0` (the tangential part of the rule).
    pub fn boundary_nodes(&self) -> Vec<([f64; 4], f64)> {
        let mut out = Vec::with_capacity(self.n.pow(3));
        for &(x1, w1) in &self.axes[1] {
            for &(x2, w2) in &self.axes[2] {
                for &(x3, w3) in &self.axes[3] {
                    out.push(([0.0, x1, x2, x3], w1 * w2 * w3));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_measure() {
        let r = QuadratureRule::on_box([[0.0, 1.0], [0.0, 2.0], [-1.0, 1.0], [0.0, 0.5]], 5).unwrap();
        let s: f64 = r.nodes().iter().map(|p| p.1).sum();
        assert!((s - 2.0).abs() < 1e-13);
        assert!(r.nodes().iter().all(|p| p.1 > 0.0));
        let b: f64 = r.boundary_nodes().iter().map(|p| p.1).sum();
        assert!((b - 2.0).abs() < 1e-13);
    }

    #[test]
    fn exact_for_polynomials() {
        let pts = gauss_legendre(4, 0.0, 2.0).unwrap();
        // degree 7 is integrated exactly by 4 nodes
        let s: f64 = pts.iter().map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 256.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_tiny_rules() {
        assert!(gauss_legendre(1, 0.0, 1.0).is_err());
    }
}
