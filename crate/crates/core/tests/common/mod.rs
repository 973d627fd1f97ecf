//! Expression corpus and finite-difference oracle shared by the jet tests and
//! the acceptance run.
#![allow(dead_code)]

use bdry_geom::expr::{parse_with, ALL_AXES};
use bdry_geom::jet::MultiIndex;

pub const COORDS: [&str; 4] = ["x", "y", "z", "w"];

/// Smooth expressions in x,y,z,w used for the finite-difference comparison.
pub const CORPUS: [&str; 50] = [
    "x*y*z*w",
    "x^2 + y^3 - z*w",
    "sin(x)*cos(y)",
    "exp(x + 2*y - z)",
    "log(2 + x^2 + y^2)",
    "sqrt(1 + x^2 + z^2)",
    "tanh(x - w)",
    "1/(1 + x^2 + y^2 + z^2 + w^2)",
    "sin(x*y) + cos(z*w)",
    "exp(-x^2 - y^2)*cos(z)",
    "(x + y)^4",
    "(1 + x)^-2",
    "(2 + y*z)^1.5",
    "sinh(x)*cosh(y)",
    "tan(0.3*x + 0.2*y)",
    "x*exp(y)*sin(z)",
    "log(3 + sin(x) + cos(w))",
    "sqrt(4 + x*y*z)",
    "cos(x)^2 - sin(y)^2",
    "exp(sin(x + z))",
    "x^3*y - 2*x*z^2 + w^4",
    "(x - y)/(2 + z^2)",
    "sin(exp(0.5*x))",
    "cosh(x*w)/(1 + y^2)",
    "tanh(x)*tanh(y)*tanh(z)",
    "exp(x)*exp(y)*exp(-w)",
    "log(1 + exp(x + y))",
    "sqrt(1 + sin(x)^2)*z",
    "(1 + x^2)^0.25",
    "sin(x)*sin(y)*sin(z)*sin(w)",
    "cos(x + y + z + w)",
    "x/(1.5 + cos(y))",
    "exp(-(x^2 + y^2 + z^2 + w^2)/2)",
    "y*log(2 + x) - z*sqrt(2 + w)",
    "sinh(0.5*x + 0.5*y)^2",
    "cos(2*x)*exp(0.3*z)",
    "(x*y + z*w)^3",
    "1/sqrt(1 + x^2 + w^2)",
    "sin(x^2 + y)",
    "exp(x*y*z)",
    "tan(x)*cos(y)",
    "log(cosh(x + w))",
    "x^2*y^2*z^2",
    "sqrt(2 + x)*sqrt(3 + y)",
    "cos(x)*cosh(y) - sin(z)*sinh(w)",
    "(1 + x + y^2)/(2 + z + w^2)",
    "exp(cos(x))*sin(y + w)",
    "tanh(x*y + z)",
    "(3 + sin(x*z))^-0.5",
    "w*exp(-x)*log(2 + y^2) + z",
];

pub const P: [f64; 4] = [0.3, -0.2, 0.45, 0.1];

/// ∂^α f at `x` from products of central stencils with step `h`.
fn central(f: &dyn Fn(&[f64; 4]) -> f64, x: &[f64; 4], alpha: &MultiIndex, h: f64) -> f64 {
    let stencil = |k: u8| -> Vec<(f64, f64)> {
        match k {
            0 => vec![(0.0, 1.0)],
            1 => vec![(1.0, 0.5 / h), (-1.0, -0.5 / h)],
            2 => vec![(1.0, 1.0 / (h * h)), (0.0, -2.0 / (h * h)), (-1.0, 1.0 / (h * h))],
            3 => {
                let s = 0.5 / (h * h * h);
                vec![(2.0, s), (1.0, -2.0 * s), (-1.0, 2.0 * s), (-2.0, -s)]
            }
            _ => unreachable!(),
        }
    };
    let s: Vec<Vec<(f64, f64)>> = (0..4).map(|a| stencil(alpha.0[a])).collect();
    let mut sum = 0.0;
    for a in &s[0] {
        for b in &s[1] {
            for c in &s[2] {
                for d in &s[3] {
                    let y = [x[0] + a.0 * h, x[1] + b.0 * h, x[2] + c.0 * h, x[3] + d.0 * h];
                    sum += a.1 * b.1 * c.1 * d.1 * f(&y);
                }
            }
        }
    }
    sum
}

/// Richardson extrapolation of the O(h²) central stencils.
fn richardson(f: &dyn Fn(&[f64; 4]) -> f64, x: &[f64; 4], alpha: &MultiIndex, h: f64) -> f64 {
    (4.0 * central(f, x, alpha, h) - central(f, x, alpha, 2.0 * h)) / 3.0
}

/// Worst error of jet partials of order ≤ 3 against Richardson differences
/// with step 1e-3 over the corpus, as `(error, expression, multi-index)`.
/// Many partials vanish identically, so the error is relative to
/// max(|exact|, 1); third-order stencils carry ~1e-7 roundoff.
pub fn jet_fd_worst() -> (f64, &'static str, [u8; 4]) {
    let h = 1e-3;
    let mut worst: (f64, &str, [u8; 4]) = (0.0, "", [0; 4]);
    for src in CORPUS {
        let e = parse_with(src, &COORDS).unwrap();
        let j = e.eval_jet(&P, 3, ALL_AXES).unwrap();
        let f = |y: &[f64; 4]| e.eval(y).unwrap();
        for alpha in j.indices() {
            let exact = j.partial(alpha).unwrap();
            let fd = if alpha.order() == 0 { f(&P) } else { richardson(&f, &P, alpha, h) };
            let r = (exact - fd).abs() / exact.abs().max(1.0);
            if r > worst.0 {
                worst = (r, src, alpha.0);
            }
        }
    }
    worst
}
