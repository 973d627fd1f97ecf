use bdry_geom::expr::parse_with;
use bdry_geom::jet::{space_len, Jet, MultiIndex};
use bdry_geom::metric::invert_metric;
use bdry_geom::tensor::Tensor;
use proptest::prelude::*;

mod common;
use common::{jet_fd_worst, COORDS, CORPUS};


fn jet(order: usize, coeffs: Vec<f64>) -> Jet {
    Jet::from_coeffs(4, order, coeffs).unwrap()
}

fn coeffs(order: usize, range: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-range..range, space_len(4, order))
}

fn int_coeffs(order: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((-5i32..=5).prop_map(f64::from), space_len(4, order))
}

fn binom(n: u8, k: u8) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

/// `Σ_{β≤α} C(α,β) ∂^β a ∂^{α−β} b`.
fn leibniz(a: &Jet, b: &Jet, alpha: &MultiIndex) -> f64 {
    let mut sum = 0.0;
    for beta in a.indices() {
        if (0..4).any(|k| beta.0[k] > alpha.0[k]) {
            continue;
        }
        let rest = MultiIndex(std::array::from_fn(|k| alpha.0[k] - beta.0[k]));
        let c: f64 = (0..4).map(|k| binom(alpha.0[k], beta.0[k])).product();
        sum += c * a.partial(beta).unwrap() * b.partial(&rest).unwrap();
    }
    sum
}

fn rel(a: f64, b: f64, scale: f64) -> f64 {
    (a - b).abs() / scale.max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn leibniz_exact_on_integer_jets(a in int_coeffs(4), b in int_coeffs(4)) {
        let (a, b) = (jet(4, a), jet(4, b));
        let p = &a * &b;
        for alpha in p.indices() {
            prop_assert_eq!(p.partial(alpha).unwrap(), leibniz(&a, &b, alpha));
        }
    }

    #[test]
    fn leibniz_on_real_jets(a in coeffs(4, 2.0), b in coeffs(4, 2.0)) {
        let (a, b) = (jet(4, a), jet(4, b));
        let p = &a * &b;
        for alpha in p.indices() {
            let want = leibniz(&a, &b, alpha);
            let scale = a.indices().iter().map(|i| a.partial(i).unwrap().abs()).fold(0.0, f64::max)
                * b.indices().iter().map(|i| b.partial(i).unwrap().abs()).fold(0.0, f64::max);
            prop_assert!(rel(p.partial(alpha).unwrap(), want, want.abs().max(scale * 1e-3)) < 1e-12);
        }
    }

    #[test]
    fn ring_laws(a in coeffs(3, 1.0), b in coeffs(3, 1.0), c in coeffs(3, 1.0)) {
        let (a, b, c) = (jet(3, a), jet(3, b), jet(3, c));
        let close = |x: &Jet, y: &Jet| {
            let s = x.max_abs().max(y.max_abs()).max(1e-300);
            (x - y).max_abs() / s
        };
        prop_assert!(close(&(&a + &b), &(&b + &a)) < 1e-13);
        prop_assert!(close(&(&a * &b), &(&b * &a)) < 1e-13);
        prop_assert!(close(&(&(&a + &b) + &c), &(&a + &(&b + &c))) < 1e-13);
        prop_assert!(close(&(&(&a * &b) * &c), &(&a * &(&b * &c))) < 1e-13);
        prop_assert!(close(&(&a * &(&b + &c)), &(&(&a * &b) + &(&a * &c))) < 1e-13);
    }

    #[test]
    fn reciprocal_is_inverse(mut a in coeffs(4, 1.0), v in 0.5f64..2.0, neg in any::<bool>()) {
        a[0] = if neg { -v } else { v };
        let a = jet(4, a);
        let one = &a * &a.recip().unwrap();
        let id = Jet::constant(1.0, 4, 4).unwrap();
        prop_assert!((&one - &id).max_abs() < 1e-12 * a.max_abs().max(1.0).powi(5));
    }

    #[test]
    fn double_inversion(
        entries in prop::collection::vec(coeffs(3, 0.15), 10),
        diag in prop::collection::vec(1.0f64..3.0, 4),
    ) {
        let idx = |i: usize, j: usize| {
            let (a, b) = (i.min(j), i.max(j));
            a * 4 - a * (a + 1) / 2 + b
        };
        let g = Tensor::from_fn(4, 2, |k| {
            let (i, j) = (k[0], k[1]);
            let mut c = entries[idx(i, j)].clone();
            c[0] = if i == j { diag[i] } else { 0.3 * c[0] };
            jet(3, c)
        });
        let back = invert_metric(&invert_metric(&g).unwrap()).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((&back[[i, j]] - &g[[i, j]]).max_abs() < 1e-11);
            }
        }
    }
}

#[test]
fn jets_match_richardson_differences() {
    let (worst, src, alpha) = jet_fd_worst();
    assert!(worst < 1e-6, "worst relative {worst:.3e} for {src} at {alpha:?}");
}

const ROUND_TRIP: [&str; 30] = [
    "x",
    "-x",
    "--x",
    "x - -y",
    "2.5e-3*x",
    "1e10 + y",
    "x^2*y^3",
    "(x^2)^3",
    "-x^2",
    "(-x)^2",
    "x^-1.5",
    "x/y/z",
    "x/(y/z)",
    "x - (y - z)",
    "(x - y) - z",
    "x*(y + z)*w",
    "sin(cos(tan(x)))",
    "exp(-x)*log(1 + y)",
    "sqrt(x^2 + y^2)",
    "sinh(x) + cosh(y) - tanh(z)",
    "((((x))))",
    "1/(1 + x)^2",
    "-(x + y)*-(z)",
    "3 - 2 - 1",
    "x*y^2/z",
    "0.1 + 0.2",
    "exp(x)^0.5",
    "-sin(x)^2",
    "w*(x - (y*(z - w)))",
    "x^0.5*y",
];

#[test]
fn printed_expressions_reparse_identically() {
    let names: Vec<String> = COORDS.iter().map(|s| s.to_string()).collect();
    for src in ROUND_TRIP.iter().chain(CORPUS.iter()) {
        let e = parse_with(src, &COORDS).unwrap();
        let printed = e.display(&names).to_string();
        let again = parse_with(&printed, &COORDS).unwrap_or_else(|err| panic!("{src} -> {printed}: {err}"));
        assert_eq!(e, again, "{src} -> {printed}");
    }
}

#[test]
fn only_literal_exponents_parse() {
    assert!(parse_with("2^x", &COORDS).is_err());
    assert!(parse_with("x^(y)", &COORDS).is_err());
}

#[test]
fn jet_partials_of_order_above_cap_rejected() {
    assert!(Jet::constant(1.0, 4, 7).is_err());
    let j = Jet::constant(1.0, 4, 2).unwrap();
    assert!(j.partial(&MultiIndex([3, 0, 0, 0])).is_err());
}
