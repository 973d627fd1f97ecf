//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the normalized Taylor coefficients `∂^α f / α!` of a
//! function at a base point, for every multi-index `α` of total order up to
//! the jet's order. Coefficients live in a dense array laid out in graded
//! order (all indices of degree 0, then degree 1, ...), so the jet of order
//! `m` is a prefix of the jet of order `m + 1` and truncation is a resize.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use thiserror::Error;

/// Largest supported number of jet variables.
pub const MAX_DIM: usize = 4;
/// Hard cap on the total order of any jet.
pub const MAX_ORDER: usize = 6;
/// Order used when a caller does not ask for anything else.
pub const DEFAULT_ORDER: usize = 4;

/// Smallest divisor magnitude accepted by division.
const SINGULAR_EPS: f64 = 1e-300;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },
    #[error("dimension {0} outside 1..={MAX_DIM}")]
    DimOutOfRange(usize),
    #[error("order {0} exceeds the cap of {MAX_ORDER}")]
    OrderOutOfRange(usize),
    #[error("requested derivative of order {requested} from a jet of order {available}")]
    OrderExceeded { requested: usize, available: usize },
    #[error("operands disagree: {0}")]
    Mismatch(&'static str),
    #[error("division by a jet with value {0:e}")]
    Singular(f64),
    #[error("{func} is undefined at {value}")]
    Domain { func: &'static str, value: f64 },
}

/// Exponents of a monomial in up to four variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct MultiIndex(pub [u8; MAX_DIM]);

impl MultiIndex {
    pub fn new(exponents: [u8; MAX_DIM]) -> Self {
        Self(exponents)
    }

    pub fn zero() -> Self {
        Self([0; MAX_DIM])
    }

    /// Unit multi-index along `axis`.
    pub fn unit(axis: usize) -> Self {
        let mut e = [0; MAX_DIM];
        e[axis] = 1;
        Self(e)
    }

    pub fn order(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// `α!` as a float.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&e| factorial(e as usize)).product()
    }

    fn key(&self) -> usize {
        self.0
            .iter()
            .fold(0, |acc, &e| acc * (MAX_ORDER + 1) + e as usize)
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Binomial coefficient as a float.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of multi-indices of total order `<= order` in `dim` variables.
pub fn space_len(dim: usize, order: usize) -> usize {
    binomial(order + dim, dim).round() as usize
}

/// Index tables shared by all jets of one dimension.
#[derive(Debug)]
struct Space {
    dim: usize,
    indices: Vec<MultiIndex>,
    lookup: Vec<u16>,
    /// `(i, j, k)` with `indices[i] + indices[j] == indices[k]`, sorted by the
    /// degree of `k`.
    products: Vec<(u16, u16, u16)>,
    /// `products_upto[m]` = number of leading triples with `deg k <= m`.
    products_upto: [usize; MAX_ORDER + 1],
    /// For each axis, `(source index, target index, factor)` for `∂_axis`.
    derivative: Vec<Vec<(u16, u16, f64)>>,
}

impl Space {
    fn build(dim: usize) -> Self {
        let mut indices = Vec::new();
        for deg in 0..=MAX_ORDER {
            let mut level = Vec::new();
            enumerate_degree(dim, deg, &mut [0; MAX_DIM], 0, &mut level);
            indices.extend(level);
        }
        let degree: Vec<u8> = indices.iter().map(|a| a.order() as u8).collect();
        let mut lookup = vec![u16::MAX; (MAX_ORDER + 1).pow(MAX_DIM as u32)];
        for (i, a) in indices.iter().enumerate() {
            lookup[a.key()] = i as u16;
        }

        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if degree[i] + degree[j] > MAX_ORDER as u8 {
                    continue;
                }
                let mut s = [0u8; MAX_DIM];
                for ax in 0..MAX_DIM {
                    s[ax] = a.0[ax] + b.0[ax];
                }
                let k = lookup[MultiIndex(s).key()];
                products.push((i as u16, j as u16, k));
            }
        }
        products.sort_by_key(|&(_, _, k)| (degree[k as usize], k));
        let mut products_upto = [0; MAX_ORDER + 1];
        for (m, slot) in products_upto.iter_mut().enumerate() {
            *slot = products
                .iter()
                .take_while(|&&(_, _, k)| degree[k as usize] as usize <= m)
                .count();
        }

        let derivative = (0..dim)
            .map(|ax| {
                indices
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.0[ax] > 0)
                    .map(|(src, a)| {
                        let mut t = *a;
                        t.0[ax] -= 1;
                        (src as u16, lookup[t.key()], a.0[ax] as f64)
                    })
                    .collect()
            })
            .collect();

        Self {
            dim,
            indices,
            lookup,
            products,
            products_upto,
            derivative,
        }
    }

    fn index_of(&self, idx: &MultiIndex) -> Option<usize> {
        if idx.0[self.dim..].iter().any(|&e| e != 0) || idx.order() > MAX_ORDER {
            return None;
        }
        let k = self.lookup[idx.key()];
        (k != u16::MAX).then_some(k as usize)
    }
}

fn enumerate_degree(
    dim: usize,
    remaining: usize,
    cur: &mut [u8; MAX_DIM],
    axis: usize,
    out: &mut Vec<MultiIndex>,
) {
    if axis == dim - 1 {
        cur[axis] = remaining as u8;
        out.push(MultiIndex(*cur));
        cur[axis] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[axis] = e as u8;
        enumerate_degree(dim, remaining - e, cur, axis + 1, out);
    }
    cur[axis] = 0;
}

fn space(dim: usize) -> &'static Space {
    static SPACES: [OnceLock<Space>; MAX_DIM] = [
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
        OnceLock::new(),
    ];
    SPACES[dim - 1].get_or_init(|| Space::build(dim))
}

/// Truncated Taylor polynomial in `dim` variables.
#[derive(Clone)]
pub struct Jet {
    space: &'static Space,
    order: u8,
    coeffs: Vec<f64>,
}

impl std::fmt::Debug for Jet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Jet")
            .field("dim", &self.space.dim)
            .field("order", &self.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Self) -> bool {
        self.space.dim == other.space.dim
            && self.order == other.order
            && self.coeffs == other.coeffs
    }
}

fn check_shape(dim: usize, order: usize) -> Result<(), JetError> {
    if dim == 0 || dim > MAX_DIM {
        return Err(JetError::DimOutOfRange(dim));
    }
    if order > MAX_ORDER {
        return Err(JetError::OrderOutOfRange(order));
    }
    Ok(())
}

impl Jet {
    /// Constant jet.
    pub fn constant(value: f64, dim: usize, order: usize) -> Result<Self, JetError> {
        check_shape(dim, order)?;
        Ok(Self::constant_unchecked(value, dim, order))
    }

    pub(crate) fn constant_unchecked(value: f64, dim: usize, order: usize) -> Self {
        let mut coeffs = vec![0.0; space_len(dim, order)];
        coeffs[0] = value;
        Self {
            space: space(dim),
            order: order as u8,
            coeffs,
        }
    }

    /// Jet of the coordinate function `x^axis` at `base`.
    pub fn variable(base: &[f64], axis: usize, dim: usize, order: usize) -> Result<Self, JetError> {
        check_shape(dim, order)?;
        if axis >= dim {
            return Err(JetError::AxisOutOfRange { axis, dim });
        }
        if base.len() <= axis {
            return Err(JetError::Mismatch("base point shorter than the seeded axis"));
        }
        let mut jet = Self::constant_unchecked(base[axis], dim, order);
        if order >= 1 {
            // the degree-1 block is laid out axis by axis
            jet.coeffs[1 + axis] = 1.0;
        }
        Ok(jet)
    }

    /// Build a jet from normalized coefficients in graded order.
    pub fn from_coeffs(dim: usize, order: usize, coeffs: Vec<f64>) -> Result<Self, JetError> {
        check_shape(dim, order)?;
        if coeffs.len() != space_len(dim, order) {
            return Err(JetError::Mismatch("coefficient count does not match dim/order"));
        }
        Ok(Self {
            space: space(dim),
            order: order as u8,
            coeffs,
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            space: self.space,
            order: self.order,
            coeffs: vec![0.0; self.coeffs.len()],
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Multi-indices matching [`Jet::coeffs`] position by position.
    pub fn indices(&self) -> &'static [MultiIndex] {
        &self.space.indices[..self.coeffs.len()]
    }

    /// Normalized coefficient `∂^α f / α!`.
    pub fn coeff(&self, idx: &MultiIndex) -> Result<f64, JetError> {
        if idx.order() > self.order() {
            return Err(JetError::OrderExceeded {
                requested: idx.order(),
                available: self.order(),
            });
        }
        let k = self
            .space
            .index_of(idx)
            .ok_or(JetError::Mismatch("multi-index uses axes beyond the jet dimension"))?;
        Ok(self.coeffs[k])
    }

    /// Partial derivative `∂^α f` at the base point.
    pub fn partial(&self, idx: &MultiIndex) -> Result<f64, JetError> {
        Ok(self.coeff(idx)? * idx.factorial())
    }

    /// Largest absolute coefficient.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    /// Drop every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        let order = order.min(self.order());
        Self {
            space: self.space,
            order: order as u8,
            coeffs: self.coeffs[..space_len(self.space.dim, order)].to_vec(),
        }
    }

    /// Jet of `∂f/∂x^axis`, one order lower. A jet of order 0 yields the zero
    /// constant.
    pub fn derivative(&self, axis: usize) -> Jet {
        assert!(axis < self.space.dim, "derivative axis out of range");
        let order = self.order().saturating_sub(1);
        let len = space_len(self.space.dim, order);
        let mut coeffs = vec![0.0; len];
        if self.order > 0 {
            for &(src, dst, f) in &self.space.derivative[axis] {
                if (dst as usize) < len {
                    coeffs[dst as usize] += f * self.coeffs[src as usize];
                }
            }
        }
        Self {
            space: self.space,
            order: order as u8,
            coeffs,
        }
    }

    /// Remove the dependence on `axis` (restriction to the hyperplane through
    /// the base point orthogonal to that axis).
    pub fn restrict(&self, axis: usize) -> Jet {
        let mut out = self.clone();
        for (c, idx) in out.coeffs.iter_mut().zip(self.space.indices.iter()) {
            if idx.0[axis] > 0 {
                *c = 0.0;
            }
        }
        out
    }

    /// Antiderivative along `axis` vanishing on the hyperplane `x^axis = 0`
    /// (relative to the base point). The order is preserved, so the top
    /// degree of the result is truncated away.
    pub fn integrate(&self, axis: usize) -> Jet {
        let mut out = self.zeros_like();
        let len = self.coeffs.len();
        for &(src, dst, f) in &self.space.derivative[axis] {
            // d/dx (c x^{α}) relation inverted: c_α x^α -> c_α x^{α+e}/(α_a+1)
            if (src as usize) < len {
                out.coeffs[src as usize] += self.coeffs[dst as usize] / f;
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    pub fn add_scalar(&self, s: f64) -> Jet {
        let mut out = self.clone();
        out.coeffs[0] += s;
        out
    }

    /// `self += s * other`, truncating to the lower order if needed.
    pub fn axpy(&mut self, s: f64, other: &Jet) {
        self.align_to(other);
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a += s * b;
        }
    }

    /// `self += a * b` without allocating an intermediate product.
    pub fn add_product(&mut self, a: &Jet, b: &Jet) {
        self.fma_product(1.0, a, b);
    }

    /// `self += s * a * b`.
    pub fn fma_product(&mut self, s: f64, a: &Jet, b: &Jet) {
        let order = self.order().min(a.order()).min(b.order());
        if order < self.order() {
            *self = self.truncate(order);
        }
        let n = self.space.products_upto[order];
        let (ac, bc, out) = (&a.coeffs, &b.coeffs, &mut self.coeffs);
        for &(i, j, k) in &self.space.products[..n] {
            out[k as usize] += s * ac[i as usize] * bc[j as usize];
        }
    }

    fn align_to(&mut self, other: &Jet) {
        debug_assert_eq!(self.space.dim, other.space.dim, "jet dimension mismatch");
        if other.order < self.order {
            *self = self.truncate(other.order());
        }
    }

    fn binary_shape(a: &Jet, b: &Jet) -> (&'static Space, usize) {
        assert_eq!(a.space.dim, b.space.dim, "jet dimension mismatch");
        (a.space, a.order().min(b.order()))
    }

    fn mul_jet(a: &Jet, b: &Jet) -> Jet {
        let (sp, order) = Self::binary_shape(a, b);
        let mut out = Jet {
            space: sp,
            order: order as u8,
            coeffs: vec![0.0; space_len(sp.dim, order)],
        };
        out.fma_product(1.0, a, b);
        out
    }

    /// Multiplicative inverse by Newton iteration `y ← y (2 − b y)`, which
    /// doubles the number of correct orders per step.
    pub fn recip(&self) -> Result<Jet, JetError> {
        let b0 = self.value();
        if b0.abs() < SINGULAR_EPS || !b0.is_finite() {
            return Err(JetError::Singular(b0));
        }
        let mut y = Jet::constant_unchecked(1.0 / b0, self.dim(), self.order());
        let mut correct = 1usize;
        while correct <= self.order() {
            let by = self * &y;
            let two_minus = (-&by).add_scalar(2.0);
            y = &y * &two_minus;
            correct *= 2;
        }
        Ok(y)
    }

    pub fn checked_div(&self, other: &Jet) -> Result<Jet, JetError> {
        Ok(self * &other.recip()?)
    }

    /// Evaluate `Σ_k c_k (self − self.value)^k`.
    fn compose_series(&self, series: &[f64]) -> Jet {
        let mut delta = self.clone();
        delta.coeffs[0] = 0.0;
        let mut acc = Jet::constant_unchecked(series[self.order()], self.dim(), self.order());
        for k in (0..self.order()).rev() {
            acc = &acc * &delta;
            acc.coeffs[0] += series[k];
        }
        acc
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let series: Vec<f64> = (0..=self.order()).map(|k| e / factorial(k)).collect();
        self.compose_series(&series)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let series: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let series: Vec<f64> = (0..=self.order())
            .map(|k| cycle[k % 4] / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn sinh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<f64> = (0..=self.order())
            .map(|k| if k % 2 == 0 { s } else { c } / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn cosh(&self) -> Jet {
        let (s, c) = (self.value().sinh(), self.value().cosh());
        let series: Vec<f64> = (0..=self.order())
            .map(|k| if k % 2 == 0 { c } else { s } / factorial(k))
            .collect();
        self.compose_series(&series)
    }

    pub fn tan(&self) -> Result<Jet, JetError> {
        if self.value().cos().abs() < 1e-300 {
            return Err(JetError::Domain {
                func: "tan",
                value: self.value(),
            });
        }
        self.sin().checked_div(&self.cos())
    }

    pub fn tanh(&self) -> Jet {
        self.sinh()
            .checked_div(&self.cosh())
            .expect("cosh never vanishes")
    }

    pub fn ln(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(JetError::Domain { func: "log", value: a });
        }
        let series: Vec<f64> = (0..=self.order())
            .map(|k| match k {
                0 => a.ln(),
                _ => {
                    let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
                    sign / (k as f64 * a.powi(k as i32))
                }
            })
            .collect();
        Ok(self.compose_series(&series))
    }

    pub fn sqrt(&self) -> Result<Jet, JetError> {
        let a = self.value();
        if !(a > 0.0) {
            return Err(JetError::Domain { func: "sqrt", value: a });
        }
        Ok(self.real_power(0.5))
    }

    /// `self^p` for a non-integer (or large) exponent; needs a positive value.
    fn real_power(&self, p: f64) -> Jet {
        let a = self.value();
        let mut series = Vec::with_capacity(self.order() + 1);
        let mut falling = 1.0;
        for k in 0..=self.order() {
            series.push(falling / factorial(k) * a.powf(p - k as f64));
            falling *= p - k as f64;
        }
        self.compose_series(&series)
    }

    /// `self^p` for a constant exponent. Integer exponents work for any sign
    /// of the value (negative ones need a nonzero value).
    pub fn powf(&self, p: f64) -> Result<Jet, JetError> {
        if !p.is_finite() {
            return Err(JetError::Domain { func: "pow", value: p });
        }
        if p.fract() == 0.0 && p.abs() <= 64.0 {
            let n = p.abs() as u32;
            let base = if p < 0.0 { self.recip()? } else { self.clone() };
            return Ok(base.powi(n));
        }
        if !(self.value() > 0.0) {
            return Err(JetError::Domain {
                func: "pow",
                value: self.value(),
            });
        }
        Ok(self.real_power(p))
    }

    /// Integer power by repeated squaring.
    pub fn powi(&self, mut n: u32) -> Jet {
        let mut result = Jet::constant_unchecked(1.0, self.dim(), self.order());
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = &result * &base;
            }
            n >>= 1;
            if n > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Substitute `z = args` into this jet (a polynomial in its variables
    /// around the base point). Each argument must have zero value, i.e. be a
    /// displacement from the base point.
    pub fn compose(&self, args: &[Jet]) -> Result<Jet, JetError> {
        if args.len() != self.dim() {
            return Err(JetError::Mismatch("composition needs one argument per variable"));
        }
        let first = &args[0];
        if args.iter().any(|a| a.dim() != first.dim() || a.order() != first.order()) {
            return Err(JetError::Mismatch("composition arguments disagree in shape"));
        }
        if args.iter().any(|a| a.value() != 0.0) {
            return Err(JetError::Mismatch("composition arguments must vanish at the base"));
        }
        let powers = MonomialPowers::new(args, self.order());
        let mut out = Jet::constant_unchecked(0.0, first.dim(), first.order());
        for (c, mono) in self.coeffs.iter().zip(powers.monomials.iter()) {
            if *c != 0.0 {
                out.axpy(*c, mono);
            }
        }
        Ok(out)
    }
}

/// All monomials `z^α` (in the graded order of the source space) for a set of
/// displacement jets `z`.
pub(crate) struct MonomialPowers {
    pub monomials: Vec<Jet>,
}

impl MonomialPowers {
    pub(crate) fn new(args: &[Jet], order: usize) -> Self {
        let dim = args.len();
        let sp = space(dim);
        let n = space_len(dim, order);
        let mut monomials: Vec<Jet> = Vec::with_capacity(n);
        monomials.push(Jet::constant_unchecked(1.0, args[0].dim(), args[0].order()));
        for idx in &sp.indices[1..n] {
            // peel off the first nonzero axis; the predecessor has lower degree
            // and therefore already sits in `monomials`.
            let ax = idx.0.iter().position(|&e| e > 0).unwrap();
            let mut prev = *idx;
            prev.0[ax] -= 1;
            let p = sp.index_of(&prev).unwrap();
            let next = &monomials[p] * &args[ax];
            monomials.push(next);
        }
        Self { monomials }
    }

    /// Evaluate `f(base + z)` from the jet of `f` at the base.
    pub(crate) fn apply(&self, f: &Jet) -> Jet {
        let mut out = Jet::constant_unchecked(0.0, self.monomials[0].dim(), self.monomials[0].order());
        for (c, mono) in f.coeffs().iter().zip(&self.monomials) {
            if *c != 0.0 {
                out.axpy(*c, mono);
            }
        }
        out
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.coeffs.iter_mut().for_each(|c| *c = -*c);
        self
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let (_, order) = Jet::binary_shape(self, rhs);
        let mut out = self.truncate(order);
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let (_, order) = Jet::binary_shape(self, rhs);
        let mut out = self.truncate(order);
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Jet::mul_jet(self, rhs)
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        &self + &rhs
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        &self - &rhs
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        &self * &rhs
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        self.axpy(1.0, rhs);
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        self.axpy(-1.0, rhs);
    }
}

/// Binary arithmetic selector for [`jet_arith`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
}

/// Checked binary arithmetic: both operands must share dimension and order.
pub fn jet_arith(op: ArithOp, a: &Jet, b: &Jet) -> Result<Jet, JetError> {
    if a.dim() != b.dim() {
        return Err(JetError::Mismatch("dimension"));
    }
    if a.order() != b.order() {
        return Err(JetError::Mismatch("order"));
    }
    Ok(match op {
        ArithOp::Add => a + b,
        ArithOp::Sub => a - b,
        ArithOp::Mul => a * b,
        ArithOp::Div => a.checked_div(b)?,
    })
}

/// Elementary functions available to expressions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Elementary {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    PowConst,
}

impl Elementary {
    pub fn name(self) -> &'static str {
        match self {
            Elementary::Sin => "sin",
            Elementary::Cos => "cos",
            Elementary::Tan => "tan",
            Elementary::Exp => "exp",
            Elementary::Log => "log",
            Elementary::Sqrt => "sqrt",
            Elementary::Sinh => "sinh",
            Elementary::Cosh => "cosh",
            Elementary::Tanh => "tanh",
            Elementary::PowConst => "pow",
        }
    }
}

/// Compose an elementary function with a jet. `exponent` is only read for
/// [`Elementary::PowConst`].
pub fn jet_elementary(f: Elementary, a: &Jet, exponent: Option<f64>) -> Result<Jet, JetError> {
    match f {
        Elementary::Sin => Ok(a.sin()),
        Elementary::Cos => Ok(a.cos()),
        Elementary::Tan => a.tan(),
        Elementary::Exp => Ok(a.exp()),
        Elementary::Log => a.ln(),
        Elementary::Sqrt => a.sqrt(),
        Elementary::Sinh => Ok(a.sinh()),
        Elementary::Cosh => Ok(a.cosh()),
        Elementary::Tanh => Ok(a.tanh()),
        Elementary::PowConst => {
            let p = exponent.ok_or(JetError::Domain {
                func: "pow",
                value: f64::NAN,
            })?;
            a.powf(p)
        }
    }
}

/// Convenience alias for [`Jet::variable`].
pub fn jet_variable(base: &[f64], axis: usize, dim: usize, order: usize) -> Result<Jet, JetError> {
    Jet::variable(base, axis, dim, order)
}

/// `∂^α f` at the base point.
pub fn jet_partial(a: &Jet, idx: &MultiIndex) -> Result<f64, JetError> {
    a.partial(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn mi(e: [u8; 4]) -> MultiIndex {
        MultiIndex(e)
    }

    #[test]
    fn seed_layout() {
        let x = Jet::variable(&[2.0, 0.0, 0.0, 0.0], 0, 4, 2).unwrap();
        assert_eq!(x.value(), 2.0);
        assert_eq!(x.coeff(&mi([1, 0, 0, 0])).unwrap(), 1.0);
        let others: f64 = x.coeffs()[2..].iter().map(|c| c.abs()).sum();
        assert_eq!(others, 0.0);

        let w = Jet::variable(&[0.0; 4], 3, 4, 1).unwrap();
        assert_eq!(w.value(), 0.0);
        assert_eq!(w.partial(&mi([0, 0, 0, 1])).unwrap(), 1.0);
    }

    #[test]
    fn seed_rejects_bad_axis_and_order() {
        assert!(matches!(
            Jet::variable(&[0.0; 4], 5, 4, 2),
            Err(JetError::AxisOutOfRange { .. })
        ));
        assert!(matches!(
            Jet::variable(&[0.0; 4], 0, 4, 7),
            Err(JetError::OrderOutOfRange(7))
        ));
        assert!(Jet::variable(&[0.0; 4], 0, 5, 2).is_err());
    }

    #[test]
    fn square_of_coordinate() {
        let x = Jet::variable(&[2.0], 0, 1, 2).unwrap();
        let sq = &x * &x;
        assert_eq!(sq.coeffs(), &[4.0, 4.0, 1.0]);
        assert_eq!(sq.partial(&mi([2, 0, 0, 0])).unwrap(), 2.0);
    }

    #[test]
    fn sin_cos_product_matches_half_sin_double() {
        // sin x cos x = sin(2x)/2 = x - 2x^3/3 + ...
        let x = Jet::variable(&[0.0], 0, 1, 3).unwrap();
        let p = &x.sin() * &x.cos();
        assert_relative_eq!(p.coeffs()[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(p.coeffs()[3], -2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn self_division_is_identity() {
        let x = Jet::variable(&[3.0, 1.0], 0, 2, 4).unwrap();
        let y = Jet::variable(&[3.0, 1.0], 1, 2, 4).unwrap();
        let a = &(&x * &y).exp() + &x;
        let q = jet_arith(ArithOp::Div, &a, &a).unwrap();
        assert_relative_eq!(q.value(), 1.0, epsilon = 1e-14);
        assert!(q.coeffs()[1..].iter().all(|c| c.abs() < 1e-12));
    }

    #[test]
    fn division_by_zero_value_fails() {
        let z = Jet::constant(0.0, 2, 3).unwrap();
        let one = Jet::constant(1.0, 2, 3).unwrap();
        assert!(matches!(one.checked_div(&z), Err(JetError::Singular(_))));
    }

    #[test]
    fn elementary_examples() {
        let zero = Jet::constant(0.0, 4, 4).unwrap();
        let e = zero.exp();
        assert_eq!(e.value(), 1.0);
        assert!(e.coeffs()[1..].iter().all(|&c| c == 0.0));

        let x = Jet::variable(&[0.0], 0, 1, 4).unwrap();
        let c = x.cos();
        let want = [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0];
        for (got, want) in c.coeffs().iter().zip(want) {
            assert_relative_eq!(*got, want, epsilon = 1e-16);
        }

        let four = Jet::constant(4.0, 3, 2).unwrap();
        let two = four.sqrt().unwrap();
        assert_eq!(two.value(), 2.0);

        assert!(matches!(
            Jet::constant(-1.0, 1, 2).unwrap().ln(),
            Err(JetError::Domain { func: "log", .. })
        ));
        assert!(matches!(
            Jet::constant(0.0, 1, 2).unwrap().sqrt(),
            Err(JetError::Domain { func: "sqrt", .. })
        ));
    }

    #[test]
    fn negative_base_integer_power() {
        let x = Jet::variable(&[-2.0], 0, 1, 3).unwrap();
        let c = x.powf(3.0).unwrap();
        // (x-2 shifted) x^3 at -2: -8, 12, -6, 1
        assert_eq!(c.coeffs(), &[-8.0, 12.0, -6.0, 1.0]);
        assert!(x.powf(0.5).is_err());
        assert!(x.powf(f64::INFINITY).is_err());
    }

    #[test]
    fn mixed_partials_of_sin_sum() {
        let base = [0.0; 4];
        let a = Jet::variable(&base, 0, 4, 3).unwrap();
        let b = Jet::variable(&base, 1, 4, 3).unwrap();
        let s = (&a + &b).sin();
        assert_relative_eq!(s.partial(&mi([1, 1, 0, 0])).unwrap(), 0.0, epsilon = 1e-16);
        assert_relative_eq!(s.partial(&mi([1, 0, 0, 0])).unwrap(), 1.0, epsilon = 1e-16);
        assert_relative_eq!(s.partial(&mi([2, 1, 0, 0])).unwrap(), -1.0, epsilon = 1e-15);
        assert!(matches!(
            s.partial(&mi([2, 2, 0, 0])),
            Err(JetError::OrderExceeded { .. })
        ));
    }

    #[test]
    fn derivative_and_integral_invert() {
        let base = [0.3, -0.2, 0.1, 0.5];
        let x: Vec<Jet> = (0..4).map(|k| Jet::variable(&base, k, 4, 5).unwrap()).collect();
        let f = (&(&x[0] * &x[1]) + &x[2].sin()).exp();
        let mut g = f.derivative(2).integrate(2);
        // integrate() drops the x2-independent part; add it back from f
        g += &f.restrict(2);
        let f4 = f.truncate(4);
        for (a, b) in g.truncate(4).coeffs().iter().zip(f4.coeffs()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-13, max_relative = 1e-12);
        }
    }

    #[test]
    fn composition_with_shift() {
        // f(z) = exp(z0) around 0 composed with z0 = u0 + u1 gives exp(u0+u1)
        let base = [0.0; 2];
        let z0 = Jet::variable(&base, 0, 2, 4).unwrap().exp();
        let u0 = Jet::variable(&base, 0, 2, 4).unwrap();
        let u1 = Jet::variable(&base, 1, 2, 4).unwrap();
        let arg = &u0 + &u1;
        let zero = Jet::constant(0.0, 2, 4).unwrap();
        let composed = z0.compose(&[arg.clone(), zero]).unwrap();
        let direct = arg.exp();
        for (a, b) in composed.coeffs().iter().zip(direct.coeffs()) {
            assert_relative_eq!(*a, *b, epsilon = 1e-14);
        }
    }

    #[test]
    fn space_sizes() {
        assert_eq!(space_len(4, 4), 70);
        assert_eq!(space_len(4, 6), 210);
        assert_eq!(space_len(3, 2), 10);
        assert_eq!(space(4).indices.len(), 210);
    }
}
