//! Flat storage for covariant tensors over an `n`-dimensional index range.

use std::ops::{Index, IndexMut};

use crate::jet::Jet;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    n: usize,
    rank: usize,
    data: Vec<T>,
}

impl<T: Clone> Tensor<T> {
    pub fn filled(n: usize, rank: usize, value: T) -> Self {
        Self {
            n,
            rank,
            data: vec![value; n.pow(rank as u32)],
        }
    }
}

impl<T> Tensor<T> {
    /// Build from a function of the multi-index (row-major, last index fastest).
    pub fn from_fn(n: usize, rank: usize, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let len = n.pow(rank as u32);
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; rank];
        for flat in 0..len {
            let mut r = flat;
            for slot in (0..rank).rev() {
                idx[slot] = r % n;
                r /= n;
            }
            data.push(f(&idx));
        }
        Self { n, rank, data }
    }

    pub fn try_from_fn<E>(
        n: usize,
        rank: usize,
        mut f: impl FnMut(&[usize]) -> Result<T, E>,
    ) -> Result<Self, E> {
        let len = n.pow(rank as u32);
        let mut data = Vec::with_capacity(len);
        let mut idx = vec![0usize; rank];
        for flat in 0..len {
            let mut r = flat;
            for slot in (0..rank).rev() {
                idx[slot] = r % n;
                r /= n;
            }
            data.push(f(&idx)?);
        }
        Ok(Self { n, rank, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn flat(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.rank);
        idx.iter().fold(0, |acc, &i| {
            debug_assert!(i < self.n);
            acc * self.n + i
        })
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Tensor<U> {
        Tensor {
            n: self.n,
            rank: self.rank,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub fn get(&self, idx: &[usize]) -> &T {
        &self.data[self.flat(idx)]
    }
}

impl<T> Index<&[usize]> for Tensor<T> {
    type Output = T;
    fn index(&self, idx: &[usize]) -> &T {
        &self.data[self.flat(idx)]
    }
}

impl<T> IndexMut<&[usize]> for Tensor<T> {
    fn index_mut(&mut self, idx: &[usize]) -> &mut T {
        let f = self.flat(idx);
        &mut self.data[f]
    }
}

macro_rules! fixed_index {
    ($($k:literal),+) => {$(
        impl<T> Index<[usize; $k]> for Tensor<T> {
            type Output = T;
            fn index(&self, idx: [usize; $k]) -> &T {
                &self.data[self.flat(&idx)]
            }
        }
        impl<T> IndexMut<[usize; $k]> for Tensor<T> {
            fn index_mut(&mut self, idx: [usize; $k]) -> &mut T {
                let f = self.flat(&idx);
                &mut self.data[f]
            }
        }
    )+};
}
fixed_index!(1, 2, 3, 4, 5, 6);

pub type JetTensor = Tensor<Jet>;
pub type RealTensor = Tensor<f64>;

impl Tensor<Jet> {
    pub fn values(&self) -> RealTensor {
        self.map(Jet::value)
    }

    pub fn truncate(&self, order: usize) -> JetTensor {
        self.map(|j| j.truncate(order))
    }

    pub fn order(&self) -> usize {
        self.data.iter().map(Jet::order).min().unwrap_or(0)
    }
}

impl Tensor<f64> {
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &RealTensor) -> f64 {
        assert_eq!((self.n, self.rank), (other.n, other.rank));
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Full contraction `T^{a..} S_{a..}` with all indices raised by `ginv`.
    pub fn norm_sq_with(&self, ginv: &RealTensor) -> f64 {
        let n = self.n;
        let mut raised = self.data.clone();
        let mut buf = vec![0.0; raised.len()];
        let stride: Vec<usize> = (0..self.rank).map(|s| n.pow((self.rank - 1 - s) as u32)).collect();
        for st in &stride {
            for (flat, out) in buf.iter_mut().enumerate() {
                let i = (flat / st) % n;
                let base = flat - i * st;
                *out = (0..n).map(|k| ginv[[i, k]] * raised[base + k * st]).sum();
            }
            std::mem::swap(&mut raised, &mut buf);
        }
        raised.iter().zip(&self.data).map(|(a, b)| a * b).sum()
    }
}

/// Kulkarni–Nomizu product of two symmetric 2-tensors.
pub fn kulkarni_nomizu(a: &RealTensor, b: &RealTensor) -> RealTensor {
    assert!(a.rank() == 2 && b.rank() == 2 && a.n() == b.n());
    Tensor::from_fn(a.n(), 4, |i| {
        let (p, q, r, s) = (i[0], i[1], i[2], i[3]);
        a[[p, r]] * b[[q, s]] + a[[q, s]] * b[[p, r]] - a[[p, s]] * b[[q, r]] - a[[q, r]] * b[[p, s]]
    })
}

/// Jet version of [`kulkarni_nomizu`].
pub fn kulkarni_nomizu_jets(a: &JetTensor, b: &JetTensor) -> JetTensor {
    assert!(a.rank() == 2 && b.rank() == 2 && a.n() == b.n());
    Tensor::from_fn(a.n(), 4, |i| {
        let (p, q, r, s) = (i[0], i[1], i[2], i[3]);
        let mut out = &a[[p, r]] * &b[[q, s]];
        out.add_product(&a[[q, s]], &b[[p, r]]);
        out.fma_product(-1.0, &a[[p, s]], &b[[q, r]]);
        out.fma_product(-1.0, &a[[q, r]], &b[[p, s]]);
        out
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_row_major() {
        let t = Tensor::from_fn(3, 2, |i| (10 * i[0] + i[1]) as f64);
        assert_eq!(t[[2, 1]], 21.0);
        assert_eq!(t.data()[5], 12.0);
    }

    #[test]
    fn half_g_kn_g_is_unit_curvature() {
        let g = Tensor::from_fn(4, 2, |i| if i[0] == i[1] { 1.0 } else { 0.0 });
        let r = kulkarni_nomizu(&g, &g).map(|v| 0.5 * v);
        let d = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
        for i in 0..4 {
            for k in 0..4 {
                for j in 0..4 {
                    for l in 0..4 {
                        assert_eq!(r[[i, k, j, l]], d(i, j) * d(k, l) - d(i, l) * d(k, j));
                    }
                }
            }
        }
        let zero = g.map(|_| 0.0);
        assert_eq!(kulkarni_nomizu(&zero, &g).max_abs(), 0.0);
    }

    #[test]
    fn norm_uses_inverse_metric() {
        let ginv = Tensor::from_fn(2, 2, |i| if i[0] == i[1] { 0.25 } else { 0.0 });
        let t = Tensor::from_fn(2, 2, |_| 1.0);
        assert!((t.norm_sq_with(&ginv) - 4.0 * 0.0625).abs() < 1e-15);
    }
}
