//! Data-parallel map over independent work items. With the `parallel`
//! feature the work runs on the rayon pool; otherwise, or when
//! [`Execution::Sequential`] is requested, it runs in order on the caller.
//! Results always come back in index order, so any reduction over them is
//! independent of the execution mode.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// Whether parallel execution is actually available in this build.
    pub fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

pub fn try_map<T, F>(exec: Execution, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Pairwise (cascade) summation; the association order depends only on the
/// length of the input.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    const LEAF: usize = 8;
    if v.len() <= LEAF {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree() {
        let f = |i: usize| Ok((i as f64).sqrt());
        let a = try_map(Execution::Sequential, 1000, f).unwrap();
        let b = try_map(Execution::Parallel, 1000, f).unwrap();
        assert_eq!(pairwise_sum(&a).to_bits(), pairwise_sum(&b).to_bits());
    }

    #[test]
    fn pairwise_is_accurate() {
        let v = vec![0.1; 1 << 16];
        assert!((pairwise_sum(&v) - 6553.6).abs() < 1e-9);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<()>> = try_map(Execution::Parallel, 10, |i| {
            if i == 7 {
                Err(crate::GeomError::Singular("seven"))
            } else {
                Ok(())
            }
        });
        assert!(r.is_err());
    }
}
