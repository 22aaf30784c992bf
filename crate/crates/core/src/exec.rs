//! Sequential or rayon-backed evaluation of independent work items.
//!
//! Results always come back in index order, so reductions performed afterwards
//! are bit-identical whichever mode ran them. Without the `parallel` feature,
//! [`Execution::Parallel`] falls back to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// `(0..n).map(f).collect()`, possibly in parallel.
    pub fn map_indices<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self == Execution::Parallel {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }
}

/// Pairwise (cascade) summation; the grouping depends only on the length.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2..=8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_in_order() {
        let f = |i: usize| (i as f64).sqrt();
        assert_eq!(
            Execution::Sequential.map_indices(100, f),
            Execution::Parallel.map_indices(100, f)
        );
    }

    #[test]
    fn pairwise_sum_matches_exact_integers() {
        let v: Vec<f64> = (1..=1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&v), 500500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }
}
