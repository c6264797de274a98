//! Data-parallel helpers. With the `parallel` feature disabled every call runs sequentially.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => items.par_iter().map(f).collect(),
            _ => items.iter().map(f).collect(),
        }
    }

    pub fn map_range<R, F>(self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n).into_par_iter().map(f).collect(),
            _ => (0..n).map(f).collect(),
        }
    }

    /// Map every index in `0..n` and fold the results with an associative `reduce`.
    pub fn map_reduce<R, F, G>(self, n: usize, identity: R, f: F, reduce: G) -> R
    where
        R: Send + Clone + Sync,
        F: Fn(usize) -> R + Sync + Send,
        G: Fn(R, R) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            Execution::Parallel => (0..n)
                .into_par_iter()
                .with_min_len(64)
                .map(f)
                .reduce(|| identity.clone(), &reduce),
            _ => (0..n).map(f).fold(identity, reduce),
        }
    }
}
