//! Data-parallel helpers.
//!
//! Every hot loop in the crate (document featurization, cross-validation
//! folds, batch scoring) goes through [`map`] or [`map_indexed`]. With the
//! `parallel` feature these fan out over the rayon pool; without it, or with
//! [`ExecMode::Sequential`], they run in order on the calling thread. Output
//! order always matches input order, so results are identical either way.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecMode {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

impl ExecMode {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

pub fn map<T, R, F>(mode: ExecMode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}

pub fn map_indexed<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}
