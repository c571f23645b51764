//! Execution strategy for the data-parallel inner loops (particle
//! evolution, measurement accumulation, per-cell fitting, candidate
//! rollouts). With the `parallel` feature the work runs on rayon; the
//! sequential fallback is always available and produces identical results
//! because every loop owns disjoint output slots in a fixed order.

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExecMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

impl Default for ExecMode {
    fn default() -> Self {
        #[cfg(feature = "parallel")]
        {
            ExecMode::Parallel
        }
        #[cfg(not(feature = "parallel"))]
        {
            ExecMode::Sequential
        }
    }
}

pub(crate) fn map_indexed<R, F>(mode: ExecMode, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    match mode {
        ExecMode::Sequential => (0..n).map(f).collect(),
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
    }
}

pub(crate) fn for_each_mut<T, F>(mode: ExecMode, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync + Send,
{
    match mode {
        ExecMode::Sequential => {
            for (i, item) in items.iter_mut().enumerate() {
                f(i, item);
            }
        }
        #[cfg(feature = "parallel")]
        ExecMode::Parallel => {
            use rayon::prelude::*;
            items.par_iter_mut().enumerate().for_each(|(i, item)| f(i, item));
        }
    }
}
