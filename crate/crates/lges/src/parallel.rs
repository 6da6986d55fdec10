//! Thin shims that fan work out through rayon when the `parallel` feature is
//! on and fall back to plain iterators otherwise. Reducers take total orders,
//! so results do not depend on scheduling.

use std::cmp::Ordering;

#[cfg(feature = "parallel")]
pub(crate) fn filter_map_best<I, T, F, C>(items: &[I], f: F, cmp: C) -> Option<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> Option<T> + Sync,
    C: Fn(&T, &T) -> Ordering + Sync,
{
    use rayon::prelude::*;
    items.par_iter().filter_map(|i| f(i)).min_by(|a, b| cmp(a, b))
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn filter_map_best<I, T, F, C>(items: &[I], f: F, cmp: C) -> Option<T>
where
    F: Fn(&I) -> Option<T>,
    C: Fn(&T, &T) -> Ordering,
{
    items.iter().filter_map(|i| f(i)).min_by(|a, b| cmp(a, b))
}

#[cfg(feature = "parallel")]
pub(crate) fn map_vec<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    use rayon::prelude::*;
    items.into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn map_vec<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    F: Fn(I) -> T,
{
    items.into_iter().map(f).collect()
}
