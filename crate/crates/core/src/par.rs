//! Data-parallel helpers.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run the
//! same closures sequentially. Every helper writes each output element from
//! exactly one closure call, so results are bit-identical either way.

/// Below this many output elements the sequential path is always taken.
pub const PARALLEL_THRESHOLD: usize = 4096;

/// `out[i] = f(i)` for every index.
#[cfg(feature = "parallel")]
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    use rayon::prelude::*;
    if out.len() < PARALLEL_THRESHOLD {
        out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    } else {
        out.par_iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn fill_indexed<F>(out: &mut [f64], f: F)
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    out.iter_mut().enumerate().for_each(|(i, o)| *o = f(i));
}

/// Runs `f(row_index, row)` over consecutive rows of length `width`.
#[cfg(feature = "parallel")]
pub fn for_each_row<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    use rayon::prelude::*;
    if out.len() < PARALLEL_THRESHOLD {
        out.chunks_mut(width)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    } else {
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(r, row)| f(r, row));
    }
}

#[cfg(not(feature = "parallel"))]
pub fn for_each_row<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    out.chunks_mut(width)
        .enumerate()
        .for_each(|(r, row)| f(r, row));
}

/// Collects `f(i)` for `i in 0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn collect_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn collect_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..n).map(f).collect()
}

/// Maps independent work items (sweep grid points, trials) in order.
#[cfg(feature = "parallel")]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Whether this build dispatches to rayon.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers_preserve_order() {
        let mut out = vec![0.0; 10_000];
        fill_indexed(&mut out, |i| i as f64 * 0.5);
        assert!(out.iter().enumerate().all(|(i, v)| *v == i as f64 * 0.5));

        let mut rows = vec![0.0; 100 * 64];
        for_each_row(&mut rows, 64, |r, row| {
            row.iter_mut().for_each(|v| *v = r as f64)
        });
        assert_eq!(rows[64 * 37 + 5], 37.0);

        let v = collect_indexed(1000, |i| i * i);
        assert_eq!(v[999], 999 * 999);
        assert_eq!(map_items(&[1, 2, 3], |x| x + 1), vec![2, 3, 4]);
    }
}
