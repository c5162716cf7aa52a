//! Order-preserving map over independent jobs.

/// Applies `f` to every item, in parallel unless `jobs == 1` or the
/// `parallel` feature is off. `jobs == 0` picks the thread count
/// automatically. Results keep the order of `items`.
pub(crate) fn map<T, R, F>(items: &[T], jobs: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if jobs != 1 {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        return pool.install(|| items.par_iter().map(&f).collect());
    }
    let _ = jobs;
    items.iter().map(f).collect()
}
