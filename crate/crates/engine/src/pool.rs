use rayon::prelude::*;

/// Maps `f` over `items` on a dedicated pool of `workers` threads. Results
/// come back in input order regardless of completion order.
pub fn run_ordered<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    match rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build() {
        Ok(pool) => pool.install(|| items.par_iter().enumerate().map(|(i, x)| f(i, x)).collect()),
        Err(e) => {
            log::warn!("thread pool unavailable ({e}); running sequentially");
            items.iter().enumerate().map(|(i, x)| f(i, x)).collect()
        }
    }
}
