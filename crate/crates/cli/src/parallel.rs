//! Order-preserving parallel map over independent work items.

use std::num::NonZeroUsize;
use std::thread;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "ZENO_THREADS";

pub fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<NonZeroUsize>().ok())
        .or_else(|| thread::available_parallelism().ok())
        .map_or(1, NonZeroUsize::get)
}

/// Evaluates `f(0), …, f(count − 1)` on up to [`thread_count`] threads and
/// returns the results in index order. Each item is computed exactly as it
/// would be sequentially, so the output does not depend on the thread count.
pub fn map_indexed<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_count().min(count).max(1);
    if threads == 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(threads);
    thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let f = &f;
                scope.spawn(move || {
                    let end = ((t + 1) * chunk).min(count);
                    (t * chunk..end).map(f).collect::<Vec<T>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("worker thread panicked"))
            .collect()
    })
}
