//! Thread control and order-stable parallel map.
//!
//! `BH_DESKEW_THREADS` caps the worker count; `0` or `1` runs everything on
//! the calling thread. Results never depend on the thread count: work is cut
//! into fixed chunks and combined in index order.

use std::sync::OnceLock;

pub const THREADS_ENV: &str = "BH_DESKEW_THREADS";

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let n = match std::env::var(THREADS_ENV) {
            Ok(v) => v.trim().parse::<usize>().unwrap_or(0),
            Err(_) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
        };
        if n <= 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()
    })
    .as_ref()
}

/// Number of worker threads in use.
pub fn threads() -> usize {
    pool().map_or(1, |p| p.current_num_threads())
}

/// `items.iter().map(f).collect()`, possibly in parallel, output in input order.
pub fn map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    match pool() {
        None => items.iter().map(f).collect(),
        Some(p) => {
            use rayon::prelude::*;
            p.install(|| items.par_iter().map(f).collect())
        }
    }
}

/// Same as [`map`] over `0..n`.
pub fn map_range<R: Send>(n: usize, f: impl Fn(usize) -> R + Sync + Send) -> Vec<R> {
    match pool() {
        None => (0..n).map(f).collect(),
        Some(p) => {
            use rayon::prelude::*;
            p.install(|| (0..n).into_par_iter().map(f).collect())
        }
    }
}
