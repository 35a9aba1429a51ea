//! Deterministic data parallelism over grid nodes.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::Result;

static THREADS: AtomicUsize = AtomicUsize::new(1);

/// Sets the worker count used by grid loops (at least 1).
pub fn set_threads(n: usize) {
    THREADS.store(n.max(1), Ordering::Relaxed);
}

pub fn threads() -> usize {
    THREADS.load(Ordering::Relaxed)
}

/// Maps `f` over `items` in contiguous chunks, one per worker, and returns the
/// results in input order. The first error in input order wins.
pub(crate) fn map_ordered<T, F>(items: &[usize], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    let workers = threads().min(items.len()).max(1);
    if workers == 1 {
        return items.iter().map(|&i| f(i)).collect();
    }
    let chunk = items.len().div_ceil(workers);
    let parts: Vec<Result<Vec<T>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| {
                let f = &f;
                scope.spawn(move || part.iter().map(|&i| f(i)).collect::<Result<Vec<T>>>())
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    let mut out = Vec::with_capacity(items.len());
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}
