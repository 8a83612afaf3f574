//! Order-stable parallel map over a slice.

/// Worker cap: `OODBENCH_THREADS` if set to a positive integer, otherwise the
/// number of available cores.
pub fn worker_threads() -> usize {
    if let Ok(v) = std::env::var("OODBENCH_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            if n >= 1 {
                return n;
            }
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Applies `f` to every item, in parallel, returning results in input order.
///
/// `f` must be pure for outputs to be independent of the thread count; every
/// caller in this crate satisfies that by construction (per-sample scoring
/// with per-sample seeds).
pub fn parallel_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let n = items.len();
    let threads = worker_threads().min(n);
    if threads <= 1 {
        return items.iter().map(f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut out: Vec<Option<R>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (t, out_chunk) in out.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (j, slot) in out_chunk.iter_mut().enumerate() {
                    *slot = Some(f(&items[t * chunk + j]));
                }
            });
        }
    });
    out.into_iter()
        .map(|r| r.expect("worker filled every slot"))
        .collect()
}
