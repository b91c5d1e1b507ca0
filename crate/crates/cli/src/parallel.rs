//! Order-preserving parallel map over read-only data.
//!
//! Items are split into contiguous chunks, one scoped thread per chunk, and
//! the per-chunk outputs are concatenated in chunk order. The result is
//! identical to a sequential map for any thread count, so `--threads` never
//! changes what a command prints.

/// Applies `f` to every item, using up to `threads` worker threads.
pub fn map_chunked<T, R, F>(items: &[T], threads: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let threads = threads.max(1).min(items.len().max(1));
    if threads == 1 {
        return items.iter().map(f).collect();
    }
    let chunk_len = items.len().div_ceil(threads);
    let mut out = Vec::with_capacity(items.len());
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(chunk_len)
            .map(|chunk| scope.spawn(|| chunk.iter().map(&f).collect::<Vec<R>>()))
            .collect();
        for handle in handles {
            out.extend(handle.join().expect("worker panicked"));
        }
    });
    out
}
