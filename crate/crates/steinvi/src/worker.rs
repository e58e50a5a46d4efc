//! Shared-memory worker pool with deterministic work assignment.
//!
//! Each parallel phase splits its items into contiguous chunks, one per
//! worker, and joins all workers before the next phase begins (the join is
//! the all-gather barrier). Every item is computed independently from
//! read-only shared state, and all reductions elsewhere in the crate run in
//! fixed item order, so results are bitwise identical for any worker count.

/// Applies `f` to every item, in parallel over `workers` threads.
///
/// `f` receives the global item index. With `workers <= 1` the loop runs
/// inline on the calling thread.
pub fn for_each_indexed<T, F>(workers: usize, items: &mut [T], f: F)
where
    T: Send,
    F: Fn(usize, &mut T) + Sync,
{
    let len = items.len();
    if len == 0 {
        return;
    }
    let workers = workers.max(1).min(len);
    if workers == 1 {
        for (i, item) in items.iter_mut().enumerate() {
            f(i, item);
        }
        return;
    }
    let chunk = len.div_ceil(workers);
    std::thread::scope(|scope| {
        for (ci, chunk_items) in items.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = ci * chunk;
                for (j, item) in chunk_items.iter_mut().enumerate() {
                    f(base + j, item);
                }
            });
        }
    });
}

/// Fills a fresh `Vec` by evaluating `f` at every index in parallel.
pub fn collect_indexed<T, F>(workers: usize, len: usize, init: T, f: F) -> Vec<T>
where
    T: Send + Clone,
    F: Fn(usize) -> T + Sync,
{
    let mut out = vec![init; len];
    for_each_indexed(workers, &mut out, |i, slot| *slot = f(i));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_serial_for_any_worker_count() {
        let serial: Vec<usize> = (0..17).map(|i| i * i).collect();
        for workers in [1, 2, 3, 4, 8, 32] {
            let out = collect_indexed(workers, 17, 0usize, |i| i * i);
            assert_eq!(out, serial, "workers={workers}");
        }
    }

    #[test]
    fn empty_input_is_fine() {
        let mut items: Vec<u8> = Vec::new();
        for_each_indexed(4, &mut items, |_, _| unreachable!());
    }
}
