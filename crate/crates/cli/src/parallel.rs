//! Index-stable worker pool for embarrassingly parallel replicates.
//!
//! Results land in a slot per index, so the output is identical for any
//! thread count; every job derives its randomness from its own index.

/// Apply `f` to `0..count`, splitting across up to `threads` workers.
pub fn indexed_map<T, F>(count: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = threads.max(1).min(count.max(1));
    if workers <= 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(workers);
    let mut slots: Vec<Option<T>> = (0..count).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (w, slot_chunk) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (offset, slot) in slot_chunk.iter_mut().enumerate() {
                    *slot = Some(f(w * chunk + offset));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every index is assigned to exactly one worker"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_is_thread_count_invariant() {
        let serial = indexed_map(101, 1, |i| i * i);
        for threads in [2, 3, 8, 64] {
            assert_eq!(indexed_map(101, threads, |i| i * i), serial);
        }
        assert!(indexed_map(0, 4, |i| i).is_empty());
    }
}
