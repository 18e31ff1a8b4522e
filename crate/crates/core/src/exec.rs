//! Page- and item-level fan-out.
//!
//! With the `parallel` feature (default) work runs on a rayon pool sized by
//! the configured concurrency limit. Without it, or with
//! [`Execution::Sequential`], items are processed in order on the calling
//! thread. Results always come back in input order.

/// How per-item work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Up to `n` items in flight at once.
    Parallel(usize),
}

impl Execution {
    pub fn with_limit(limit: usize) -> Self {
        if limit <= 1 {
            Execution::Sequential
        } else {
            Execution::Parallel(limit)
        }
    }

    pub fn limit(self) -> usize {
        match self {
            Execution::Sequential => 1,
            Execution::Parallel(n) => n.max(1),
        }
    }
}

impl Default for Execution {
    fn default() -> Self {
        Execution::Parallel(4)
    }
}

/// Runs `f` inside a pool sized for `exec`, so that nested [`map`] calls
/// share the same concurrency limit.
pub fn scoped<R: Send>(exec: Execution, f: impl FnOnce() -> R + Send) -> R {
    #[cfg(feature = "parallel")]
    if let Execution::Parallel(n) = exec {
        match rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build() {
            Ok(pool) => return pool.install(f),
            Err(e) => log::warn!("falling back to sequential execution: {e}"),
        }
    }
    let _ = exec;
    f()
}

/// Maps `f` over `items`, preserving order.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if matches!(exec, Execution::Parallel(n) if n > 1) && items.len() > 1 {
        use rayon::prelude::*;
        return items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect();
    }
    let _ = exec;
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved_in_both_modes() {
        let items: Vec<u64> = (0..200).collect();
        let seq = map(Execution::Sequential, &items, |i, x| (i as u64) * 1000 + x);
        let par = scoped(Execution::Parallel(4), || {
            map(Execution::Parallel(4), &items, |i, x| (i as u64) * 1000 + x)
        });
        assert_eq!(seq, par);
    }

    #[test]
    fn limit_of_one_is_sequential() {
        assert_eq!(Execution::with_limit(1), Execution::Sequential);
        assert_eq!(Execution::with_limit(0).limit(), 1);
        assert_eq!(Execution::with_limit(8).limit(), 8);
    }
}
