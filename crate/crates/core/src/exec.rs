//! Execution of per-worker phases: sequential round-robin or a persistent
//! thread pool. Both produce identical results because workers only
//! interact through messages exchanged between phases.

use rayon::prelude::*;

use crate::error::{Error, Result};

pub enum Executor {
    Sequential,
    Parallel(rayon::ThreadPool),
}

impl Executor {
    pub fn new(threads: usize) -> Result<Self> {
        if threads <= 1 {
            return Ok(Executor::Sequential);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("ifepic-worker-{i}"))
            .build()
            .map(Executor::Parallel)
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
    }

    pub fn threads(&self) -> usize {
        match self {
            Executor::Sequential => 1,
            Executor::Parallel(p) => p.current_num_threads(),
        }
    }

    /// Run `f` on every item, returning results in item order.
    pub fn map<T, R, F>(&self, items: &mut [T], f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> R + Sync + Send,
    {
        match self {
            Executor::Sequential => items.iter_mut().map(f).collect(),
            Executor::Parallel(pool) => pool.install(|| items.par_iter_mut().map(f).collect()),
        }
    }

    /// As [`Executor::map`] for fallible phases; the first error by item order wins.
    pub fn try_map<T, R, F>(&self, items: &mut [T], f: F) -> Result<Vec<R>>
    where
        T: Send,
        R: Send,
        F: Fn(&mut T) -> Result<R> + Sync + Send,
    {
        self.map(items, f).into_iter().collect()
    }
}

impl std::fmt::Debug for Executor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Executor({} threads)", self.threads())
    }
}

/// Deliver `(source, destination, payload)` messages, grouping them per
/// destination in ascending source order.
pub fn route<P>(ranks: usize, messages: Vec<(usize, usize, P)>) -> Result<Vec<Vec<(usize, P)>>> {
    let mut inbox: Vec<Vec<(usize, P)>> = (0..ranks).map(|_| Vec::new()).collect();
    for (src, dst, p) in messages {
        if dst >= ranks {
            return Err(Error::Protocol(format!(
                "rank {src} addressed non-existent rank {dst}"
            )));
        }
        inbox[dst].push((src, p));
    }
    for b in &mut inbox {
        b.sort_by_key(|(s, _)| *s);
    }
    Ok(inbox)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let mut a: Vec<u64> = (0..64).collect();
        let mut b = a.clone();
        let f = |x: &mut u64| {
            *x = x.wrapping_mul(2654435761) % 1000;
            *x + 1
        };
        let ra = Executor::Sequential.map(&mut a, f);
        let rb = Executor::new(4).unwrap().map(&mut b, f);
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }

    #[test]
    fn routing_orders_by_source() {
        let inbox = route(3, vec![(2, 0, 'c'), (1, 0, 'b'), (0, 2, 'a')]).unwrap();
        assert_eq!(inbox[0], vec![(1, 'b'), (2, 'c')]);
        assert!(inbox[1].is_empty());
        assert!(route(2, vec![(0, 5, ())]).is_err());
    }
}
