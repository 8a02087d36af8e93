//! Order-preserving fan-out over a fixed number of worker threads.

use rayon::prelude::*;

pub struct WorkerPool {
    pool: Option<rayon::ThreadPool>,
}

impl WorkerPool {
    /// `workers <= 1` runs everything on the calling thread.
    pub fn new(workers: usize) -> Self {
        let pool = (workers > 1).then(|| {
            rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("failed to start worker threads")
        });
        WorkerPool { pool }
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    /// Applies `f` to every item; output order equals input order.
    pub fn map<T, U, F>(&self, items: Vec<T>, f: F) -> Vec<U>
    where
        T: Send,
        U: Send,
        F: Fn(T) -> U + Sync + Send,
    {
        match &self.pool {
            None => items.into_iter().map(f).collect(),
            Some(p) => p.install(|| items.into_par_iter().map(f).collect()),
        }
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        WorkerPool::new(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_kept() {
        for w in [1, 2, 4] {
            let pool = WorkerPool::new(w);
            let out = pool.map((0..1000).collect(), |x: u64| x * x);
            assert_eq!(out, (0..1000).map(|x: u64| x * x).collect::<Vec<_>>());
        }
    }
}
