//! Execution policy for the data-parallel loops.
//!
//! Three places fan out: the row loop of the Hamiltonian matrix-vector
//! product, sweeps over independent propagation runs, and phase-space grid
//! evaluations. All of them go through [`Execution`], which maps onto rayon
//! when the `parallel` feature is enabled and onto plain iterators otherwise.
//!
//! Every parallel path computes each output element independently and writes
//! it to a fixed slot, so results are bitwise identical for any thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether a loop may be spread over the rayon pool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// `Parallel` degrades to `Sequential` when the crate was built without
    /// the `parallel` feature.
    pub fn effective(self) -> Execution {
        if cfg!(feature = "parallel") {
            self
        } else {
            Execution::Sequential
        }
    }

    pub fn is_parallel(self) -> bool {
        self.effective() == Execution::Parallel
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Order-preserving map over `0..n`.
pub fn map_range<R, F>(exec: Execution, n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Fill `out` in chunks of `chunk` elements; `f` receives the offset of the
/// chunk and the mutable chunk itself.
pub fn fill_chunks<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk = chunk.max(1);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() && out.len() > chunk {
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(k, c)| f(k * chunk, c));
        return;
    }
    let _ = exec;
    for (k, c) in out.chunks_mut(chunk).enumerate() {
        f(k * chunk, c);
    }
}

/// Run `f` on a dedicated pool of `workers` threads (0 = rayon default).
pub fn with_workers<R, F>(workers: usize, f: F) -> R
where
    F: FnOnce() -> R + Send,
    R: Send,
{
    #[cfg(feature = "parallel")]
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .expect("rayon thread pool");
        return pool.install(f);
    }
    let _ = workers;
    f()
}
