//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) work is spread over the rayon global
//! pool; without it, or when [`Execution::Sequential`] is requested, the same
//! closures run on the calling thread. Output order never depends on the
//! execution mode.

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }

    /// Parallelism hint for faer kernels.
    pub(crate) fn faer_par(self) -> faer::Par {
        #[cfg(feature = "parallel")]
        if self.is_parallel() && rayon::current_num_threads() > 1 {
            return faer::Par::rayon(0);
        }
        faer::Par::Seq
    }
}

/// Evaluates `f(i)` for `i in 0..len`, collecting results in index order.
pub fn map_indices<T, F>(exec: Execution, len: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return (0..len).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..len).map(f).collect()
}

/// Fills `out` in chunks of `chunk` elements; `f(chunk_index, chunk)`.
pub fn for_each_chunk_mut<T, F>(exec: Execution, out: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = exec;
    out.chunks_mut(chunk).enumerate().for_each(|(i, c)| f(i, c));
}

/// Caps the global pool. Returns an error if the pool was already built.
#[cfg(feature = "parallel")]
pub fn init_threads(threads: usize) -> Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}

#[cfg(not(feature = "parallel"))]
pub fn init_threads(_threads: usize) -> Result<(), String> {
    Ok(())
}
