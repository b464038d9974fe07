//! Row-parallel helpers. With the `parallel` feature the work is spread over
//! the rayon pool; without it, or under [`Execution::Sequential`], the same
//! closures run in order on the calling thread. Every output element is
//! written by exactly one closure call, so both paths are bit-identical.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    #[default]
    Parallel,
}

impl Execution {
    /// True when work will actually be handed to rayon.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Calls `f(row, chunk)` for every `row_len`-sized chunk of `out`.
pub fn for_each_row<T, F>(exec: Execution, out: &mut [T], row_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    assert!(row_len > 0);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        out.par_chunks_mut(row_len)
            .enumerate()
            .for_each(|(row, chunk)| f(row, chunk));
        return;
    }
    let _ = exec;
    for (row, chunk) in out.chunks_mut(row_len).enumerate() {
        f(row, chunk);
    }
}

/// Two output buffers filled in lockstep, row by row.
pub fn for_each_row2<A, B, F>(
    exec: Execution,
    a: &mut [A],
    a_row: usize,
    b: &mut [B],
    b_row: usize,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync + Send,
{
    assert!(a_row > 0 && b_row > 0);
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        a.par_chunks_mut(a_row)
            .zip(b.par_chunks_mut(b_row))
            .enumerate()
            .for_each(|(row, (ca, cb))| f(row, ca, cb));
        return;
    }
    let _ = exec;
    for (row, (ca, cb)) in a.chunks_mut(a_row).zip(b.chunks_mut(b_row)).enumerate() {
        f(row, ca, cb);
    }
}
