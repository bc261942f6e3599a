//! Order-preserving data-parallel maps.
//!
//! Every parallel inner loop in the crate (scan pixels, sensing patches,
//! saturation sweeps) is an indexed map collected in index order, so the
//! result never depends on scheduling. With the `parallel` feature (default)
//! the maps run on rayon; without it they are plain sequential loops.
//! [`Exec::Sequential`] forces the sequential path at runtime, which is what
//! the benchmark suite uses to compare the two.

/// Execution strategy for a data-parallel loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    #[default]
    Auto,
    /// Always run on the current thread.
    Sequential,
}

impl Exec {
    /// Name of the strategy actually used, for run metadata.
    pub fn mode_name(self) -> &'static str {
        match self {
            Exec::Auto if cfg!(feature = "parallel") => "parallel",
            _ => "sequential",
        }
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<T, F>(exec: Exec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        Exec::Sequential => map_indexed_seq(n, f),
        Exec::Auto => map_indexed_auto(n, f),
    }
}

/// Sequential reference implementation of [`map_indexed`].
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

#[cfg(feature = "parallel")]
fn map_indexed_auto<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_indexed_auto<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    map_indexed_seq(n, f)
}
