//! Worker-pool plumbing shared by the correlation engine, trainer, and
//! dataset generator.

/// Runs `f` on a pool of exactly `workers` threads, or on the ambient rayon
/// pool when `workers` is `None` (auto).
pub fn run_with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match workers {
        None => f(),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}
