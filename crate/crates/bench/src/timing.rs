//! Wall-clock timing of kernels.

use std::hint::black_box;
use std::time::{Duration, Instant};

use lowrank_core::matrix::{set_threads, threads};

use crate::report::median;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelTiming {
    pub median: Duration,
    pub min: Duration,
    pub max: Duration,
}

/// Threads available to the process.
pub fn available_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Pins products to one thread (`on`) or to every available core.
pub fn set_deterministic(on: bool) {
    set_threads(if on { 1 } else { available_threads() });
}

/// Restores the product thread count on drop.
struct ThreadGuard(usize);

impl Drop for ThreadGuard {
    fn drop(&mut self) {
        set_threads(self.0);
    }
}

/// Runs `op` `warmups` times unmeasured, then `reps` times against the
/// monotonic clock. Timing always uses every available core, whatever the
/// deterministic setting; the previous setting is restored afterwards.
pub fn time_kernel<T>(mut op: impl FnMut() -> T, warmups: usize, reps: usize) -> KernelTiming {
    assert!(reps >= 1, "time_kernel needs at least one repetition");
    let _guard = ThreadGuard(threads());
    set_threads(available_threads());
    for _ in 0..warmups {
        black_box(op());
    }
    let mut secs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        black_box(op());
        secs.push(t.elapsed().as_secs_f64());
    }
    let min = secs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = secs.iter().copied().fold(0.0, f64::max);
    KernelTiming {
        median: Duration::from_secs_f64(median(&secs)),
        min: Duration::from_secs_f64(min),
        max: Duration::from_secs_f64(max),
    }
}
