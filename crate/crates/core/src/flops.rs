//! Floating-point operation counter.
//!
//! With the `flop-count` feature the kernels in [`crate::normal`] and
//! [`crate::solvers`] add the number of flops they perform to a thread-local
//! counter. Without the feature every call compiles to nothing.

#[cfg(feature = "flop-count")]
use std::cell::Cell;

#[cfg(feature = "flop-count")]
thread_local! {
    static COUNTER: Cell<u64> = const { Cell::new(0) };
}

/// Adds `n` flops to the current thread's counter.
#[inline(always)]
pub fn add(n: usize) {
    #[cfg(feature = "flop-count")]
    COUNTER.with(|c| c.set(c.get() + n as u64));
    #[cfg(not(feature = "flop-count"))]
    let _ = n;
}

/// Resets the current thread's counter to zero.
pub fn reset() {
    #[cfg(feature = "flop-count")]
    COUNTER.with(|c| c.set(0));
}

/// Current value of the counter; always zero without `flop-count`.
pub fn get() -> u64 {
    #[cfg(feature = "flop-count")]
    return COUNTER.with(|c| c.get());
    #[cfg(not(feature = "flop-count"))]
    0
}

/// Whether counting is compiled in.
pub const fn enabled() -> bool {
    cfg!(feature = "flop-count")
}

/// Runs `f` and returns its result together with the flops it performed.
pub fn measure<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let before = get();
    let out = f();
    (out, get() - before)
}
