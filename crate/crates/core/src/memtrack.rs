//! Working-set accounting for tensor buffers.
//!
//! Every [`Tensor`](crate::Tensor) registers its buffer here on creation and
//! releases it on drop. Counters are per thread, so concurrent callers do not
//! see each other's allocations and a single-threaded measurement is exact.

use std::cell::Cell;

thread_local! {
    static LIVE: Cell<u64> = const { Cell::new(0) };
    static PEAK: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn on_alloc(bytes: u64) {
    LIVE.with(|live| {
        let now = live.get() + bytes;
        live.set(now);
        PEAK.with(|peak| {
            if now > peak.get() {
                peak.set(now);
            }
        });
    });
}

pub(crate) fn on_free(bytes: u64) {
    LIVE.with(|live| live.set(live.get().saturating_sub(bytes)));
}

/// Bytes currently held by tensors on this thread.
pub fn live_bytes() -> u64 {
    LIVE.with(Cell::get)
}

/// High-water mark since the last [`reset_peak`].
pub fn peak_bytes() -> u64 {
    PEAK.with(Cell::get)
}

/// Restart high-water tracking from the current live total.
pub fn reset_peak() {
    let live = live_bytes();
    PEAK.with(|peak| peak.set(live));
}

/// Run `f` and report the extra tensor bytes it held at its high-water mark,
/// measured above whatever was live when it started.
pub fn measure_peak<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let outer_peak = peak_bytes();
    let base = live_bytes();
    reset_peak();
    let out = f();
    let extra = peak_bytes().saturating_sub(base);
    PEAK.with(|peak| peak.set(peak.get().max(outer_peak)));
    (out, extra)
}
