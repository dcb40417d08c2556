//! Deliberate corruption of backward rules, for mutation-testing the
//! gradient checker. Thread-local so concurrent tests cannot interfere.

use std::cell::Cell;

use super::tape::OpKind;

thread_local! {
    static FAULT: Cell<Option<(OpKind, f64)>> = const { Cell::new(None) };
}

pub(crate) fn factor(kind: OpKind) -> Option<f64> {
    FAULT.with(|f| match f.get() {
        Some((k, s)) if k == kind => Some(s),
        _ => None,
    })
}

/// Scale the upstream gradient seen by every `kind` node's backward rule by
/// `factor` until the returned guard is dropped.
#[must_use = "the fault is removed when the guard is dropped"]
pub fn inject(kind: OpKind, factor: f64) -> FaultGuard {
    let prev = FAULT.with(|f| f.replace(Some((kind, factor))));
    FaultGuard { prev }
}

pub struct FaultGuard {
    prev: Option<(OpKind, f64)>,
}

impl Drop for FaultGuard {
    fn drop(&mut self) {
        FAULT.with(|f| f.set(self.prev));
    }
}
