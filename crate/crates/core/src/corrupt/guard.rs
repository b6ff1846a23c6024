//! Injection guard: training marks its thread, and corruption refuses to run
//! on a marked thread.

use std::cell::Cell;

thread_local! {
    static TRAINING_DEPTH: Cell<u32> = const { Cell::new(0) };
}

/// While alive, [`super::apply_corruption`] fails on this thread.
#[derive(Debug)]
pub struct TrainingGuard {
    _not_send: std::marker::PhantomData<*const ()>,
}

impl TrainingGuard {
    pub fn enter() -> Self {
        TRAINING_DEPTH.with(|d| d.set(d.get() + 1));
        TrainingGuard {
            _not_send: std::marker::PhantomData,
        }
    }
}

impl Drop for TrainingGuard {
    fn drop(&mut self) {
        TRAINING_DEPTH.with(|d| d.set(d.get() - 1));
    }
}

pub fn training_active() -> bool {
    TRAINING_DEPTH.with(|d| d.get() > 0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nesting() {
        assert!(!training_active());
        {
            let _a = TrainingGuard::enter();
            {
                let _b = TrainingGuard::enter();
                assert!(training_active());
            }
            assert!(training_active());
        }
        assert!(!training_active());
    }
}
