//! Execution strategy for independent jobs.
//!
//! Grid cells, folds and per-class training jobs are independent. The core
//! hands them to a [`Runner`], which must return results in input order;
//! that ordering is what keeps every reduction deterministic regardless of
//! how many workers a runner uses.

use alloc::vec::Vec;

pub trait Runner: Sync {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Runner for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}
