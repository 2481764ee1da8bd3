use alloc::vec::Vec;

use super::kernel::KernelRows;

/// Least-recently-used cache of kernel matrix rows.
///
/// Rows are evicted by oldest access stamp once `capacity` rows are held.
pub(crate) struct RowCache<'k, K: ?Sized> {
    kernel: &'k K,
    capacity: usize,
    rows: Vec<Option<Vec<f64>>>,
    stamps: Vec<u64>,
    clock: u64,
    held: usize,
    pub(crate) hits: u64,
    pub(crate) misses: u64,
}

impl<'k, K: KernelRows + ?Sized> RowCache<'k, K> {
    pub(crate) fn new(kernel: &'k K, capacity: usize) -> Self {
        let n = kernel.len();
        RowCache {
            kernel,
            capacity: capacity.max(2),
            rows: (0..n).map(|_| None).collect(),
            stamps: alloc::vec![0; n],
            clock: 0,
            held: 0,
            hits: 0,
            misses: 0,
        }
    }

    pub(crate) fn row(&mut self, i: usize) -> &[f64] {
        self.clock += 1;
        self.stamps[i] = self.clock;
        if self.rows[i].is_some() {
            self.hits += 1;
        } else {
            self.misses += 1;
            let mut buf = if self.held >= self.capacity {
                self.evict()
            } else {
                self.held += 1;
                alloc::vec![0.0; self.kernel.len()]
            };
            self.kernel.fill_row(i, &mut buf);
            self.rows[i] = Some(buf);
        }
        self.rows[i].as_deref().unwrap_or(&[])
    }

    fn evict(&mut self) -> Vec<f64> {
        let victim = (0..self.rows.len())
            .filter(|&j| self.rows[j].is_some())
            .min_by_key(|&j| self.stamps[j])
            .expect("cache holds at least one row when full");
        self.rows[victim].take().unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::svm::kernel::RbfRows;
    use alloc::vec;

    #[test]
    fn evicts_least_recently_used() {
        let x = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let k = RbfRows { rows: &x, gamma: 1.0 };
        let mut cache = RowCache::new(&k, 2);
        cache.row(0);
        cache.row(1);
        cache.row(0);
        cache.row(2); // evicts row 1
        assert_eq!((cache.hits, cache.misses), (1, 3));
        cache.row(0);
        assert_eq!(cache.hits, 2);
        cache.row(1);
        assert_eq!(cache.misses, 4);
        let r = cache.row(3).to_vec();
        assert_eq!(r[3], 1.0);
        assert!((r[2] - libm::exp(-1.0)).abs() < 1e-15);
    }
}
