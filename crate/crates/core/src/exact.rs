// SPDX-License-Identifier: MIT OR Apache-2.0

//! Order-independent floating point summation.
//!
//! Activation masses are summed over shards, neurons and features in
//! different orders; keeping the sum exact makes every route agree bit for
//! bit. The accumulator keeps a list of non-overlapping partials (Shewchuk's
//! method) and rounds once when the value is read.

use alloc::vec::Vec;

#[derive(Debug, Clone, Default)]
pub struct ExactSum {
    partials: Vec<f64>,
}

impl ExactSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a finite value. Non-finite input poisons the partials, callers
    /// validate before adding.
    pub fn add(&mut self, value: f64) {
        let mut x = value;
        let mut i = 0;
        for j in 0..self.partials.len() {
            let mut y = self.partials[j];
            if x.abs() < y.abs() {
                core::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        self.partials.truncate(i);
        self.partials.push(x);
    }

    pub fn merge(&mut self, other: &ExactSum) {
        for &p in &other.partials {
            self.add(p);
        }
    }

    /// The exact sum rounded to the nearest f64 (ties to even).
    pub fn value(&self) -> f64 {
        let p = &self.partials;
        let mut n = p.len();
        if n == 0 {
            return 0.0;
        }
        n -= 1;
        let mut hi = p[n];
        let mut lo = 0.0;
        while n > 0 {
            let x = hi;
            n -= 1;
            let y = p[n];
            hi = x + y;
            let yr = hi - x;
            lo = y - yr;
            if lo != 0.0 {
                break;
            }
        }
        // Half-way case: the remaining partials decide the rounding direction.
        if n > 0 && ((lo < 0.0 && p[n - 1] < 0.0) || (lo > 0.0 && p[n - 1] > 0.0)) {
            let y = lo * 2.0;
            let x = hi + y;
            let yr = x - hi;
            if y == yr {
                hi = x;
            }
        }
        hi
    }
}

impl FromIterator<f64> for ExactSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = ExactSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}

pub fn exact_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<ExactSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn cancellation_is_exact() {
        assert_eq!(exact_sum([1e100, 1.0, -1e100]), 1.0);
        assert_eq!(exact_sum([1.0, 1e-30, -1.0]), 1e-30);
    }

    #[test]
    fn empty_is_zero() {
        assert_eq!(ExactSum::new().value(), 0.0);
    }

    #[test]
    fn many_small_values() {
        let v = vec![0.1f64; 10];
        // naive summation gives 0.9999999999999999
        assert_eq!(exact_sum(v), 1.0);
    }

    proptest! {
        #[test]
        fn order_and_partition_independent(
            values in prop::collection::vec(0.0f64..1.0, 0..200),
            split in 0usize..200,
        ) {
            let forward = exact_sum(values.iter().copied());
            let backward = exact_sum(values.iter().rev().copied());
            prop_assert_eq!(forward.to_bits(), backward.to_bits());

            let split = split.min(values.len());
            let mut left: ExactSum = values[..split].iter().copied().collect();
            let right: ExactSum = values[split..].iter().copied().collect();
            left.merge(&right);
            prop_assert_eq!(left.value().to_bits(), forward.to_bits());
        }
    }
}
