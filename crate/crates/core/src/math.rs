// SPDX-License-Identifier: MIT OR Apache-2.0

use core::fmt::Debug;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

/// Compute precision for the encoder. Parameters are always stored as `f32`;
/// training runs in `f32`, gradient checks in `f64`.
pub trait Scalar: Float + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static {
    fn of(v: f32) -> Self;
    fn of_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline(always)]
    fn of(v: f32) -> Self {
        v
    }
    #[inline(always)]
    fn of_f64(v: f64) -> Self {
        v as f32
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline(always)]
    fn of(v: f32) -> Self {
        v as f64
    }
    #[inline(always)]
    fn of_f64(v: f64) -> Self {
        v
    }
    #[inline(always)]
    fn to_f64(self) -> f64 {
        self
    }
}

const LANES: usize = 8;

/// Dot product of stored weights with compute values. Eight independent
/// accumulators let the loop vectorize while keeping a fixed summation order.
#[inline]
pub fn dot_w<T: Scalar>(w: &[f32], x: &[T]) -> T {
    debug_assert_eq!(w.len(), x.len());
    let n = w.len().min(x.len());
    let (w, x) = (&w[..n], &x[..n]);
    let mut acc = [T::zero(); LANES];
    let wc = w.chunks_exact(LANES);
    let xc = x.chunks_exact(LANES);
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (wb, xb) in wc.zip(xc) {
        for k in 0..LANES {
            acc[k] += T::of(wb[k]) * xb[k];
        }
    }
    let mut tail = T::zero();
    for (a, b) in wr.iter().zip(xr) {
        tail += T::of(*a) * *b;
    }
    let s0 = (acc[0] + acc[4]) + (acc[1] + acc[5]);
    let s1 = (acc[2] + acc[6]) + (acc[3] + acc[7]);
    (s0 + s1) + tail
}

/// `y += a * w` for stored weights `w`.
#[inline]
pub fn axpy_w<T: Scalar>(y: &mut [T], a: T, w: &[f32]) {
    debug_assert_eq!(y.len(), w.len());
    for (yi, wi) in y.iter_mut().zip(w) {
        *yi += a * T::of(*wi);
    }
}

/// `y += a * x`.
#[inline]
pub fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * *xi;
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `ln(sigmoid(x))`, stable for large |x|.
#[inline]
pub fn log_sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}
