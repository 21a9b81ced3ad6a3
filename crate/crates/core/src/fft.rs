//! Thin wrapper over `rustfft` with a per-thread plan cache.
//!
//! Plans are cached by `(scalar type, length, direction)` so repeated
//! transforms inside solver loops do not re-plan. Caching is thread-local;
//! concurrent transforms from a rayon pool never contend.

use std::any::{Any, TypeId};
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::scalar::Real;

thread_local! {
    static PLANS: RefCell<HashMap<(TypeId, usize, bool), Box<dyn Any>>> =
        RefCell::new(HashMap::new());
}

fn plan<T: Real>(len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        let key = (TypeId::of::<T>(), len, inverse);
        if let Some(entry) = map.get(&key) {
            return entry
                .downcast_ref::<Arc<dyn Fft<T>>>()
                .expect("cache entry type")
                .clone();
        }
        let mut planner = FftPlanner::<T>::new();
        let fft = if inverse {
            planner.plan_fft_inverse(len)
        } else {
            planner.plan_fft_forward(len)
        };
        map.insert(key, Box::new(fft.clone()));
        fft
    })
}

/// Unnormalized in-place 1D FFT (`inverse = true` uses the `e^{+i}` kernel).
pub(crate) fn fft_1d<T: Real>(buf: &mut [Complex<T>], inverse: bool) {
    plan::<T>(buf.len(), inverse).process(buf);
}

/// Unnormalized in-place 2D FFT of an `m x m` row-major buffer.
pub(crate) fn fft_2d<T: Real>(buf: &mut [Complex<T>], m: usize, inverse: bool) {
    debug_assert_eq!(buf.len(), m * m);
    let p = plan::<T>(m, inverse);
    for row in buf.chunks_exact_mut(m) {
        p.process(row);
    }
    let mut col = vec![Complex::new(T::zero(), T::zero()); m];
    for j in 0..m {
        for i in 0..m {
            col[i] = buf[i * m + j];
        }
        p.process(&mut col);
        for i in 0..m {
            buf[i * m + j] = col[i];
        }
    }
}
