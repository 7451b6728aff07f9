//! Multi-dimensional FFT on flat row-major arrays, with a process-wide plan
//! cache keyed by line length and direction.

use num_complex::Complex64;
use once_cell::sync::Lazy;
use rustfft::{Fft, FftDirection, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

static PLANS: Lazy<Mutex<PlanCache>> = Lazy::new(|| Mutex::new(HashMap::new()));

fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    let mut cache = PLANS.lock().unwrap();
    cache
        .entry((len, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            let dir = if forward { FftDirection::Forward } else { FftDirection::Inverse };
            planner.plan_fft(len, dir)
        })
        .clone()
}

/// Unnormalized DFT along every axis of a row-major array with shape `dims`.
/// Forward uses the `e^{-2 pi i m j / n}` kernel; inverse its conjugate.
/// Neither direction applies a 1/n factor.
pub fn dft_nd(data: &mut [Complex64], dims: &[usize], forward: bool) {
    assert_eq!(data.len(), dims.iter().product::<usize>(), "shape mismatch");
    let nd = dims.len();
    // Stride of the last axis is 1; transform contiguous lines in place.
    let last = dims[nd - 1];
    let fft_last = plan(last, forward);
    for line in data.chunks_exact_mut(last) {
        fft_last.process(line);
    }
    // Remaining axes: gather strided lines into a scratch buffer.
    for axis in 0..nd - 1 {
        let n = dims[axis];
        let fft = plan(n, forward);
        let inner: usize = dims[axis + 1..].iter().product();
        let outer: usize = dims[..axis].iter().product();
        let mut line = vec![Complex64::default(); n];
        for o in 0..outer {
            let base_o = o * n * inner;
            for i in 0..inner {
                let base = base_o + i;
                for j in 0..n {
                    line[j] = data[base + j * inner];
                }
                fft.process(&mut line);
                for j in 0..n {
                    data[base + j * inner] = line[j];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forward_then_inverse_scales_by_point_count() {
        let dims = [4usize, 6, 8];
        let n: usize = dims.iter().product();
        let orig: Vec<Complex64> =
            (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.7).cos())).collect();
        let mut data = orig.clone();
        dft_nd(&mut data, &dims, true);
        dft_nd(&mut data, &dims, false);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b * n as f64).norm() < 1e-9);
        }
    }

    #[test]
    fn single_mode_lands_on_its_bin() {
        let dims = [8usize, 8];
        let mut data = vec![Complex64::default(); 64];
        for j0 in 0..8 {
            for j1 in 0..8 {
                let ph = 2.0 * std::f64::consts::PI * (j0 as f64 * 1.0 + j1 as f64 * 3.0) / 8.0;
                data[j0 * 8 + j1] = Complex64::new(ph.cos(), ph.sin());
            }
        }
        dft_nd(&mut data, &dims, true);
        for j0 in 0..8 {
            for j1 in 0..8 {
                let expect = if j0 == 1 && j1 == 3 { 64.0 } else { 0.0 };
                assert!((data[j0 * 8 + j1] - Complex64::new(expect, 0.0)).norm() < 1e-9);
            }
        }
    }
}
