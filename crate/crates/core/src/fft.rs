//! Three-dimensional complex FFT on the periodic grid.
//!
//! Layout is x-fastest: `idx = i + n * (j + n * k)`. The forward transform is
//! unnormalized and the inverse divides by `n³`, so
//! `sum |f|² = n⁻³ sum |f̂|²`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::par;

pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Fft3 {
    /// Shared plan for `n` points per axis.
    pub fn plan(n: usize) -> Arc<Fft3> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Fft3>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().expect("fft plan cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Arc::new(Fft3 {
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.forward);
    }

    /// Inverse transform including the `1/n³` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.inverse);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        par::for_each_chunk_mut(data, self.n * self.n, |_, slab| {
            slab.iter_mut().for_each(|c| *c *= scale);
        });
    }

    fn transform(&self, data: &mut [Complex64], fft: &dyn Fft<f64>) {
        let n = self.n;
        let plane = n * n;
        assert_eq!(data.len(), plane * n, "buffer does not match grid");

        // x and y axes, slab by slab.
        par::for_each_chunk_mut(data, plane, |_, slab| {
            let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
            fft.process_with_scratch(slab, &mut scratch);
            let mut t = vec![Complex64::default(); plane];
            transpose(slab, &mut t, n);
            fft.process_with_scratch(&mut t, &mut scratch);
            transpose(&t, slab, n);
        });

        // z axis: gather (j, i, k) lines, transform, scatter back.
        let mut lines = vec![Complex64::default(); plane * n];
        {
            let src = &*data;
            par::for_each_chunk_mut(&mut lines, plane, |j, block| {
                for i in 0..n {
                    for k in 0..n {
                        block[i * n + k] = src[i + n * (j + n * k)];
                    }
                }
                let mut scratch =
                    vec![Complex64::default(); fft.get_inplace_scratch_len()];
                fft.process_with_scratch(block, &mut scratch);
            });
        }
        let lines = &lines;
        par::for_each_chunk_mut(data, plane, |k, slab| {
            for j in 0..n {
                for i in 0..n {
                    slab[i + n * j] = lines[(j * n + i) * n + k];
                }
            }
        });
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    for r in 0..n {
        for c in 0..n {
            dst[c * n + r] = src[r * n + c];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_lands_in_one_bin() {
        let n = 8;
        let plan = Fft3::plan(n);
        let mut data = vec![Complex64::default(); n * n * n];
        let (a, b, c) = (1usize, 2usize, 3usize);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let phase = 2.0 * std::f64::consts::PI * (a * i + b * j + c * k) as f64
                        / n as f64;
                    data[i + n * (j + n * k)] = Complex64::from_polar(1.0, phase);
                }
            }
        }
        plan.forward(&mut data);
        let peak = a + n * (b + n * c);
        for (idx, v) in data.iter().enumerate() {
            let expected = if idx == peak { (n * n * n) as f64 } else { 0.0 };
            assert!((v.re - expected).abs() < 1e-9 && v.im.abs() < 1e-9, "bin {idx}: {v}");
        }
        plan.inverse(&mut data);
        assert!((data[0].re - 1.0).abs() < 1e-12);
    }
}
