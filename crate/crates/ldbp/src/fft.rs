//! Thin wrapper around rustfft with a global plan cache.
//!
//! rustfft leaves the inverse transform unscaled; `ifft_in_place` here
//! applies the 1/n factor so that `ifft(fft(x)) == x` to rounding.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type PlanPair = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plan_cache() -> &'static Mutex<HashMap<usize, PlanPair>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, PlanPair>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn plans(n: usize) -> PlanPair {
    let mut cache = plan_cache().lock().unwrap();
    cache
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// In-place forward DFT (unscaled, rustfft convention).
pub fn fft_in_place(data: &mut [Complex64]) {
    plans(data.len()).0.process(data);
}

/// In-place inverse DFT, scaled by 1/n.
pub fn ifft_in_place(data: &mut [Complex64]) {
    let n = data.len();
    plans(n).1.process(data);
    let scale = 1.0 / n as f64;
    for v in data.iter_mut() {
        *v *= scale;
    }
}

/// Forward DFT of a borrowed slice.
pub fn fft(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    fft_in_place(&mut buf);
    buf
}

/// Inverse DFT (scaled) of a borrowed slice.
pub fn ifft(data: &[Complex64]) -> Vec<Complex64> {
    let mut buf = data.to_vec();
    ifft_in_place(&mut buf);
    buf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let x: Vec<Complex64> = (0..64)
            .map(|k| Complex64::new((k as f64).sin(), (k as f64 * 0.3).cos()))
            .collect();
        let y = ifft(&fft(&x));
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let x: Vec<Complex64> = (0..100)
            .map(|k| Complex64::new(0.1 * k as f64, -(k as f64) * 0.05))
            .collect();
        let x_energy: f64 = x.iter().map(|v| v.norm_sqr()).sum();
        let spec_energy: f64 = fft(&x).iter().map(|v| v.norm_sqr()).sum::<f64>() / 100.0;
        assert!((x_energy - spec_energy).abs() < 1e-9 * x_energy);
    }
}
