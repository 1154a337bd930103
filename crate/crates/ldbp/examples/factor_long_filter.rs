//! Split a long symmetric CD-compensating filter into a cascade of
//! symmetric 3-tap sections via the roots of its z-polynomial.
//!
//! Run with: cargo run --release --example factor_long_filter

use ldbp::init::{factor_filter, ideal_inverse_cd, ls_fit_filter, ls_grid, LsFitConfig};
use num_complex::Complex64;

fn main() {
    // A 13-tap least-squares fit to the inverse-CD response of 80 km.
    let cfg = LsFitConfig {
        max_oob_gain: f64::INFINITY,
        ..LsFitConfig::default()
    };
    let half_len = 6;
    let n = cfg.grid_intervals(2 * half_len + 1);
    let grid = ls_grid(n);
    let target = ideal_inverse_cd(80.0, -21.683, 21.4e9, &grid);
    let (step, _) = ls_fit_filter(&target, half_len, &cfg).unwrap();
    let taps = step.full_taps();
    println!("factoring a {}-tap symmetric filter", taps.len());

    let sections = factor_filter(&taps).unwrap();
    println!("-> {} symmetric 3-tap sections:", sections.len());
    for (i, s) in sections.iter().enumerate() {
        println!(
            "   section {}: [{:.4}{:+.4}j, {:.4}{:+.4}j, {:.4}{:+.4}j]",
            i + 1,
            s[0].re,
            s[0].im,
            s[1].re,
            s[1].im,
            s[2].re,
            s[2].im
        );
    }

    // Convolve the sections back together and compare.
    let mut cascade = vec![Complex64::new(1.0, 0.0)];
    for s in &sections {
        let mut next = vec![Complex64::default(); cascade.len() + 2];
        for (i, &a) in cascade.iter().enumerate() {
            for (j, &b) in s.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        cascade = next;
    }
    let err: f64 = cascade
        .iter()
        .zip(&taps)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    let peak = taps.iter().map(|h| h.norm()).fold(0.0, f64::max);
    println!("cascade reproduces the filter within {:.2e} (relative)", err / peak);
}
