//! Shape a symbol frame with the root-raised-cosine filter and recover
//! the symbols with the matched filter.
//!
//! Run with: cargo run --release --example pulse_shaping

use ldbp::rxdsp::matched_filter_downsample;
use ldbp::signal::{generate_symbols, modulate, rrc_taps, Modulation, SignalSpec};

fn main() {
    let spec = SignalSpec {
        baud_rate_hz: 10.7e9,
        rolloff: 0.1,
        analog_oversampling: 4,
        digital_oversampling: 2,
        rrc_span_symbols: 32,
    };

    let taps = rrc_taps(&spec, spec.digital_oversampling).unwrap();
    let energy: f64 = taps.iter().map(|t| t * t).sum();
    println!("RRC: {} taps at {} samples/symbol, energy {energy:.12}", taps.len(), 2);

    // Shape at 0 dBm and check the waveform power.
    let frame = generate_symbols(1024, Modulation::GaussianIid, 1)
        .unwrap()
        .with_power(0.0);
    let x = modulate(&frame, &spec, spec.digital_oversampling).unwrap();
    println!(
        "shaped {} samples at {:.1} GHz, mean power {:.4} mW (target 1 mW)",
        x.len(),
        x.sample_rate_hz / 1e9,
        x.mean_power() * 1e3
    );

    // Matched filter + downsampling: the RRC^2 Nyquist property returns
    // the symbols up to the truncation floor.
    let recovered = matched_filter_downsample(&x, &spec).unwrap();
    let scale = 1.0 / frame.power_watts().sqrt();
    let err: f64 = recovered
        .iter()
        .zip(&frame.symbols)
        .map(|(a, b)| (scale * a - b).norm_sqr())
        .sum::<f64>()
        / frame.len() as f64;
    println!(
        "symbol recovery: residual ISI power {err:.3e} ({:.1} dB below the symbols)",
        -10.0 * err.log10()
    );
}
