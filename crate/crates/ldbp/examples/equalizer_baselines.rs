//! Reference equalizers on a noisy nonlinear link: linear CD
//! compensation against split-step backpropagation at 1 and 4 steps per
//! span.
//!
//! Run with: cargo run --release --example equalizer_baselines

use ldbp::channel::{FiberLink, StepSizing};
use ldbp::rxdsp::RxConfig;
use ldbp::signal::SignalSpec;
use ldbp::train::{evaluate, Equalizer, SimConfig};

fn main() {
    let link = FiberLink {
        span_km: 80.0,
        num_spans: 5,
        ..FiberLink::default()
    };
    let spec = SignalSpec {
        analog_oversampling: 4,
        ..SignalSpec::default()
    };
    let rx = RxConfig::for_spec(&spec);
    let sim = SimConfig {
        n_symbols: 256,
        steps_per_span: 50,
        sizing: StepSizing::Logarithmic,
        noiseless: false,
        wdm: None,
    };
    let powers: Vec<f64> = (-4..=7).map(f64::from).collect();
    let frames = 32;
    let seed = 11;

    let cdc = evaluate(Equalizer::Cdc, &link, &spec, &rx, &sim, &powers, frames, seed).unwrap();
    let dbp1 = evaluate(
        Equalizer::Dbp { steps_per_span: 1 },
        &link,
        &spec,
        &rx,
        &sim,
        &powers,
        frames,
        seed,
    )
    .unwrap();
    let dbp4 = evaluate(
        Equalizer::Dbp { steps_per_span: 4 },
        &link,
        &spec,
        &rx,
        &sim,
        &powers,
        frames,
        seed,
    )
    .unwrap();

    println!("effective SNR [dB] over {} frames per power:", frames);
    println!("power_dBm   CDC   DBP-1   DBP-4");
    for ((c, d1), d4) in cdc.iter().zip(&dbp1).zip(&dbp4) {
        println!(
            "{:+7.0}   {:5.2}  {:5.2}  {:5.2}",
            c.power_dbm, c.snr_db, d1.snr_db, d4.snr_db
        );
    }
    let peak = |rows: &[ldbp::train::PowerSnr]| {
        rows.iter()
            .max_by(|a, b| a.snr_db.total_cmp(&b.snr_db))
            .map(|r| (r.power_dbm, r.snr_db))
            .unwrap()
    };
    let (pc, sc) = peak(&cdc);
    let (p1, s1) = peak(&dbp1);
    println!("peaks: CDC {sc:.2} dB at {pc:+.0} dBm, DBP-1 {s1:.2} dB at {p1:+.0} dBm");
}
