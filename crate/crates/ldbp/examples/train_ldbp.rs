//! Train a small equalizer end to end: least-squares initialization,
//! exact reverse-mode gradients through the receiver chain, Adam.
//!
//! Run with: cargo run --release --example train_ldbp

use ldbp::channel::{FiberLink, StepSizing};
use ldbp::init::{init_model, LsFitConfig, ModelBuilder};
use ldbp::model::Layout;
use ldbp::rxdsp::RxConfig;
use ldbp::signal::SignalSpec;
use ldbp::train::{evaluate, train, Equalizer, PruneSchedule, SimConfig, TrainConfig};

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

    // One step per span, 9-tap filters fit to the per-step CD inverse.
    let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, spec.digital_rate_hz());
    builder.ls = LsFitConfig::for_spec(&spec);
    let model = init_model(&link, &builder).unwrap();

    let powers = [3.0];
    let before = evaluate(Equalizer::Model(&model), &link, &spec, &rx, &sim, &powers, 32, 7).unwrap();
    println!("initialized: {:.2} dB effective SNR at +3 dBm", before[0].snr_db);

    let cfg = TrainConfig {
        iterations: 300,
        batch_size: 16,
        seed: 1,
        power_set_dbm: vec![2.0, 3.0, 4.0],
        ..TrainConfig::default()
    };
    let outcome = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
    let losses: Vec<f64> = outcome.history.iter().map(|h| h.loss).collect();
    println!(
        "trained {} iterations: loss {:.3e} -> {:.3e}",
        losses.len(),
        losses[..20].iter().sum::<f64>() / 20.0,
        losses[losses.len() - 20..].iter().sum::<f64>() / 20.0
    );

    let after = evaluate(
        Equalizer::Model(&outcome.model),
        &link,
        &spec,
        &rx,
        &sim,
        &powers,
        32,
        7,
    )
    .unwrap();
    let dbp = evaluate(
        Equalizer::Dbp { steps_per_span: 1 },
        &link,
        &spec,
        &rx,
        &sim,
        &powers,
        32,
        7,
    )
    .unwrap();
    println!(
        "trained:     {:.2} dB (frequency-domain DBP at the same resolution: {:.2} dB)",
        after[0].snr_db, dbp[0].snr_db
    );
}
