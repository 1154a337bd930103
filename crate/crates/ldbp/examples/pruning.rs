//! Progressively shorten the equalizer filters during training and
//! watch the SNR against the overall impulse-response length.
//!
//! Run with: cargo run --release --example pruning

use ldbp::channel::{FiberLink, StepSizing};
use ldbp::init::{cd_memory_taps, init_model, LsFitConfig, ModelBuilder};
use ldbp::model::Layout;
use ldbp::rxdsp::RxConfig;
use ldbp::signal::SignalSpec;
use ldbp::train::{evaluate, train, Equalizer, PruneSchedule, SimConfig, TrainConfig};

fn main() {
    let link = FiberLink {
        span_km: 80.0,
        num_spans: 3,
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
    let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, spec.digital_rate_hz());
    builder.ls = LsFitConfig::for_spec(&spec);
    let model = init_model(&link, &builder).unwrap();

    // Remove every tap pair down to single-tap filters, all events in
    // the first 40% of the run, longest filter first.
    let targets = vec![0; model.num_layers()];
    let iterations = 600;
    let schedule = PruneSchedule::front_loaded(&model, &targets, iterations, 0.4).unwrap();
    println!(
        "schedule: {} pruning events over the first {} iterations",
        schedule.num_events(),
        (iterations as f64 * 0.4) as usize
    );

    let cfg = TrainConfig {
        iterations,
        batch_size: 12,
        seed: 3,
        power_set_dbm: vec![2.0, 3.0],
        checkpoint_interval: 10,
        ..TrainConfig::default()
    };
    let outcome = train(&model, &link, &spec, &rx, &sim, &cfg, &schedule).unwrap();

    let t_cd = cd_memory_taps(
        link.beta2_ps2_per_km,
        (1.0 + spec.rolloff) * spec.baud_rate_hz,
        link.total_km(),
        spec.digital_rate_hz(),
    );
    println!("CD memory of the whole link: {t_cd:.1} samples");
    println!("total_taps  snr_db  (iteration)");
    let mut last_taps = usize::MAX;
    for (iter, snapshot) in outcome.checkpoints.iter().rev() {
        let taps = snapshot.total_taps();
        if taps == last_taps {
            continue;
        }
        last_taps = taps;
        let snr = evaluate(
            Equalizer::Model(snapshot),
            &link,
            &spec,
            &rx,
            &sim,
            &[2.0],
            24,
            9,
        )
        .unwrap();
        println!("{taps:10}  {:6.2}  ({iter})", snr[0].snr_db);
    }
}
