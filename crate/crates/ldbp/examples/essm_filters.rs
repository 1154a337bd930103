//! Enhanced split-step equalizer: real FIR filters on the instantaneous
//! power inside each nonlinear step. Compares one shared filter against
//! independently trained per-step filters.
//!
//! Run with: cargo run --release --example essm_filters

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

    // Four coarse steps over the whole link, each with a kappa = 8
    // power filter (initialized, like the conventional scheme, to the
    // unit filter).
    let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 16, spec.digital_rate_hz());
    builder.total_steps = Some(4);
    builder.ls = LsFitConfig::for_spec(&spec);
    builder.essm_kappa = Some(8);
    let model = init_model(&link, &builder).unwrap();
    println!(
        "{} steps of {:.0} km, power-filter length {}",
        model.num_layers(),
        model.layers[0].nonlinear.delta_km,
        2 * model.layers[0].nonlinear.kappa() + 1
    );

    let powers: Vec<f64> = (1..=6).map(f64::from).collect();
    for tie in [true, false] {
        let cfg = TrainConfig {
            iterations: 250,
            batch_size: 16,
            seed: 2,
            power_set_dbm: vec![3.0, 4.0, 5.0],
            tie_essm: tie,
            ..TrainConfig::default()
        };
        let out = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
        let snrs = evaluate(
            Equalizer::Model(&out.model),
            &link,
            &spec,
            &rx,
            &sim,
            &powers,
            24,
            99,
        )
        .unwrap();
        let peak = snrs.iter().map(|p| p.snr_db).fold(f64::MIN, f64::max);
        let label = if tie { "shared filter " } else { "per-step filters" };
        println!("{label}: peak {peak:.2} dB");
    }
}
