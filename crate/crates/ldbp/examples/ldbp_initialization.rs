//! Build an equalizer from a link description: logarithmic step plan,
//! half-step merging and least-squares filters fit to the per-step
//! inverse-CD response.
//!
//! Run with: cargo run --release --example ldbp_initialization

use ldbp::channel::FiberLink;
use ldbp::init::{init_model, LsFitConfig, ModelBuilder, StepPlan};
use ldbp::model::{overall_response, Layout};
use ldbp::signal::SignalSpec;

fn main() {
    // The two-span illustration: 2 x 100 km at 2 steps per span.
    let link = FiberLink {
        span_km: 100.0,
        num_spans: 2,
        ..FiberLink::default()
    };
    let plan = StepPlan::per_span(&link, 2, 0.4);
    println!("step plan (backprop order): {:?}", rounded(&plan.deltas_km));
    println!("merged half-steps:          {:?}", rounded(&plan.merged_km));

    let spec = SignalSpec::default();
    let mut builder = ModelBuilder::new(Layout::SymmetricPlusHalf, 2, 8, spec.digital_rate_hz());
    builder.ls = LsFitConfig::for_spec(&spec);
    let model = init_model(&link, &builder).unwrap();
    println!(
        "model: {} layers, overall impulse response {} taps",
        model.num_layers(),
        model.total_taps()
    );
    for (i, layer) in model.layers.iter().enumerate() {
        let peak = layer
            .linear
            .full_taps()
            .iter()
            .map(|h| h.norm())
            .fold(0.0, f64::max);
        println!(
            "  layer {}: {} taps, delta {:5.1} km, |h|max {:.3}, nonlinear eff. length {:5.2} km",
            i + 1,
            layer.linear.active_full_len(),
            layer.nonlinear.delta_km,
            peak,
            layer.nonlinear.effective_length_km,
        );
    }

    // In-band flatness of the combined response.
    let (resp, _) = overall_response(&model, 1024);
    let grid = ldbp::model::response_grid(1024);
    let edge = 2.0 * std::f64::consts::PI * 0.275;
    let (mut lo, mut hi) = (f64::MAX, f64::MIN);
    for (r, w) in resp.iter().zip(&grid) {
        if w.abs() <= edge {
            let db = 20.0 * r.norm().log10();
            lo = lo.min(db);
            hi = hi.max(db);
        }
    }
    println!("overall in-band magnitude ripple: {:.3} dB to {:.3} dB", lo, hi);
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 10.0).round() / 10.0).collect()
}
