//! Verify the hand-derived reverse-mode gradient against central finite
//! differences, coordinate by coordinate, through the full receiver
//! chain (filters, Kerr steps, matched filter, phase correction).
//!
//! Run with: cargo run --release --example gradient_check

use ldbp::model::{Layer, LdbpModel, Layout, LinearStep, NonlinearStep};
use ldbp::signal::{generate_symbols, ComplexSignal, Modulation, SignalSpec};
use ldbp::train::{apply_params, batch_gradient, batch_loss, flatten_params, ParamLayout, RxContext};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;

fn main() {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
    let n = 64;

    // A random 3-layer model with an ESSM middle step.
    let mut layers = Vec::new();
    for i in 0..3 {
        let half_taps: Vec<Complex64> = (0..=3)
            .map(|m| {
                let base = if m == 0 { 1.0 } else { 0.0 };
                Complex64::new(
                    base + 0.3 * rng.gen_range(-1.0..1.0),
                    0.3 * rng.gen_range(-1.0..1.0),
                )
            })
            .collect();
        let nonlinear = if i == 1 {
            NonlinearStep::essm(40.0, 0.03, 40.0, vec![1.0, 0.1, -0.05])
        } else {
            NonlinearStep::standard_lossless(40.0, 0.03)
        };
        layers.push(Layer {
            linear: LinearStep::new(half_taps),
            nonlinear,
        });
    }
    let model = LdbpModel {
        layers,
        layout: Layout::Asymmetric,
        sample_rate_hz: 2.0,
    };

    let spec = SignalSpec {
        baud_rate_hz: 1.0,
        rolloff: 0.1,
        analog_oversampling: 4,
        digital_oversampling: 2,
        rrc_span_symbols: 8,
    };
    let rx = RxContext::new(&spec).unwrap();
    let samples: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let r = ComplexSignal::new(samples, 2.0).unwrap();
    let frame = generate_symbols(n / 2, Modulation::GaussianIid, 1)
        .unwrap()
        .with_power(30.0);
    let batch = vec![(r, frame)];

    let layout = ParamLayout::of(&model);
    let (loss, analytic) = batch_gradient(&model, &layout, &rx, &batch).unwrap();
    println!("loss {loss:.6}, {} real parameters", layout.total);

    let params = flatten_params(&model, &layout);
    let eps = 1e-6;
    let mut worst = 0.0f64;
    for p in 0..layout.total {
        let mut probe = |delta: f64| {
            let mut theta = params.clone();
            theta[p] += delta;
            let mut m = model.clone();
            apply_params(&mut m, &layout, &theta);
            batch_loss(&m, &rx, &batch).unwrap()
        };
        let fd = (probe(eps) - probe(-eps)) / (2.0 * eps);
        let rel = (analytic[p] - fd).abs() / analytic[p].abs().max(fd.abs()).max(1e-9);
        worst = worst.max(rel);
    }
    println!("worst relative deviation from central finite differences: {worst:.2e}");
    assert!(worst < 1e-5);
    println!("analytic gradient confirmed at 1e-5 relative");
}
