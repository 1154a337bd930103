//! Gradient-descent training of the equalizer: fresh frames every
//! iteration (symbols, launch power and amplifier noise all drawn from
//! named substreams of one root seed), exact reverse-mode gradients,
//! Adam updates and scheduled tap pruning. Everything is a pure
//! function of the configs and seeds, so runs are bit-reproducible.

pub mod adam;
pub mod grad;
pub mod prune;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use grad::{
    apply_params, batch_gradient, batch_loss, flatten_params, frame_loss,
    frame_loss_and_gradient, model_backward, ParamLayout, RxContext,
};
pub use prune::{prune_apply, PruneEvent, PruneSchedule};

use serde::{Deserialize, Serialize};

use crate::channel::{FiberLink, LinkPropagator, StepSizing};
use crate::error::{Error, Result};
use crate::model::{forward, linear_only_forward, LdbpModel, NonlinearKind};
use crate::rng::{derive_seed, substream, Stream};
use crate::rxdsp::{
    cdc_equalize, effective_snr_from_energies, lowpass_downsample, recover_symbols, reference_dbp,
    RxConfig,
};
use crate::signal::{generate_symbols, modulate, ComplexSignal, Modulation, SignalSpec, SymbolFrame};

/// Optimization hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub iterations: usize,
    /// Launch powers; each frame draws one uniformly at random.
    pub power_set_dbm: Vec<f64>,
    pub seed: u64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    /// Evaluate the effective SNR on held-out frames every this many
    /// iterations (0: never).
    pub eval_interval: usize,
    pub eval_frames: usize,
    /// Share one ESSM power filter across all steps (summed gradients).
    pub tie_essm: bool,
    pub modulation: Modulation,
    /// Snapshot the model every this many iterations (0: never); used
    /// by the pruning-curve runner.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            batch_size: 50,
            iterations: 1000,
            power_set_dbm: vec![0.0],
            seed: 0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            eval_interval: 0,
            eval_frames: 32,
            tie_essm: false,
            modulation: Modulation::GaussianIid,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.power_set_dbm.is_empty() {
            return Err(Error::Config("power_set_dbm must not be empty".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Co-propagating neighbor channels around the channel of interest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WdmSim {
    /// Total channel count (odd); the center channel is equalized.
    pub channels: usize,
    pub spacing_hz: f64,
}

/// Forward-simulation parameters of the training channel.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub n_symbols: usize,
    pub steps_per_span: usize,
    pub sizing: StepSizing,
    pub noiseless: bool,
    #[serde(default)]
    pub wdm: Option<WdmSim>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_symbols: 1024,
            steps_per_span: 500,
            sizing: StepSizing::Logarithmic,
            noiseless: false,
            wdm: None,
        }
    }
}

/// One training-history record.
#[derive(Debug, Clone)]
pub struct HistoryRow {
    pub iteration: usize,
    pub loss: f64,
    pub snr_db: Option<f64>,
    pub total_taps: usize,
    pub power_mix_hash: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LdbpModel,
    pub history: Vec<HistoryRow>,
    /// (iteration, snapshot) pairs when checkpointing is on.
    pub checkpoints: Vec<(usize, LdbpModel)>,
}

fn fnv1a(words: impl IntoIterator<Item = u64>) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

/// Generate, propagate and front-end-filter one frame. With WDM
/// neighbors enabled, independent frames are shaped at the same launch
/// power on each carrier and the multiplex propagates together; the
/// receiver low-pass then isolates the center channel.
#[allow(clippy::too_many_arguments)]
fn simulate_frame(
    propagator: &LinkPropagator,
    spec: &SignalSpec,
    rx: &RxConfig,
    sim: &SimConfig,
    modulation: Modulation,
    power_dbm: f64,
    symbol_seed: u64,
    noise_seed: u64,
) -> Result<(ComplexSignal, SymbolFrame)> {
    let frame = generate_symbols(sim.n_symbols, modulation, symbol_seed)?.with_power(power_dbm);
    let x = match &sim.wdm {
        None => modulate(&frame, spec, spec.analog_oversampling)?,
        Some(wdm) if wdm.channels <= 1 => modulate(&frame, spec, spec.analog_oversampling)?,
        Some(wdm) => {
            let center = wdm.channels / 2;
            let mut channels = Vec::with_capacity(wdm.channels);
            for c in 0..wdm.channels {
                let ch_frame = if c == center {
                    frame.clone()
                } else {
                    let seed = derive_seed(symbol_seed, Stream::Frame, c as u64, 0xbeef);
                    generate_symbols(sim.n_symbols, modulation, seed)?.with_power(power_dbm)
                };
                channels.push(modulate(&ch_frame, spec, spec.analog_oversampling)?);
            }
            crate::signal::wdm_multiplex(&channels, wdm.spacing_hz, spec.occupied_bw_hz())?
        }
    };
    let y = propagator.propagate(&x, noise_seed, sim.noiseless)?;
    let r = lowpass_downsample(&y, rx, spec)?;
    Ok((r, frame))
}

/// Equalizers measurable by [`evaluate`].
#[derive(Debug, Clone, Copy)]
pub enum Equalizer<'a> {
    Model(&'a LdbpModel),
    /// The model with every nonlinear step skipped.
    LinearOnly(&'a LdbpModel),
    /// Frequency-domain CD compensation over the whole link.
    Cdc,
    /// Split-step backpropagation with exact frequency-domain linear
    /// steps at the given resolution.
    Dbp { steps_per_span: usize },
}

#[derive(Debug, Clone, Copy)]
pub struct PowerSnr {
    pub power_dbm: f64,
    pub snr_db: f64,
    pub capped: bool,
}

/// Monte-Carlo effective SNR per launch power on held-out seed streams.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    equalizer: Equalizer,
    link: &FiberLink,
    spec: &SignalSpec,
    rx: &RxConfig,
    sim: &SimConfig,
    powers_dbm: &[f64],
    num_frames: usize,
    seed: u64,
) -> Result<Vec<PowerSnr>> {
    let n_analog = sim.n_symbols * spec.analog_oversampling;
    let propagator = LinkPropagator::new(
        link,
        n_analog,
        spec.analog_rate_hz(),
        sim.steps_per_span,
        sim.sizing,
    );
    let mut out = Vec::with_capacity(powers_dbm.len());
    for (p_idx, &power) in powers_dbm.iter().enumerate() {
        let mut energies = Vec::with_capacity(num_frames);
        for f in 0..num_frames {
            let (r, frame) = simulate_frame(
                &propagator,
                spec,
                rx,
                sim,
                Modulation::GaussianIid,
                power,
                derive_seed(seed, Stream::EvalFrame, p_idx as u64, f as u64),
                derive_seed(seed, Stream::EvalNoise, p_idx as u64, f as u64),
            )?;
            let equalized = match equalizer {
                Equalizer::Model(m) => forward(m, &r)?,
                Equalizer::LinearOnly(m) => linear_only_forward(m, &r)?,
                Equalizer::Cdc => cdc_equalize(&r, link),
                Equalizer::Dbp { steps_per_span } => reference_dbp(&r, link, steps_per_span),
            };
            let (s_hat, _) = recover_symbols(&equalized, &frame, spec)?;
            let energy: f64 = s_hat
                .iter()
                .zip(&frame.symbols)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum();
            energies.push(energy);
        }
        let snr = effective_snr_from_energies(sim.n_symbols, &energies);
        out.push(PowerSnr {
            power_dbm: power,
            snr_db: snr.db(),
            capped: snr.capped,
        });
    }
    Ok(out)
}

/// Train the model: every iteration draws a fresh mini-batch (symbols,
/// powers, noise), takes one exact-gradient Adam step and fires any
/// pruning events scheduled for that iteration.
pub fn train(
    model: &LdbpModel,
    link: &FiberLink,
    spec: &SignalSpec,
    rx: &RxConfig,
    sim: &SimConfig,
    cfg: &TrainConfig,
    schedule: &PruneSchedule,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    spec.validate()?;
    link.validate()?;
    model.validate()?;
    if cfg.tie_essm {
        let kappas: Vec<usize> = model
            .layers
            .iter()
            .filter(|l| l.nonlinear.kind == NonlinearKind::Essm)
            .map(|l| l.nonlinear.kappa())
            .collect();
        if kappas.is_empty() || kappas.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::Config(
                "tie_essm requires ESSM steps with one common filter length".into(),
            ));
        }
    }

    let mut model = model.clone();
    let layout = ParamLayout::of(&model);
    let rxctx = RxContext::new(spec)?;
    let mut adam_state = AdamState::new(layout.total);
    let adam_cfg = cfg.adam();
    let n_analog = sim.n_symbols * spec.analog_oversampling;
    let propagator = LinkPropagator::new(
        link,
        n_analog,
        spec.analog_rate_hz(),
        sim.steps_per_span,
        sim.sizing,
    );
    // Median power of the training set for the held-out evaluations.
    let eval_power = {
        let mut sorted = cfg.power_set_dbm.clone();
        sorted.sort_by(f64::total_cmp);
        sorted[sorted.len() / 2]
    };

    let mut history = Vec::with_capacity(cfg.iterations);
    let mut checkpoints = Vec::new();
    let mut initial_loss = None;
    let mut divergence_run = 0usize;
    for t in 0..cfg.iterations {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        let mut power_indices = Vec::with_capacity(cfg.batch_size);
        for b in 0..cfg.batch_size {
            let mut power_rng = substream(cfg.seed, Stream::Power, t as u64, b as u64);
            let p_idx = rand::Rng::gen_range(&mut power_rng, 0..cfg.power_set_dbm.len());
            power_indices.push(p_idx as u64);
            let (r, frame) = simulate_frame(
                &propagator,
                spec,
                rx,
                sim,
                cfg.modulation,
                cfg.power_set_dbm[p_idx],
                derive_seed(cfg.seed, Stream::Frame, t as u64, b as u64),
                derive_seed(cfg.seed, Stream::Noise, t as u64, b as u64),
            )?;
            batch.push((r, frame));
        }
        let (loss, mut grads) = batch_gradient(&model, &layout, &rxctx, &batch)?;
        if cfg.tie_essm {
            tie_eta_gradients(&model, &layout, &mut grads);
        }
        let mut params = flatten_params(&model, &layout);
        adam_step(&mut adam_state, &mut params, &grads, &adam_cfg);
        apply_params(&mut model, &layout, &params);
        prune_apply(&mut model, &layout, schedule, t, Some(&mut adam_state));

        let snr_db = if cfg.eval_interval > 0
            && (t % cfg.eval_interval == cfg.eval_interval - 1 || t + 1 == cfg.iterations)
        {
            let snr = evaluate(
                Equalizer::Model(&model),
                link,
                spec,
                rx,
                sim,
                &[eval_power],
                cfg.eval_frames,
                cfg.seed,
            )?;
            Some(snr[0].snr_db)
        } else {
            None
        };
        history.push(HistoryRow {
            iteration: t,
            loss,
            snr_db,
            total_taps: model.total_taps(),
            power_mix_hash: fnv1a(power_indices),
        });
        if cfg.checkpoint_interval > 0
            && (t % cfg.checkpoint_interval == cfg.checkpoint_interval - 1
                || t + 1 == cfg.iterations)
        {
            checkpoints.push((t, model.clone()));
        }

        let initial = *initial_loss.get_or_insert(loss);
        if loss > 1e3 * initial {
            divergence_run += 1;
            if divergence_run >= 100 {
                return Err(Error::Diverged {
                    iteration: t,
                    loss,
                    initial,
                });
            }
        } else {
            divergence_run = 0;
        }
    }
    Ok(TrainOutcome {
        model,
        history,
        checkpoints,
    })
}

/// Sum the ESSM filter gradients across layers and write the sum back
/// into each layer's slot: with identical initialization this is
/// exactly training one shared filter.
fn tie_eta_gradients(model: &LdbpModel, layout: &ParamLayout, grads: &mut [f64]) {
    let essm_layers: Vec<usize> = model
        .layers
        .iter()
        .enumerate()
        .filter(|(_, l)| l.nonlinear.kind == NonlinearKind::Essm)
        .map(|(i, _)| i)
        .collect();
    if essm_layers.len() < 2 {
        return;
    }
    let len = layout.eta_range(essm_layers[0]).len();
    let mut shared = vec![0.0; len];
    for &i in &essm_layers {
        let range = layout.eta_range(i);
        for (acc, g) in shared.iter_mut().zip(&grads[range]) {
            *acc += g;
        }
    }
    for &i in &essm_layers {
        let range = layout.eta_range(i);
        grads[range].copy_from_slice(&shared);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init::{init_model, InitScheme, ModelBuilder};
    use crate::model::Layout;

    fn toy_spec() -> SignalSpec {
        SignalSpec {
            baud_rate_hz: 10.7e9,
            rolloff: 0.1,
            analog_oversampling: 4,
            digital_oversampling: 2,
            rrc_span_symbols: 16,
        }
    }

    fn toy_link(spans: usize) -> FiberLink {
        FiberLink {
            span_km: 80.0,
            num_spans: spans,
            ..FiberLink::default()
        }
    }

    fn toy_sim(n_symbols: usize, steps: usize, noiseless: bool) -> SimConfig {
        SimConfig {
            n_symbols,
            steps_per_span: steps,
            sizing: StepSizing::Logarithmic,
            noiseless,
            wdm: None,
        }
    }

    #[test]
    fn zero_iterations_leave_model_unchanged() {
        let link = toy_link(1);
        let spec = toy_spec();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, spec.digital_rate_hz());
        builder.ls = crate::init::LsFitConfig::for_spec(&spec);
        let model = init_model(&link, &builder).unwrap();
        let cfg = TrainConfig {
            iterations: 0,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let out = train(
            &model,
            &link,
            &spec,
            &RxConfig::for_spec(&spec),
            &toy_sim(64, 4, true),
            &cfg,
            &PruneSchedule::none(),
        )
        .unwrap();
        assert_eq!(out.model, model);
        assert!(out.history.is_empty());
    }

    #[test]
    fn training_is_bit_reproducible() {
        let link = toy_link(1);
        let spec = toy_spec();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 3, spec.digital_rate_hz());
        builder.ls = crate::init::LsFitConfig::for_spec(&spec);
        let model = init_model(&link, &builder).unwrap();
        let cfg = TrainConfig {
            iterations: 5,
            batch_size: 3,
            seed: 42,
            power_set_dbm: vec![0.0, 2.0],
            ..TrainConfig::default()
        };
        let rx = RxConfig::for_spec(&spec);
        let sim = toy_sim(64, 4, false);
        let a = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
        let b = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
        assert_eq!(a.model, b.model);
        for (x, y) in a.history.iter().zip(&b.history) {
            assert_eq!(x.loss.to_bits(), y.loss.to_bits());
            assert_eq!(x.power_mix_hash, y.power_mix_hash);
        }
    }

    #[test]
    fn loss_trend_decreases_on_linear_toy_link() {
        // Noiseless gamma = 0 link with a short LS init: 200 iterations
        // must reduce the median loss.
        let link = FiberLink {
            gamma_per_w_km: 0.0,
            ..toy_link(1)
        };
        let spec = toy_spec();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 2, spec.digital_rate_hz());
        builder.ls = crate::init::LsFitConfig::for_spec(&spec);
        let model = init_model(&link, &builder).unwrap();
        let cfg = TrainConfig {
            iterations: 200,
            batch_size: 2,
            seed: 7,
            learning_rate: 2e-3,
            ..TrainConfig::default()
        };
        let out = train(
            &model,
            &link,
            &spec,
            &RxConfig::for_spec(&spec),
            &toy_sim(64, 2, true),
            &cfg,
            &PruneSchedule::none(),
        )
        .unwrap();
        let losses: Vec<f64> = out.history.iter().map(|h| h.loss).collect();
        let median = |xs: &[f64]| {
            let mut v = xs.to_vec();
            v.sort_by(f64::total_cmp);
            v[v.len() / 2]
        };
        let first = median(&losses[..50]);
        let last = median(&losses[losses.len() - 50..]);
        assert!(last < first, "loss trend: first {first:.3e}, last {last:.3e}");
    }

    #[test]
    fn unit_init_training_gains_over_itself() {
        // Unit filters know nothing about the link; training must buy a
        // few dB of effective SNR over that starting point.
        let link = toy_link(2);
        let spec = toy_spec();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, spec.digital_rate_hz());
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let rx = RxConfig::for_spec(&spec);
        let sim = toy_sim(128, 8, false);
        let powers = [1.0];
        let before = evaluate(
            Equalizer::Model(&model),
            &link,
            &spec,
            &rx,
            &sim,
            &powers,
            16,
            123,
        )
        .unwrap();
        let cfg = TrainConfig {
            iterations: 700,
            batch_size: 8,
            seed: 3,
            power_set_dbm: vec![1.0],
            learning_rate: 2e-3,
            ..TrainConfig::default()
        };
        let out = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
        let after = evaluate(
            Equalizer::Model(&out.model),
            &link,
            &spec,
            &rx,
            &sim,
            &powers,
            16,
            123,
        )
        .unwrap();
        assert!(
            after[0].snr_db >= before[0].snr_db + 3.0,
            "unit init: {:.2} dB -> {:.2} dB",
            before[0].snr_db,
            after[0].snr_db
        );
    }

    #[test]
    fn evaluate_identity_on_clean_linear_channel() {
        // No distortion at all: the identity model recovers the symbols
        // up to the RRC truncation floor.
        let link = FiberLink {
            gamma_per_w_km: 0.0,
            beta2_ps2_per_km: 0.0,
            alpha_db_per_km: 0.0,
            span_km: 1.0,
            num_spans: 1,
            ..FiberLink::default()
        };
        let spec = SignalSpec {
            rrc_span_symbols: 32,
            ..toy_spec()
        };
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 0, spec.digital_rate_hz());
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let snr = evaluate(
            Equalizer::Model(&model),
            &link,
            &spec,
            &RxConfig::for_spec(&spec),
            &toy_sim(256, 1, true),
            &[0.0],
            4,
            9,
        )
        .unwrap();
        assert!(snr[0].snr_db > 40.0, "snr {}", snr[0].snr_db);
    }

    #[test]
    fn evaluate_deterministic() {
        let link = toy_link(1);
        let spec = toy_spec();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 3, spec.digital_rate_hz());
        builder.ls = crate::init::LsFitConfig::for_spec(&spec);
        let model = init_model(&link, &builder).unwrap();
        let rx = RxConfig::for_spec(&spec);
        let sim = toy_sim(64, 4, false);
        let a = evaluate(Equalizer::Model(&model), &link, &spec, &rx, &sim, &[0.0, 2.0], 8, 5).unwrap();
        let b = evaluate(Equalizer::Model(&model), &link, &spec, &rx, &sim, &[0.0, 2.0], 8, 5).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.snr_db.to_bits(), y.snr_db.to_bits());
        }
    }

    #[test]
    fn linear_equalizer_snr_drops_at_high_power() {
        // Physics sanity: on the nonlinear channel, CDC at high power is
        // strictly worse than at low power.
        let link = toy_link(2);
        let spec = toy_spec();
        let rx = RxConfig::for_spec(&spec);
        let sim = toy_sim(128, 16, false);
        let snrs = evaluate(Equalizer::Cdc, &link, &spec, &rx, &sim, &[-2.0, 9.0], 12, 11).unwrap();
        assert!(
            snrs[1].snr_db < snrs[0].snr_db,
            "CDC: {:.2} dB at -2 dBm vs {:.2} dB at 9 dBm",
            snrs[0].snr_db,
            snrs[1].snr_db
        );
    }
}
