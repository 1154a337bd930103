use ldbp::channel::{FiberLink, StepSizing};
use ldbp::init::{cd_memory_taps, init_model, LsFitConfig, ModelBuilder};
use ldbp::model::{LdbpModel, Layout};
use ldbp::rxdsp::RxConfig;
use ldbp::signal::SignalSpec;
use ldbp::train::{evaluate, train, Equalizer, PruneSchedule, SimConfig, TrainConfig};
use std::path::Path;

fn setup() -> (FiberLink, SignalSpec, RxConfig, SimConfig) {
    let link = FiberLink { span_km: 80.0, num_spans: 5, ..FiberLink::default() };
    let spec = SignalSpec {
        baud_rate_hz: 10.7e9, rolloff: 0.1,
        analog_oversampling: 4, digital_oversampling: 2, rrc_span_symbols: 32,
    };
    let rx = RxConfig::for_spec(&spec);
    let sim = SimConfig { n_symbols: 256, steps_per_span: 50, sizing: StepSizing::Logarithmic, noiseless: false, wdm: None };
    (link, spec, rx, sim)
}

#[test]
fn stage1() {
    let (link, spec, rx, sim) = setup();
    let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, spec.digital_rate_hz());
    builder.ls = LsFitConfig::for_spec(&spec);
    let model = init_model(&link, &builder).unwrap();
    let cfg = TrainConfig {
        iterations: 2000, batch_size: 16, seed: 1,
        power_set_dbm: vec![2.0, 3.0, 4.0],
        ..TrainConfig::default()
    };
    let trained = train(&model, &link, &spec, &rx, &sim, &cfg, &PruneSchedule::none()).unwrap();
    trained.model.save_json(Path::new("/tmp/c6_model.json")).unwrap();
    let snr = evaluate(Equalizer::Model(&trained.model), &link, &spec, &rx, &sim, &[3.0], 48, 777).unwrap();
    println!("stage1 done, +3 dBm: {:.2} dB", snr[0].snr_db);
}

#[test]
fn stage2() {
    let (link, spec, rx, sim) = setup();
    let trained = LdbpModel::load_json(Path::new("/tmp/c6_model.json")).unwrap();
    let schedule = PruneSchedule::front_loaded(&trained, &[0, 0, 0, 0, 0], 2000, 0.4).unwrap();
    let prune_cfg = TrainConfig {
        iterations: 2000, batch_size: 16, seed: 5,
        power_set_dbm: vec![2.0, 3.0, 4.0],
        checkpoint_interval: 20,
        ..TrainConfig::default()
    };
    let pruned = train(&trained, &link, &spec, &rx, &sim, &prune_cfg, &schedule).unwrap();
    let mut picked: Vec<(usize, usize, LdbpModel)> = Vec::new();
    for (iter, snap) in &pruned.checkpoints {
        let taps = snap.total_taps();
        match picked.last_mut() {
            Some(last) if last.0 == taps => { last.1 = *iter; last.2 = snap.clone(); }
            _ => picked.push((taps, *iter, snap.clone())),
        }
    }
    let t_cd = cd_memory_taps(link.beta2_ps2_per_km, 1.1 * spec.baud_rate_hz, link.total_km(), spec.digital_rate_hz());
    let unpruned = evaluate(Equalizer::Model(&trained), &link, &spec, &rx, &sim, &[3.0], 32, 777).unwrap()[0].snr_db;
    println!("T_cd = {t_cd:.1}, unpruned ref +3 dBm = {unpruned:.2} dB");
    for (taps, iter, snap) in &picked {
        let snr = evaluate(Equalizer::Model(snap), &link, &spec, &rx, &sim, &[3.0], 32, 777).unwrap();
        println!("taps {taps:2} (iter {iter:4}): {:.2} dB (delta {:+.2})", snr[0].snr_db, snr[0].snr_db - unpruned);
    }
}
