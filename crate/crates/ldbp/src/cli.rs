//! Experiment runner behind the `ldbp` binary: JSON experiment
//! configuration, scenario presets, the simulate / train / evaluate /
//! prune-curve / response / tcd commands and their CSV/JSON outputs.
//!
//! Every run writes a manifest with the fully resolved configuration;
//! re-running a command from the same manifest reproduces the output
//! files byte for byte.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::channel::FiberLink;
use crate::error::{Error, Result};
use crate::init::{
    cd_memory_taps, init_model, InitScheme, LsFitConfig, ModelBuilder,
};
use crate::model::{overall_response, response_grid, LdbpModel, Layout};
use crate::rxdsp::RxConfig;
use crate::signal::SignalSpec;
use crate::train::{
    evaluate, train, Equalizer, PruneSchedule, SimConfig, TrainConfig, TrainOutcome,
};

/// The machine-readable experiment description; one file drives a whole
/// run. Unknown keys are rejected.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Root seed; all substreams (frames, noise, powers, init) derive
    /// from it.
    pub seed: u64,
    pub link: FiberLink,
    pub signal: SignalSpec,
    #[serde(default)]
    pub rx: Option<RxConfig>,
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub prune: PruneConfig,
    pub sim: SimConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub layout: Layout,
    pub steps_per_span: usize,
    pub total_steps: Option<usize>,
    /// Initial half lengths K per layer (one entry broadcasts).
    pub initial_half_lengths: Vec<usize>,
    /// Pruning targets per layer; presence enables pruning.
    pub target_half_lengths: Option<Vec<usize>>,
    pub init_scheme: InitScheme,
    pub essm_kappa: Option<usize>,
    pub loss_aware_leff: bool,
    /// Least-squares fit settings; band edge defaults to the pulse
    /// bandwidth when omitted.
    pub ls: Option<LsFitConfig>,
    pub log_adjust: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layout: Layout::Asymmetric,
            steps_per_span: 1,
            total_steps: None,
            initial_half_lengths: vec![4],
            target_half_lengths: None,
            init_scheme: InitScheme::LeastSquares,
            essm_kappa: None,
            loss_aware_leff: true,
            ls: None,
            log_adjust: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PruneConfig {
    /// Fraction of the run over which pruning events are spread.
    pub fraction: f64,
}

impl Default for PruneConfig {
    fn default() -> Self {
        Self { fraction: 0.4 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub powers_dbm: Vec<f64>,
    pub num_frames: usize,
    /// Resolution of the reference-DBP baseline.
    pub dbp_steps_per_span: usize,
    /// Snapshot cadence of the prune-curve runner (0: auto).
    pub checkpoint_interval: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            powers_dbm: vec![0.0],
            num_frames: 32,
            dbp_steps_per_span: 1,
            checkpoint_interval: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }

    /// Receiver settings, defaulted from the pulse shape.
    pub fn rx_config(&self) -> RxConfig {
        self.rx.clone().unwrap_or_else(|| RxConfig::for_spec(&self.signal))
    }

    pub fn ls_config(&self) -> LsFitConfig {
        self.model
            .ls
            .clone()
            .unwrap_or_else(|| LsFitConfig::for_spec(&self.signal))
    }

    /// Training config with the root seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn model_builder(&self) -> ModelBuilder {
        ModelBuilder {
            layout: self.model.layout,
            steps_per_span: self.model.steps_per_span,
            total_steps: self.model.total_steps,
            half_lengths: self.model.initial_half_lengths.clone(),
            scheme: self.model.init_scheme,
            seed: self.seed,
            sample_rate_hz: self.signal.digital_rate_hz(),
            ls: self.ls_config(),
            essm_kappa: self.model.essm_kappa,
            loss_aware: self.model.loss_aware_leff,
            log_adjust: self.model.log_adjust,
        }
    }

    pub fn build_model(&self) -> Result<LdbpModel> {
        init_model(&self.link, &self.model_builder())
    }

    /// Pruning schedule from the configured targets (empty when none).
    pub fn prune_schedule(&self, model: &LdbpModel) -> Result<PruneSchedule> {
        match &self.model.target_half_lengths {
            None => Ok(PruneSchedule::none()),
            Some(targets) => {
                let targets = if targets.len() == 1 {
                    vec![targets[0]; model.num_layers()]
                } else {
                    targets.clone()
                };
                PruneSchedule::front_loaded(
                    model,
                    &targets,
                    self.train.iterations,
                    self.prune.fraction,
                )
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.link.validate()?;
        self.signal.validate()?;
        self.train_config().validate()?;
        self.ls_config().validate()?;
        let rx = self.rx_config();
        if rx.digital_oversampling != self.signal.digital_oversampling {
            return Err(Error::Config(format!(
                "rx digital oversampling {} != signal digital oversampling {}",
                rx.digital_oversampling, self.signal.digital_oversampling
            )));
        }
        if self.sim.n_symbols == 0 {
            return Err(Error::Config("sim.n_symbols must be >= 1".into()));
        }
        if self.eval.powers_dbm.is_empty() {
            return Err(Error::Config("eval.powers_dbm must not be empty".into()));
        }
        if let Some(wdm) = &self.sim.wdm {
            if wdm.channels % 2 == 0 {
                return Err(Error::Config("wdm.channels must be odd".into()));
            }
        }
        if let Some(targets) = &self.model.target_half_lengths {
            let inits = &self.model.initial_half_lengths;
            if targets.len() != inits.len() && targets.len() != 1 && inits.len() != 1 {
                return Err(Error::Config(
                    "target_half_lengths and initial_half_lengths lengths differ".into(),
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.prune.fraction) {
            return Err(Error::Config("prune.fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ldbp",
    version,
    about = "Split-step fiber simulation and learned digital backpropagation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Experiment configuration file (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Named preset: looks up presets/<name>.json under the current
    /// directory (or takes the name as a literal path).
    #[arg(long)]
    pub preset: Option<String>,
    /// Override the configured root seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Upper bound on worker threads. Results are bit-identical for any
    /// value; the current implementation runs single-threaded.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Disable amplifier noise.
    #[arg(long)]
    pub noiseless: bool,
    /// Override the Kerr coefficient (1/(W km)).
    #[arg(long)]
    pub gamma: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forward propagation plus reference-equalizer (CDC, DBP) SNR table.
    Simulate(RunArgs),
    /// Initialize and train a model; writes the model dump and history.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Resume from a model dump instead of initializing.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a trained model dump over the configured power sweep.
    Evaluate {
        #[command(flatten)]
        run: RunArgs,
        /// Model dump to evaluate.
        #[arg(long)]
        model: PathBuf,
    },
    /// Train with progressive pruning and record (total taps, SNR).
    PruneCurve(RunArgs),
    /// Per-step and overall frequency responses of a model dump.
    Response {
        /// Model dump.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Frequency grid points over [-0.5, 0.5] * f_s.
        #[arg(long, default_value_t = 1024)]
        points: usize,
    },
    /// CD memory in samples for the configured link and signal.
    Tcd(RunArgs),
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let path = match (&args.config, &args.preset) {
        (Some(p), _) => p.clone(),
        (None, Some(name)) => {
            let literal = PathBuf::from(name);
            if literal.exists() {
                literal
            } else {
                let preset = PathBuf::from("presets").join(format!("{name}.json"));
                if !preset.exists() {
                    return Err(Error::Config(format!(
                        "preset '{name}' not found (looked for {})",
                        preset.display()
                    )));
                }
                preset
            }
        }
        (None, None) => {
            return Err(Error::Config(
                "either --config or --preset is required".into(),
            ))
        }
    };
    let mut cfg = ExperimentConfig::from_file(&path)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.noiseless {
        cfg.sim.noiseless = true;
    }
    if let Some(gamma) = args.gamma {
        cfg.link.gamma_per_w_km = gamma;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
}

fn write_manifest(out_dir: &Path, command: &str, cfg: &ExperimentConfig) -> Result<()> {
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(())
}

fn write_file(out_dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join(name), contents)?;
    Ok(())
}

/// SNR table of the non-learned equalizers.
pub fn cmd_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, "simulate", cfg)?;
    let rx = cfg.rx_config();
    let cdc = evaluate(
        Equalizer::Cdc,
        &cfg.link,
        &cfg.signal,
        &rx,
        &cfg.sim,
        &cfg.eval.powers_dbm,
        cfg.eval.num_frames,
        cfg.seed,
    )?;
    let dbp = evaluate(
        Equalizer::Dbp {
            steps_per_span: cfg.eval.dbp_steps_per_span,
        },
        &cfg.link,
        &cfg.signal,
        &rx,
        &cfg.sim,
        &cfg.eval.powers_dbm,
        cfg.eval.num_frames,
        cfg.seed,
    )?;
    let mut csv = String::from("power_dbm,snr_cdc_db,snr_dbp_db\n");
    for (c, d) in cdc.iter().zip(&dbp) {
        csv.push_str(&format!("{},{},{}\n", c.power_dbm, c.snr_db, d.snr_db));
    }
    write_file(out_dir, "simulate.csv", &csv)?;
    Ok(())
}

fn history_csv(outcome: &TrainOutcome) -> String {
    let mut csv = String::from("iteration,loss,snr_db,total_taps,power_mix_hash\n");
    for row in &outcome.history {
        let snr = row.snr_db.map(|v| v.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{},{},{},{:016x}\n",
            row.iteration, row.loss, snr, row.total_taps, row.power_mix_hash
        ));
    }
    csv
}

/// Initialize (or resume) and train; writes model.json and history.csv.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path, resume: Option<&Path>) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, "train", cfg)?;
    let model = match resume {
        Some(path) => LdbpModel::load_json(path)?,
        None => cfg.build_model()?,
    };
    let schedule = cfg.prune_schedule(&model)?;
    let outcome = train(
        &model,
        &cfg.link,
        &cfg.signal,
        &cfg.rx_config(),
        &cfg.sim,
        &cfg.train_config(),
        &schedule,
    )?;
    outcome.model.save_json(&out_dir.join("model.json"))?;
    write_file(out_dir, "history.csv", &history_csv(&outcome))?;
    let total = outcome.model.total_taps();
    println!("trained {} layers, total taps {total}", outcome.model.num_layers());
    Ok(())
}

/// Evaluate a model dump over the configured power sweep.
pub fn cmd_evaluate(cfg: &ExperimentConfig, out_dir: &Path, model_path: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, "evaluate", cfg)?;
    let model = LdbpModel::load_json(model_path)?;
    let snrs = evaluate(
        Equalizer::Model(&model),
        &cfg.link,
        &cfg.signal,
        &cfg.rx_config(),
        &cfg.sim,
        &cfg.eval.powers_dbm,
        cfg.eval.num_frames,
        cfg.seed,
    )?;
    let mut csv = String::from("power_dbm,snr_db,capped\n");
    for row in &snrs {
        csv.push_str(&format!("{},{},{}\n", row.power_dbm, row.snr_db, row.capped));
    }
    write_file(out_dir, "evaluate.csv", &csv)?;
    Ok(())
}

/// Train with pruning and tabulate SNR against the overall impulse
/// response length: one row per distinct tap count, using the last
/// (most-trained) snapshot at that count.
pub fn cmd_prune_curve(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, "prune-curve", cfg)?;
    if cfg.model.target_half_lengths.is_none() {
        return Err(Error::Config(
            "prune-curve requires model.target_half_lengths".into(),
        ));
    }
    let model = cfg.build_model()?;
    let schedule = cfg.prune_schedule(&model)?;
    let mut train_cfg = cfg.train_config();
    if train_cfg.checkpoint_interval == 0 {
        train_cfg.checkpoint_interval = if cfg.eval.checkpoint_interval > 0 {
            cfg.eval.checkpoint_interval
        } else {
            (cfg.train.iterations / 64).max(1)
        };
    }
    let rx = cfg.rx_config();
    let outcome = train(
        &model,
        &cfg.link,
        &cfg.signal,
        &rx,
        &cfg.sim,
        &train_cfg,
        &schedule,
    )?;
    // Last checkpoint per distinct tap count, in pruning order.
    let mut picked: Vec<(usize, usize, LdbpModel)> = Vec::new(); // (taps, iter, model)
    for (iter, snapshot) in &outcome.checkpoints {
        let taps = snapshot.total_taps();
        match picked.last_mut() {
            Some(last) if last.0 == taps => {
                last.1 = *iter;
                last.2 = snapshot.clone();
            }
            _ => picked.push((taps, *iter, snapshot.clone())),
        }
    }
    let t_cd = cd_memory_taps(
        cfg.link.beta2_ps2_per_km,
        (1.0 + cfg.signal.rolloff) * cfg.signal.baud_rate_hz,
        cfg.link.total_km(),
        cfg.signal.digital_rate_hz(),
    );
    let curve_power = cfg.eval.powers_dbm[0];
    let mut csv = String::from("total_taps,snr_db,iteration,t_cd_taps\n");
    for (taps, iter, snapshot) in &picked {
        let snr = evaluate(
            Equalizer::Model(snapshot),
            &cfg.link,
            &cfg.signal,
            &rx,
            &cfg.sim,
            &[curve_power],
            cfg.eval.num_frames,
            cfg.seed,
        )?;
        csv.push_str(&format!("{},{},{},{}\n", taps, snr[0].snr_db, iter, t_cd));
    }
    write_file(out_dir, "prune_curve.csv", &csv)?;
    outcome.model.save_json(&out_dir.join("model.json"))?;
    Ok(())
}

/// Per-step and overall magnitude/phase responses of a model dump.
pub fn cmd_response(model_path: &Path, out_dir: &Path, points: usize) -> Result<()> {
    if points < 1024 {
        return Err(Error::Config(
            "response grid needs at least 1024 points".into(),
        ));
    }
    std::fs::create_dir_all(out_dir)?;
    let model = LdbpModel::load_json(model_path)?;
    let (overall, total_taps) = overall_response(&model, points);
    let grid = response_grid(points);
    let mut header = String::from("freq_over_fs,overall_mag_db,overall_phase_rad");
    for i in 0..model.num_layers() {
        header.push_str(&format!(",step{}_mag_db,step{}_phase_rad", i + 1, i + 1));
    }
    let mut csv = header + "\n";
    for (p, &w) in grid.iter().enumerate() {
        let f = w / (2.0 * std::f64::consts::PI);
        let mut line = format!(
            "{},{},{}",
            f,
            20.0 * overall[p].norm().log10(),
            overall[p].arg()
        );
        for layer in &model.layers {
            let resp = layer.linear.response(w);
            line.push_str(&format!(",{},{}", 20.0 * resp.norm().log10(), resp.arg()));
        }
        csv.push_str(&line);
        csv.push('\n');
    }
    write_file(out_dir, "response.csv", &csv)?;
    println!("total taps {total_taps}");
    Ok(())
}

/// CD memory of the configured scenario.
pub fn cmd_tcd(cfg: &ExperimentConfig, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    write_manifest(out_dir, "tcd", cfg)?;
    let t_cd = cd_memory_taps(
        cfg.link.beta2_ps2_per_km,
        (1.0 + cfg.signal.rolloff) * cfg.signal.baud_rate_hz,
        cfg.link.total_km(),
        cfg.signal.digital_rate_hz(),
    );
    write_file(out_dir, "tcd.csv", &format!("t_cd_taps\n{t_cd}\n"))?;
    println!("t_cd_taps = {t_cd}");
    Ok(())
}

/// Run a parsed command line; returns the process exit code
/// (0 ok, 2 configuration error, 3 numerical failure).
pub fn run(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Simulate(args) => load_config(args).and_then(|cfg| cmd_simulate(&cfg, &args.out)),
        Command::Train { run, model } => {
            load_config(run).and_then(|cfg| cmd_train(&cfg, &run.out, model.as_deref()))
        }
        Command::Evaluate { run, model } => {
            load_config(run).and_then(|cfg| cmd_evaluate(&cfg, &run.out, model))
        }
        Command::PruneCurve(args) => {
            load_config(args).and_then(|cfg| cmd_prune_curve(&cfg, &args.out))
        }
        Command::Response { model, out, points } => cmd_response(model, out, *points),
        Command::Tcd(args) => load_config(args).and_then(|cfg| cmd_tcd(&cfg, &args.out)),
    };
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) | Error::Json(_) | Error::Io(_) => 2,
                _ => 3,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_config() -> ExperimentConfig {
        ExperimentConfig {
            seed: 1,
            link: FiberLink {
                num_spans: 1,
                ..FiberLink::default()
            },
            signal: SignalSpec {
                analog_oversampling: 4,
                rrc_span_symbols: 16,
                ..SignalSpec::default()
            },
            rx: None,
            model: ModelConfig::default(),
            train: TrainConfig {
                iterations: 2,
                batch_size: 2,
                ..TrainConfig::default()
            },
            prune: PruneConfig::default(),
            sim: SimConfig {
                n_symbols: 64,
                steps_per_span: 4,
                ..SimConfig::default()
            },
            eval: EvalConfig {
                powers_dbm: vec![0.0],
                num_frames: 2,
                ..EvalConfig::default()
            },
        }
    }

    #[test]
    fn config_round_trip_and_validation() {
        let cfg = toy_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let parsed: ExperimentConfig = serde_json::from_str(&text).unwrap();
        parsed.validate().unwrap();
    }

    #[test]
    fn unknown_keys_rejected() {
        let cfg = toy_config();
        let mut value: serde_json::Value =
            serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        value["link"]["bogus_key"] = serde_json::json!(1.0);
        assert!(serde_json::from_value::<ExperimentConfig>(value).is_err());
    }

    #[test]
    fn oversampling_validation() {
        let mut cfg = toy_config();
        cfg.signal.analog_oversampling = 2;
        cfg.signal.digital_oversampling = 2;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn train_and_artifacts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = toy_config();
        cmd_train(&cfg, dir.path(), None).unwrap();
        assert!(dir.path().join("model.json").exists());
        assert!(dir.path().join("history.csv").exists());
        assert!(dir.path().join("manifest.json").exists());
        let model = LdbpModel::load_json(&dir.path().join("model.json")).unwrap();
        assert_eq!(model.num_layers(), 1);
        // Resume runs from the dump.
        let dir2 = tempfile::tempdir().unwrap();
        cmd_train(&cfg, dir2.path(), Some(&dir.path().join("model.json"))).unwrap();
    }

    #[test]
    fn simulate_outputs_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let cfg = toy_config();
        cmd_simulate(&cfg, dir_a.path()).unwrap();
        cmd_simulate(&cfg, dir_b.path()).unwrap();
        let a = std::fs::read(dir_a.path().join("simulate.csv")).unwrap();
        let b = std::fs::read(dir_b.path().join("simulate.csv")).unwrap();
        assert_eq!(a, b);
    }
}
