//! Transmitter-side signal generation: symbol sources, root-raised-cosine
//! pulse shaping and WDM multiplexing.
//!
//! Frames are treated as periodic, so shaping uses circular convolution
//! over the frame: there are no edge transients and linear-inversion
//! tests can be exact.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::dbm_to_watts;

/// Symbol alphabet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modulation {
    /// Circularly-symmetric complex Gaussian, unit mean power.
    GaussianIid,
    /// 16-QAM with per-dimension levels {±1, ±3}/sqrt(10); exactly unit
    /// mean power over the alphabet.
    Qam16,
}

/// A frame of complex symbols with its launch power and the seed it was
/// drawn from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymbolFrame {
    pub symbols: Vec<Complex64>,
    pub modulation: Modulation,
    /// Launch power in dBm applied by [`modulate`].
    pub power_dbm: f64,
    pub seed: u64,
}

impl SymbolFrame {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn with_power(mut self, power_dbm: f64) -> Self {
        self.power_dbm = power_dbm;
        self
    }

    /// Launch power in watts.
    pub fn power_watts(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    /// Empirical mean symbol power (1/N) sum |s_i|^2.
    pub fn mean_power(&self) -> f64 {
        self.symbols.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.symbols.len() as f64
    }
}

/// A vector of complex baseband samples with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal {
    pub samples: Vec<Complex64>,
    pub sample_rate_hz: f64,
}

impl ComplexSignal {
    /// Build a signal, checking the boundary invariants (nonempty,
    /// positive rate, all samples finite).
    pub fn new(samples: Vec<Complex64>, sample_rate_hz: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Config("signal must contain at least one sample".into()));
        }
        if !(sample_rate_hz > 0.0) {
            return Err(Error::Config(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        let sig = Self {
            samples,
            sample_rate_hz,
        };
        sig.check_finite("ComplexSignal::new")?;
        Ok(sig)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sum of |x_k|^2.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }

    /// Time-averaged power in watts.
    pub fn mean_power(&self) -> f64 {
        self.energy() / self.len() as f64
    }

    pub fn check_finite(&self, context: &str) -> Result<()> {
        if self
            .samples
            .iter()
            .any(|s| !s.re.is_finite() || !s.im.is_finite())
        {
            return Err(Error::NonFinite {
                context: context.into(),
            });
        }
        Ok(())
    }
}

/// Pulse-shaping and sampling parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSpec {
    /// Symbol rate R_s in Hz.
    pub baud_rate_hz: f64,
    /// RRC roll-off factor in [0, 1].
    pub rolloff: f64,
    /// Samples per symbol used to simulate the waveform channel.
    pub analog_oversampling: usize,
    /// Samples per symbol after the receiver front end.
    pub digital_oversampling: usize,
    /// Truncation span of the RRC filter in symbols.
    pub rrc_span_symbols: usize,
}

impl SignalSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.baud_rate_hz > 0.0) {
            return Err(Error::Config("baud_rate_hz must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.rolloff) {
            return Err(Error::Config(format!(
                "rolloff must lie in [0, 1], got {}",
                self.rolloff
            )));
        }
        if self.digital_oversampling < 1 || self.analog_oversampling <= self.digital_oversampling {
            return Err(Error::Config(format!(
                "need analog_oversampling > digital_oversampling >= 1, got {} and {}",
                self.analog_oversampling, self.digital_oversampling
            )));
        }
        if self.rrc_span_symbols == 0 {
            return Err(Error::Config("rrc_span_symbols must be >= 1".into()));
        }
        Ok(())
    }

    /// Digital sample rate f_s = rho_d * R_s.
    pub fn digital_rate_hz(&self) -> f64 {
        self.digital_oversampling as f64 * self.baud_rate_hz
    }

    /// Analog (simulation) sample rate rho_a * R_s.
    pub fn analog_rate_hz(&self) -> f64 {
        self.analog_oversampling as f64 * self.baud_rate_hz
    }

    /// Occupied bandwidth (1 + rolloff) * R_s of one shaped channel.
    pub fn occupied_bw_hz(&self) -> f64 {
        (1.0 + self.rolloff) * self.baud_rate_hz
    }
}

impl Default for SignalSpec {
    fn default() -> Self {
        Self {
            baud_rate_hz: 10.7e9,
            rolloff: 0.1,
            analog_oversampling: 6,
            digital_oversampling: 2,
            rrc_span_symbols: 32,
        }
    }
}

/// Draw `count` i.i.d. symbols. Gaussian symbols have unit mean power in
/// expectation; the 16-QAM alphabet is unit power exactly.
pub fn generate_symbols(count: usize, modulation: Modulation, seed: u64) -> Result<SymbolFrame> {
    if count == 0 {
        return Err(Error::Config("symbol count must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let symbols = match modulation {
        Modulation::GaussianIid => {
            // Unit mean power: variance 1/2 per real dimension.
            let normal = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).unwrap();
            (0..count)
                .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                .collect()
        }
        Modulation::Qam16 => {
            let levels = [-3.0, -1.0, 1.0, 3.0];
            let scale = 1.0 / 10f64.sqrt();
            (0..count)
                .map(|_| {
                    let i = levels[rng.gen_range(0..4)];
                    let q = levels[rng.gen_range(0..4)];
                    Complex64::new(i * scale, q * scale)
                })
                .collect()
        }
    };
    Ok(SymbolFrame {
        symbols,
        modulation,
        power_dbm: 0.0,
        seed,
    })
}

/// Root-raised-cosine taps at `oversampling` samples per symbol,
/// normalized to unit energy. Length is `rrc_span_symbols * oversampling + 1`
/// and the vector is even-symmetric about its midpoint.
pub fn rrc_taps(spec: &SignalSpec, oversampling: usize) -> Result<Vec<f64>> {
    if oversampling < 1 {
        return Err(Error::Config("oversampling must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&spec.rolloff) {
        return Err(Error::Config(format!(
            "rolloff must lie in [0, 1], got {}",
            spec.rolloff
        )));
    }
    let half = spec.rrc_span_symbols * oversampling;
    if half % 2 != 0 {
        return Err(Error::Config(
            "rrc_span_symbols * oversampling must be even so the filter can be centered".into(),
        ));
    }
    let half = half / 2;
    let beta = spec.rolloff;
    let mut taps: Vec<f64> = (-(half as i64)..=half as i64)
        .map(|k| {
            let t = k as f64 / oversampling as f64; // time in symbol periods
            rrc_impulse(t, beta)
        })
        .collect();
    let energy: f64 = taps.iter().map(|v| v * v).sum();
    let scale = 1.0 / energy.sqrt();
    for v in &mut taps {
        *v *= scale;
    }
    Ok(taps)
}

/// Unnormalized RRC impulse response at time `t` (symbol periods), with
/// the removable singularities handled by their analytic limits.
fn rrc_impulse(t: f64, beta: f64) -> f64 {
    use std::f64::consts::PI;
    if beta == 0.0 {
        // Pure sinc.
        return if t == 0.0 { 1.0 } else { (PI * t).sin() / (PI * t) };
    }
    if t == 0.0 {
        return 1.0 + beta * (4.0 / PI - 1.0);
    }
    let singular = 1.0 / (4.0 * beta);
    if ((t.abs() - singular) / singular).abs() < 1e-9 {
        let a = PI / (4.0 * beta);
        return (beta / 2f64.sqrt())
            * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - beta)).sin() + 4.0 * beta * t * (PI * t * (1.0 + beta)).cos();
    let den = PI * t * (1.0 - (4.0 * beta * t).powi(2));
    num / den
}

/// Shape a symbol frame into a waveform at the given oversampling.
///
/// The output is `sqrt(P_W * oversampling)` times the circular
/// convolution of the zero-stuffed symbols with the unit-energy RRC
/// taps; the `sqrt(oversampling)` factor makes the time-averaged
/// waveform power equal to the frame's launch power.
pub fn modulate(
    frame: &SymbolFrame,
    spec: &SignalSpec,
    oversampling: usize,
) -> Result<ComplexSignal> {
    if oversampling != spec.analog_oversampling && oversampling != spec.digital_oversampling {
        return Err(Error::Config(format!(
            "oversampling {} is neither the analog ({}) nor the digital ({}) factor",
            oversampling, spec.analog_oversampling, spec.digital_oversampling
        )));
    }
    let taps = rrc_taps(spec, oversampling)?;
    let n = frame.len() * oversampling;
    if taps.len() > n {
        return Err(Error::FilterTooLong {
            filter_len: taps.len(),
            block_len: n,
        });
    }
    let half = (taps.len() - 1) as i64 / 2;
    let amp = (frame.power_watts() * oversampling as f64).sqrt();
    let mut samples = vec![Complex64::default(); n];
    for (m, s) in frame.symbols.iter().enumerate() {
        if s.re == 0.0 && s.im == 0.0 {
            continue;
        }
        let center = (m * oversampling) as i64;
        let scaled = amp * s;
        for (j, &g) in taps.iter().enumerate() {
            let idx = (center + j as i64 - half).rem_euclid(n as i64) as usize;
            samples[idx] += scaled * g;
        }
    }
    ComplexSignal::new(samples, oversampling as f64 * spec.baud_rate_hz)
}

/// Sum frequency-shifted copies of the per-channel waveforms onto one
/// grid: channel c is shifted by (c - center) * spacing with the middle
/// channel unshifted. Channel count must be odd and every shifted
/// spectrum must fit inside the simulation bandwidth.
pub fn wdm_multiplex(
    channels: &[ComplexSignal],
    spacing_hz: f64,
    occupied_bw_hz: f64,
) -> Result<ComplexSignal> {
    if channels.is_empty() || channels.len() % 2 == 0 {
        return Err(Error::Config(format!(
            "WDM needs an odd number of channels, got {}",
            channels.len()
        )));
    }
    let n = channels[0].len();
    let fs = channels[0].sample_rate_hz;
    for (c, ch) in channels.iter().enumerate() {
        if ch.len() != n || ch.sample_rate_hz != fs {
            return Err(Error::Config(format!(
                "WDM channel {c} has mismatched length or sample rate"
            )));
        }
    }
    let center = (channels.len() / 2) as i64;
    for (c, _) in channels.iter().enumerate() {
        let offset = (c as i64 - center) as f64 * spacing_hz;
        let occupied = offset.abs() + occupied_bw_hz / 2.0;
        if occupied >= fs / 2.0 {
            return Err(Error::SpectralOverflow {
                channel: c,
                occupied_hz: occupied,
                limit_hz: fs / 2.0,
            });
        }
    }
    let mut samples = vec![Complex64::default(); n];
    for (c, ch) in channels.iter().enumerate() {
        let offset = (c as i64 - center) as f64 * spacing_hz;
        if offset == 0.0 {
            for (acc, v) in samples.iter_mut().zip(&ch.samples) {
                *acc += v;
            }
        } else {
            let step = 2.0 * std::f64::consts::PI * offset / fs;
            for (t, (acc, v)) in samples.iter_mut().zip(&ch.samples).enumerate() {
                *acc += v * Complex64::from_polar(1.0, step * t as f64);
            }
        }
    }
    ComplexSignal::new(samples, fs)
}
