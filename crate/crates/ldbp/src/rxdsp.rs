//! Receiver chain around the equalizer: brick-wall low-pass and
//! decimation, reference equalizers (CD compensation and split-step
//! backpropagation with exact frequency-domain linear steps), matched
//! filtering, genie phase correction and the effective-SNR metric.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{angular_freqs, FiberLink};
use crate::error::{Error, Result};
use crate::fft;
use crate::init::StepPlan;
use crate::model::Layout;
use crate::signal::{ComplexSignal, SignalSpec, SymbolFrame};

/// Receiver front-end parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RxConfig {
    /// Brick-wall bandwidth in Hz; `None` selects the digital sample
    /// rate rho_d * R_s.
    pub lpf_bandwidth_hz: Option<f64>,
    pub digital_oversampling: usize,
}

impl RxConfig {
    pub fn for_spec(spec: &SignalSpec) -> Self {
        Self {
            lpf_bandwidth_hz: None,
            digital_oversampling: spec.digital_oversampling,
        }
    }

    pub fn bandwidth_hz(&self, spec: &SignalSpec) -> f64 {
        self.lpf_bandwidth_hz
            .unwrap_or(self.digital_oversampling as f64 * spec.baud_rate_hz)
    }
}

/// Ideal brick-wall low-pass followed by decimation to the digital
/// rate: DFT bins with |f| > bandwidth/2 are zeroed, then every
/// (rho_a / rho_d)-th sample is kept. The ratio must be an integer.
pub fn lowpass_downsample(
    y: &ComplexSignal,
    cfg: &RxConfig,
    spec: &SignalSpec,
) -> Result<ComplexSignal> {
    if spec.analog_oversampling % cfg.digital_oversampling != 0 {
        return Err(Error::Config(format!(
            "decimation ratio {}/{} is not an integer",
            spec.analog_oversampling, cfg.digital_oversampling
        )));
    }
    let decim = spec.analog_oversampling / cfg.digital_oversampling;
    let n = y.len();
    let half_bw = cfg.bandwidth_hz(spec) / 2.0;
    let mut spectrum = fft::fft(&y.samples);
    for (s, w) in spectrum.iter_mut().zip(angular_freqs(n, y.sample_rate_hz)) {
        let f = w / (2.0 * std::f64::consts::PI);
        if f.abs() > half_bw {
            *s = Complex64::default();
        }
    }
    fft::ifft_in_place(&mut spectrum);
    let samples: Vec<Complex64> = spectrum.into_iter().step_by(decim).collect();
    ComplexSignal::new(samples, y.sample_rate_hz / decim as f64)
}

/// Exact frequency-domain CD compensation over the whole link (the
/// linear-equalization baseline).
pub fn cdc_equalize(r: &ComplexSignal, link: &FiberLink) -> ComplexSignal {
    let n = r.len();
    let beta2 = link.beta2_s2();
    let total = link.total_km();
    let mut spectrum = fft::fft(&r.samples);
    for (s, w) in spectrum.iter_mut().zip(angular_freqs(n, r.sample_rate_hz)) {
        *s *= Complex64::from_polar(1.0, -0.5 * beta2 * w * w * total);
    }
    fft::ifft_in_place(&mut spectrum);
    ComplexSignal {
        samples: spectrum,
        sample_rate_hz: r.sample_rate_hz,
    }
}

/// Split-step backpropagation with exact per-step frequency-domain CD
/// inversion and negated Kerr steps: the non-learned reference
/// equalizer. Runs on the digital-rate signal.
pub fn reference_dbp(r: &ComplexSignal, link: &FiberLink, steps_per_span: usize) -> ComplexSignal {
    if link.num_spans == 0 {
        return r.clone();
    }
    let plan = StepPlan::per_span(link, steps_per_span, 0.4);
    let effective = plan.effective_lengths(Layout::Asymmetric, link.alpha_np(), true);
    let n = r.len();
    let freqs = angular_freqs(n, r.sample_rate_hz);
    let beta2 = link.beta2_s2();
    let mut buf = r.samples.clone();
    for (delta, eff) in plan.deltas_km.iter().zip(&effective) {
        fft::fft_in_place(&mut buf);
        for (s, w) in buf.iter_mut().zip(&freqs) {
            *s *= Complex64::from_polar(1.0, -0.5 * beta2 * w * w * delta);
        }
        fft::ifft_in_place(&mut buf);
        let coef = -link.gamma_per_w_km * eff;
        if coef != 0.0 {
            for v in buf.iter_mut() {
                *v *= Complex64::from_polar(1.0, coef * v.norm_sqr());
            }
        }
    }
    ComplexSignal {
        samples: buf,
        sample_rate_hz: r.sample_rate_hz,
    }
}

/// Matched RRC filtering and downsampling to one sample per symbol:
/// tilde_s_m = rho_d^{-1/2} sum_k g_k u_{m rho_d - k} (circular).
pub fn matched_filter_downsample(u: &ComplexSignal, spec: &SignalSpec) -> Result<Vec<Complex64>> {
    let rho = spec.digital_oversampling;
    let taps = crate::signal::rrc_taps(spec, rho)?;
    let n = u.len();
    if taps.len() > n {
        return Err(Error::FilterTooLong {
            filter_len: taps.len(),
            block_len: n,
        });
    }
    if n % rho != 0 {
        return Err(Error::Config(format!(
            "signal length {n} is not a multiple of the oversampling {rho}"
        )));
    }
    let n_sym = n / rho;
    let half = (taps.len() - 1) as i64 / 2;
    let scale = 1.0 / (rho as f64).sqrt();
    let mut symbols = Vec::with_capacity(n_sym);
    for m in 0..n_sym {
        let center = (m * rho) as i64;
        let mut acc = Complex64::default();
        for (j, &g) in taps.iter().enumerate() {
            let idx = (center - (j as i64 - half)).rem_euclid(n as i64) as usize;
            acc += g * u.samples[idx];
        }
        symbols.push(scale * acc);
    }
    Ok(symbols)
}

/// Genie phase correction: rotate the estimates by the phase of the
/// correlation with the reference, hat_s = tilde_s e^{-j phi} with
/// phi = arg(s^H tilde_s). Returns the corrected symbols and phi.
pub fn phase_correct(s_tilde: &[Complex64], s_ref: &[Complex64]) -> (Vec<Complex64>, f64) {
    let corr: Complex64 = s_ref
        .iter()
        .zip(s_tilde)
        .map(|(r, t)| r.conj() * t)
        .sum();
    let phi = corr.arg();
    let rot = Complex64::from_polar(1.0, -phi);
    (s_tilde.iter().map(|s| s * rot).collect(), phi)
}

/// Mean squared symbol error ||a - b||^2 / N.
pub fn mse(estimate: &[Complex64], reference: &[Complex64]) -> f64 {
    assert_eq!(estimate.len(), reference.len());
    estimate
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / estimate.len() as f64
}

/// Error-energy floor below which the SNR is reported as capped rather
/// than dividing by ~0 (per symbol).
const SNR_CAP_FLOOR: f64 = 1e-15;

/// Effective SNR estimated from per-frame symbol error energies.
#[derive(Debug, Clone, Copy)]
pub struct SnrEstimate {
    pub linear: f64,
    /// Set when any frame hit the error floor; the value is a cap, not
    /// a measurement.
    pub capped: bool,
}

impl SnrEstimate {
    pub fn db(&self) -> f64 {
        10.0 * self.linear.log10()
    }
}

/// SNR = N_sym * mean over frames of 1 / ||hat_s - s||^2: the sample
/// mean of inverse per-frame error energies, not the inverse of the
/// mean MSE.
pub fn effective_snr_from_energies(n_sym: usize, error_energies: &[f64]) -> SnrEstimate {
    assert!(!error_energies.is_empty());
    let floor = SNR_CAP_FLOOR * n_sym as f64;
    let mut capped = false;
    let mean_inverse = error_energies
        .iter()
        .map(|&e| {
            if e < floor {
                capped = true;
                1.0 / floor
            } else {
                1.0 / e
            }
        })
        .sum::<f64>()
        / error_energies.len() as f64;
    SnrEstimate {
        linear: n_sym as f64 * mean_inverse,
        capped,
    }
}

/// Effective SNR over (estimate, reference) symbol-frame pairs.
pub fn effective_snr(frames: &[(Vec<Complex64>, Vec<Complex64>)]) -> SnrEstimate {
    let n_sym = frames[0].0.len();
    let energies: Vec<f64> = frames
        .iter()
        .map(|(est, reference)| {
            est.iter()
                .zip(reference)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum()
        })
        .collect();
    effective_snr_from_energies(n_sym, &energies)
}

/// Full symbol-recovery path behind the equalizer: matched filter,
/// genie amplitude normalization by 1/sqrt(P), genie phase correction.
pub fn recover_symbols(
    equalized: &ComplexSignal,
    frame: &SymbolFrame,
    spec: &SignalSpec,
) -> Result<(Vec<Complex64>, f64)> {
    let mut symbols = matched_filter_downsample(equalized, spec)?;
    let scale = 1.0 / frame.power_watts().sqrt();
    for s in &mut symbols {
        *s *= scale;
    }
    let (corrected, phi) = phase_correct(&symbols, &frame.symbols);
    Ok((corrected, phi))
}
