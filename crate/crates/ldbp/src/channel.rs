//! Forward fiber propagation: asymmetric split-step solution of the
//! nonlinear Schrödinger equation with loss, plus lumped EDFA
//! amplification with ASE noise.
//!
//! Each split step applies the linear operator (dispersion and loss,
//! evaluated in the DFT domain) followed by the pointwise Kerr phase
//! rotation weighted by the effective nonlinear length of the step.

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::rng::{self, Stream};
use crate::signal::ComplexSignal;
use crate::units::{db_per_km_to_neper, from_db, ps2_to_s2, PLANCK_J_S};

/// Physical parameters of one fiber + amplifier link.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberLink {
    /// Fiber loss in dB/km.
    pub alpha_db_per_km: f64,
    /// Chromatic-dispersion coefficient in ps^2/km.
    pub beta2_ps2_per_km: f64,
    /// Kerr coefficient in 1/(W km).
    pub gamma_per_w_km: f64,
    /// Span length in km.
    pub span_km: f64,
    /// Number of identical spans.
    pub num_spans: usize,
    /// EDFA noise figure in dB.
    pub noise_figure_db: f64,
    /// Optical carrier frequency in Hz.
    pub carrier_hz: f64,
}

impl Default for FiberLink {
    fn default() -> Self {
        Self {
            alpha_db_per_km: 0.2,
            beta2_ps2_per_km: -21.683,
            gamma_per_w_km: 1.3,
            span_km: 80.0,
            num_spans: 25,
            noise_figure_db: 5.0,
            carrier_hz: 1.946e14,
        }
    }
}

impl FiberLink {
    pub fn validate(&self) -> Result<()> {
        if !(self.span_km > 0.0) {
            return Err(Error::Config("span_km must be positive".into()));
        }
        if self.num_spans < 1 {
            return Err(Error::Config("num_spans must be >= 1".into()));
        }
        if self.alpha_db_per_km < 0.0 {
            return Err(Error::Config("alpha_db_per_km must be >= 0".into()));
        }
        Ok(())
    }

    /// Loss in nepers/km.
    pub fn alpha_np(&self) -> f64 {
        db_per_km_to_neper(self.alpha_db_per_km)
    }

    /// CD coefficient in s^2/km.
    pub fn beta2_s2(&self) -> f64 {
        ps2_to_s2(self.beta2_ps2_per_km)
    }

    /// Total link length in km.
    pub fn total_km(&self) -> f64 {
        self.span_km * self.num_spans as f64
    }

    /// ASE power spectral density of one amplifier in W/Hz:
    /// (G - 1) h nu_s n_sp with n_sp = NF / (2 (1 - 1/G)).
    pub fn edfa_noise_psd(&self) -> f64 {
        let x = self.alpha_np() * self.span_km;
        let nf_lin = from_db(self.noise_figure_db);
        if x < 1e-14 {
            // Limit of the formula as the span loss vanishes.
            return PLANCK_J_S * self.carrier_hz * nf_lin / 2.0;
        }
        let gain_minus_one = x.exp_m1();
        let n_sp = nf_lin / (2.0 * (-(-x).exp_m1()));
        gain_minus_one * PLANCK_J_S * self.carrier_hz * n_sp
    }
}

/// Effective nonlinear length (1 - e^{-alpha z}) / alpha in km.
pub fn effective_length_km(z_km: f64, alpha_np_per_km: f64) -> f64 {
    if alpha_np_per_km == 0.0 {
        z_km
    } else {
        -(-alpha_np_per_km * z_km).exp_m1() / alpha_np_per_km
    }
}

/// DFT angular frequencies omega_k = 2 pi f_k in rad/s, with
/// f_k/f_s = k/n for k < n/2 and (k - n)/n otherwise.
pub fn angular_freqs(n: usize, sample_rate_hz: f64) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let frac = if k < n.div_ceil(2) {
                k as f64 / n as f64
            } else {
                (k as f64 - n as f64) / n as f64
            };
            2.0 * std::f64::consts::PI * frac * sample_rate_hz
        })
        .collect()
}

/// Spectral factors of the linear step of length `z_km`:
/// exp(z (j beta2 omega^2 / 2 - alpha/2)).
pub fn linear_step_factors(
    n: usize,
    sample_rate_hz: f64,
    link: &FiberLink,
    z_km: f64,
    include_loss: bool,
) -> Vec<Complex64> {
    let beta2 = link.beta2_s2();
    let alpha = if include_loss { link.alpha_np() } else { 0.0 };
    angular_freqs(n, sample_rate_hz)
        .into_iter()
        .map(|w| {
            let damp = (-0.5 * alpha * z_km).exp();
            let phase = 0.5 * beta2 * w * w * z_km;
            damp * Complex64::from_polar(1.0, phase)
        })
        .collect()
}

/// Dispersion + loss over `z_km`: DFT, per-bin multiply, inverse DFT.
pub fn cd_loss_step(
    x: &ComplexSignal,
    link: &FiberLink,
    z_km: f64,
    include_loss: bool,
) -> ComplexSignal {
    let factors = linear_step_factors(x.len(), x.sample_rate_hz, link, z_km, include_loss);
    let mut spec = fft::fft(&x.samples);
    for (s, f) in spec.iter_mut().zip(&factors) {
        *s *= f;
    }
    fft::ifft_in_place(&mut spec);
    ComplexSignal {
        samples: spec,
        sample_rate_hz: x.sample_rate_hz,
    }
}

/// Kerr phase rotation over `z_km`: x_k e^{j gamma L_eff(z) |x_k|^2}.
pub fn kerr_step(x: &ComplexSignal, link: &FiberLink, z_km: f64) -> ComplexSignal {
    let coef = link.gamma_per_w_km * effective_length_km(z_km, link.alpha_np());
    let samples = x
        .samples
        .iter()
        .map(|&v| v * Complex64::from_polar(1.0, coef * v.norm_sqr()))
        .collect();
    ComplexSignal {
        samples,
        sample_rate_hz: x.sample_rate_hz,
    }
}

/// Step-size layout of the forward split-step solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepSizing {
    Uniform,
    /// Logarithmic sizes in attenuation-tracking order: short steps at
    /// the span entrance where the power is high.
    Logarithmic,
}

/// Step lengths of one span in forward (propagation) order.
pub fn forward_step_lengths(link: &FiberLink, steps: usize, sizing: StepSizing) -> Vec<f64> {
    match sizing {
        StepSizing::Uniform => vec![link.span_km / steps as f64; steps],
        StepSizing::Logarithmic => {
            let mut deltas =
                crate::init::log_step_sizes(link.span_km, steps, link.alpha_db_per_km, 0.4);
            deltas.reverse();
            deltas
        }
    }
}

/// One span of asymmetric split-step propagation with loss:
/// alternate linear and Kerr steps over the span partition.
pub fn span_forward(
    x: &ComplexSignal,
    link: &FiberLink,
    steps: usize,
    sizing: StepSizing,
) -> ComplexSignal {
    assert!(steps >= 1, "steps must be >= 1");
    let mut out = x.clone();
    for dz in forward_step_lengths(link, steps, sizing) {
        out = kerr_step(&cd_loss_step(&out, link, dz, true), link, dz);
    }
    out
}

/// Lumped amplifier: exactly compensates the span loss in amplitude and
/// adds circularly-symmetric white Gaussian noise with per-sample
/// variance PSD * f_s, unless `noiseless`.
pub fn edfa(x: &ComplexSignal, link: &FiberLink, rng_seed: u64, noiseless: bool) -> ComplexSignal {
    let gain = (0.5 * link.alpha_np() * link.span_km).exp();
    let mut samples: Vec<Complex64> = x.samples.iter().map(|v| v * gain).collect();
    if !noiseless {
        let variance = link.edfa_noise_psd() * x.sample_rate_hz;
        let sigma = (variance / 2.0).sqrt();
        let normal = Normal::new(0.0, sigma).unwrap();
        let mut rng = rng::substream(rng_seed, Stream::Noise, 0, 0);
        for v in samples.iter_mut() {
            *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
        }
    }
    ComplexSignal {
        samples,
        sample_rate_hz: x.sample_rate_hz,
    }
}

/// Precomputed propagation operators for one link at a fixed block size,
/// so repeated frame simulations skip the per-step exponentials.
pub struct LinkPropagator {
    link: FiberLink,
    n: usize,
    sample_rate_hz: f64,
    /// Per-step (spectral factors, Kerr coefficient) of one span.
    steps: Vec<(Vec<Complex64>, f64)>,
}

impl LinkPropagator {
    pub fn new(
        link: &FiberLink,
        n: usize,
        sample_rate_hz: f64,
        steps_per_span: usize,
        sizing: StepSizing,
    ) -> Self {
        let alpha = link.alpha_np();
        let steps = forward_step_lengths(link, steps_per_span, sizing)
            .into_iter()
            .map(|dz| {
                let factors = linear_step_factors(n, sample_rate_hz, link, dz, true);
                let coef = link.gamma_per_w_km * effective_length_km(dz, alpha);
                (factors, coef)
            })
            .collect();
        Self {
            link: link.clone(),
            n,
            sample_rate_hz,
            steps,
        }
    }

    /// Propagate a frame over all spans with amplification. Noise in
    /// span `s` is drawn from the (rng_seed, s) substream, so frames and
    /// spans decorrelate deterministically.
    pub fn propagate(&self, x: &ComplexSignal, rng_seed: u64, noiseless: bool) -> Result<ComplexSignal> {
        assert_eq!(x.len(), self.n, "block length mismatch");
        assert_eq!(x.sample_rate_hz, self.sample_rate_hz, "sample-rate mismatch");
        let gain = (0.5 * self.link.alpha_np() * self.link.span_km).exp();
        let noise_sigma = if noiseless {
            0.0
        } else {
            (self.link.edfa_noise_psd() * self.sample_rate_hz / 2.0).sqrt()
        };
        let mut buf = x.samples.clone();
        for span in 0..self.link.num_spans {
            for (factors, coef) in &self.steps {
                fft::fft_in_place(&mut buf);
                for (s, f) in buf.iter_mut().zip(factors) {
                    *s *= f;
                }
                fft::ifft_in_place(&mut buf);
                for v in buf.iter_mut() {
                    *v *= Complex64::from_polar(1.0, coef * v.norm_sqr());
                }
            }
            for v in buf.iter_mut() {
                *v *= gain;
            }
            if noise_sigma > 0.0 {
                let normal = Normal::new(0.0, noise_sigma).unwrap();
                let mut rng = rng::substream(rng_seed, Stream::Noise, span as u64, 0);
                for v in buf.iter_mut() {
                    *v += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
                }
            }
        }
        let out = ComplexSignal {
            samples: buf,
            sample_rate_hz: self.sample_rate_hz,
        };
        out.check_finite("LinkPropagator::propagate")?;
        Ok(out)
    }
}

/// Full-link propagation: num_spans repetitions of span_forward + edfa
/// with per-span decorrelated noise substreams.
pub fn propagate_link(
    x: &ComplexSignal,
    link: &FiberLink,
    steps_per_span: usize,
    rng_seed: u64,
    noiseless: bool,
) -> Result<ComplexSignal> {
    let sizing = StepSizing::Logarithmic;
    LinkPropagator::new(link, x.len(), x.sample_rate_hz, steps_per_span, sizing)
        .propagate(x, rng_seed, noiseless)
}
