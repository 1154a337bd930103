//! Reverse-mode gradients of the end-to-end symbol MSE.
//!
//! The loss is a real function of complex signals; gradients are taken
//! with respect to the real and imaginary parts of every unmasked
//! filter tap and every ESSM power-filter tap. The adjoint of a complex
//! vector x is carried as G = dL/dRe(x) + j dL/dIm(x), which gives the
//! usual rules: a linear map C pulls back with its conjugate transpose,
//! and a step u = F(v, conj(v)) pulls back as
//! G_v = conj(dF/dv) G_u + (dF/dconj(v)) conj(G_u).
//!
//! The genie phase rotation is differentiated through; its contribution
//! vanishes at the computed phase (which is the exact MSE minimizer)
//! but the term is kept so the backward pass matches the forward chain
//! identically.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{forward_traced, LdbpModel, ModelTape, NonlinearKind};
use crate::rxdsp;
use crate::signal::{ComplexSignal, SignalSpec, SymbolFrame};

/// Flat real-parameter layout of a model: per layer the interleaved
/// (re, im) filter half taps, then the ESSM taps when present.
#[derive(Debug, Clone)]
pub struct ParamLayout {
    pub total: usize,
    layers: Vec<LayerSlot>,
}

#[derive(Debug, Clone)]
struct LayerSlot {
    taps_at: usize,
    num_half_taps: usize,
    eta_at: usize,
    num_eta: usize,
}

impl ParamLayout {
    pub fn of(model: &LdbpModel) -> Self {
        let mut layers = Vec::with_capacity(model.layers.len());
        let mut at = 0;
        for layer in &model.layers {
            let num_half_taps = layer.linear.half_taps.len();
            let taps_at = at;
            at += 2 * num_half_taps;
            let num_eta = match layer.nonlinear.kind {
                NonlinearKind::Standard => 0,
                NonlinearKind::Essm => layer.nonlinear.eta_half_taps.len(),
            };
            let eta_at = at;
            at += num_eta;
            layers.push(LayerSlot {
                taps_at,
                num_half_taps,
                eta_at,
                num_eta,
            });
        }
        Self { total: at, layers }
    }

    /// Trainable flags: false exactly at masked tap positions.
    pub fn trainable(&self, model: &LdbpModel) -> Vec<bool> {
        let mut out = vec![true; self.total];
        for (slot, layer) in self.layers.iter().zip(&model.layers) {
            for m in 0..slot.num_half_taps {
                if !layer.linear.mask[m] {
                    out[slot.taps_at + 2 * m] = false;
                    out[slot.taps_at + 2 * m + 1] = false;
                }
            }
        }
        out
    }

    /// Indices of the (re, im) parameters of one half tap.
    pub fn tap_indices(&self, layer: usize, m: usize) -> (usize, usize) {
        let slot = &self.layers[layer];
        (slot.taps_at + 2 * m, slot.taps_at + 2 * m + 1)
    }

    /// Parameter range of one layer's ESSM taps.
    pub fn eta_range(&self, layer: usize) -> std::ops::Range<usize> {
        let slot = &self.layers[layer];
        slot.eta_at..slot.eta_at + slot.num_eta
    }
}

/// Read the current parameters into a flat vector.
pub fn flatten_params(model: &LdbpModel, layout: &ParamLayout) -> Vec<f64> {
    let mut out = vec![0.0; layout.total];
    for (slot, layer) in layout.layers.iter().zip(&model.layers) {
        for m in 0..slot.num_half_taps {
            let h = layer.linear.tap(m);
            out[slot.taps_at + 2 * m] = h.re;
            out[slot.taps_at + 2 * m + 1] = h.im;
        }
        for (k, &eta) in layer.nonlinear.eta_half_taps.iter().enumerate() {
            out[slot.eta_at + k] = eta;
        }
    }
    out
}

/// Write a flat parameter vector back into the model. Masked taps stay
/// pinned at zero regardless of the vector contents.
pub fn apply_params(model: &mut LdbpModel, layout: &ParamLayout, params: &[f64]) {
    assert_eq!(params.len(), layout.total);
    for (slot, layer) in layout.layers.iter().zip(&mut model.layers) {
        for m in 0..slot.num_half_taps {
            layer.linear.half_taps[m] = if layer.linear.mask[m] {
                Complex64::new(params[slot.taps_at + 2 * m], params[slot.taps_at + 2 * m + 1])
            } else {
                Complex64::default()
            };
        }
        for k in 0..slot.num_eta {
            layer.nonlinear.eta_half_taps[k] = params[slot.eta_at + k];
        }
    }
}

/// Backpropagate an output adjoint through the model, returning the
/// flat parameter gradient and the adjoint at the model input.
pub fn model_backward(
    model: &LdbpModel,
    layout: &ParamLayout,
    tape: &ModelTape,
    grad_out: &[Complex64],
) -> (Vec<f64>, Vec<Complex64>) {
    let n = grad_out.len() as i64;
    let mut grads = vec![0.0; layout.total];
    let mut g: Vec<Complex64> = grad_out.to_vec();
    for (i, layer) in model.layers.iter().enumerate().rev() {
        let slot = &layout.layers[i];
        let records = &tape.layers[i];
        let v = &records.filter_out;
        let c = layer.nonlinear.phase_coef_per_w();

        // Nonlinearity backward: from the layer-output adjoint to the
        // filter-output adjoint, plus eta gradients for ESSM steps.
        let g_v: Vec<Complex64> = if c == 0.0 {
            g
        } else {
            let u = &records.out;
            let w = &records.weighted_power;
            // Scalar phase-argument adjoint per sample.
            let g_w: Vec<f64> = g
                .iter()
                .zip(u)
                .map(|(gu, uu)| c * (gu * uu.conj()).im)
                .collect();
            let g_q: Vec<f64> = match layer.nonlinear.kind {
                NonlinearKind::Standard => g_w.clone(),
                NonlinearKind::Essm => {
                    let kappa = layer.nonlinear.kappa() as i64;
                    let eta = &layer.nonlinear.eta_half_taps;
                    (0..n)
                        .map(|m| {
                            let mut acc = eta[0] * g_w[m as usize];
                            for d in 1..=kappa {
                                let a = g_w[(m + d).rem_euclid(n) as usize];
                                let b = g_w[(m - d).rem_euclid(n) as usize];
                                acc += eta[d as usize] * (a + b);
                            }
                            acc
                        })
                        .collect()
                }
            };
            if layer.nonlinear.kind == NonlinearKind::Essm {
                let q: Vec<f64> = v.iter().map(|x| x.norm_sqr()).collect();
                let kappa = layer.nonlinear.kappa() as i64;
                for k in 0..=kappa {
                    let mut acc = 0.0;
                    for (j, &gw) in g_w.iter().enumerate() {
                        let j = j as i64;
                        acc += gw * q[(j - k).rem_euclid(n) as usize];
                        if k > 0 {
                            acc += gw * q[(j + k).rem_euclid(n) as usize];
                        }
                    }
                    grads[slot.eta_at + k as usize] = acc;
                }
            }
            g.iter()
                .zip(v)
                .zip(w)
                .zip(&g_q)
                .map(|(((gu, vv), &wj), &gq)| {
                    gu * Complex64::from_polar(1.0, -c * wj) + 2.0 * gq * vv
                })
                .collect()
        };

        // Filter backward: tap gradients and the input adjoint.
        let x = tape.layer_input(i);
        let k_half = layer.linear.half_len() as i64;
        for m in 0..=k_half {
            let mu = m as usize;
            if !layer.linear.mask[mu] {
                continue;
            }
            let mut acc = Complex64::default();
            if m == 0 {
                for (t, gv) in g_v.iter().enumerate() {
                    acc += gv * x[t].conj();
                }
            } else {
                for (t, gv) in g_v.iter().enumerate() {
                    let t = t as i64;
                    let a = x[(t - m).rem_euclid(n) as usize];
                    let b = x[(t + m).rem_euclid(n) as usize];
                    acc += gv * (a + b).conj();
                }
            }
            grads[slot.taps_at + 2 * mu] = acc.re;
            grads[slot.taps_at + 2 * mu + 1] = acc.im;
        }
        // Input adjoint: convolution with the conjugated symmetric taps.
        let mut g_x = vec![Complex64::default(); n as usize];
        let h0 = layer.linear.tap(0).conj();
        for (t, gx) in g_x.iter_mut().enumerate() {
            let mut acc = h0 * g_v[t];
            for m in 1..=k_half {
                let h = layer.linear.tap(m as usize);
                if h.re == 0.0 && h.im == 0.0 {
                    continue;
                }
                let t = t as i64;
                let a = g_v[(t - m).rem_euclid(n) as usize];
                let b = g_v[(t + m).rem_euclid(n) as usize];
                acc += h.conj() * (a + b);
            }
            *gx = acc;
        }
        g = g_x;
    }
    (grads, g)
}

/// Matched filter + genie normalization + genie phase correction +
/// MSE, with every intermediate needed for the backward pass.
struct RxTrace {
    loss: f64,
    /// Adjoint at the model output.
    grad_model_out: Vec<Complex64>,
}

fn receiver_loss_backward(
    model_out: &[Complex64],
    mf_taps: &[f64],
    rho: usize,
    frame: &SymbolFrame,
) -> RxTrace {
    let n = model_out.len();
    let n_sym = frame.len();
    let scale = 1.0 / ((rho as f64).sqrt() * frame.power_watts().sqrt());
    let half = (mf_taps.len() - 1) as i64 / 2;

    // Forward: matched filter, downsample, normalize.
    let mut s_tilde = vec![Complex64::default(); n_sym];
    for (m, st) in s_tilde.iter_mut().enumerate() {
        let center = (m * rho) as i64;
        let mut acc = Complex64::default();
        for (j, &gtap) in mf_taps.iter().enumerate() {
            let idx = (center - (j as i64 - half)).rem_euclid(n as i64) as usize;
            acc += gtap * model_out[idx];
        }
        *st = scale * acc;
    }
    let corr: Complex64 = frame
        .symbols
        .iter()
        .zip(&s_tilde)
        .map(|(s, t)| s.conj() * t)
        .sum();
    let phi = corr.arg();
    let rot = Complex64::from_polar(1.0, -phi);
    let s_hat: Vec<Complex64> = s_tilde.iter().map(|t| t * rot).collect();
    let loss = s_hat
        .iter()
        .zip(&frame.symbols)
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / n_sym as f64;

    // Backward.
    let g_hat: Vec<Complex64> = s_hat
        .iter()
        .zip(&frame.symbols)
        .map(|(a, b)| 2.0 / n_sym as f64 * (a - b))
        .collect();
    // Phase-path term; zero at the optimal phase, kept for exactness.
    let beta: f64 = g_hat
        .iter()
        .zip(&s_hat)
        .map(|(gh, sh)| (gh * sh.conj()).im)
        .sum();
    let corr_mag = corr.norm();
    let e_jphi = Complex64::from_polar(1.0, phi);
    let g_tilde: Vec<Complex64> = g_hat
        .iter()
        .zip(&frame.symbols)
        .map(|(gh, s)| {
            let phase_term = if corr_mag > 1e-300 {
                Complex64::i() * (beta / corr_mag) * s
            } else {
                Complex64::default()
            };
            e_jphi * (gh - phase_term)
        })
        .collect();
    // Adjoint of the matched filter + downsampling (transpose pattern).
    let mut grad_model_out = vec![Complex64::default(); n];
    for (m, gt) in g_tilde.iter().enumerate() {
        let center = (m * rho) as i64;
        let scaled = scale * gt;
        for (j, &gtap) in mf_taps.iter().enumerate() {
            let idx = (center - (j as i64 - half)).rem_euclid(n as i64) as usize;
            grad_model_out[idx] += gtap * scaled;
        }
    }
    RxTrace {
        loss,
        grad_model_out,
    }
}

/// The receiver context shared by loss and gradient evaluations.
#[derive(Debug, Clone)]
pub struct RxContext {
    mf_taps: Vec<f64>,
    rho: usize,
}

impl RxContext {
    pub fn new(spec: &SignalSpec) -> Result<Self> {
        Ok(Self {
            mf_taps: crate::signal::rrc_taps(spec, spec.digital_oversampling)?,
            rho: spec.digital_oversampling,
        })
    }
}

/// Matched filter + normalization + phase correction + MSE, forward
/// only: the function the backward pass differentiates.
fn receiver_loss(model_out: &[Complex64], mf_taps: &[f64], rho: usize, frame: &SymbolFrame) -> f64 {
    let n = model_out.len() as i64;
    let scale = 1.0 / ((rho as f64).sqrt() * frame.power_watts().sqrt());
    let half = (mf_taps.len() - 1) as i64 / 2;
    let s_tilde: Vec<Complex64> = (0..frame.len())
        .map(|m| {
            let center = (m * rho) as i64;
            let mut acc = Complex64::default();
            for (j, &gtap) in mf_taps.iter().enumerate() {
                let idx = (center - (j as i64 - half)).rem_euclid(n) as usize;
                acc += gtap * model_out[idx];
            }
            scale * acc
        })
        .collect();
    let (corrected, _) = rxdsp::phase_correct(&s_tilde, &frame.symbols);
    rxdsp::mse(&corrected, &frame.symbols)
}

/// Loss of one frame (no gradient).
pub fn frame_loss(
    model: &LdbpModel,
    rx: &RxContext,
    r: &ComplexSignal,
    frame: &SymbolFrame,
) -> Result<f64> {
    let out = crate::model::forward(model, r)?;
    Ok(receiver_loss(&out.samples, &rx.mf_taps, rx.rho, frame))
}

/// Loss and exact parameter gradient of one frame.
pub fn frame_loss_and_gradient(
    model: &LdbpModel,
    layout: &ParamLayout,
    rx: &RxContext,
    r: &ComplexSignal,
    frame: &SymbolFrame,
) -> Result<(f64, Vec<f64>)> {
    if frame.is_empty() {
        return Err(Error::Config("empty symbol frame".into()));
    }
    let (_, tape) = forward_traced(model, r)?;
    let trace = receiver_loss_backward(tape.output(), &rx.mf_taps, rx.rho, frame);
    let (grads, _) = model_backward(model, layout, &tape, &trace.grad_model_out);
    Ok((trace.loss, grads))
}

/// Mean loss and mean gradient over a batch, reduced in frame order.
pub fn batch_gradient(
    model: &LdbpModel,
    layout: &ParamLayout,
    rx: &RxContext,
    batch: &[(ComplexSignal, SymbolFrame)],
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let mut loss = 0.0;
    let mut grads = vec![0.0; layout.total];
    for (r, frame) in batch {
        let (l, g) = frame_loss_and_gradient(model, layout, rx, r, frame)?;
        loss += l;
        for (acc, gi) in grads.iter_mut().zip(&g) {
            *acc += gi;
        }
    }
    let inv = 1.0 / batch.len() as f64;
    loss *= inv;
    for g in &mut grads {
        *g *= inv;
    }
    Ok((loss, grads))
}

/// Mean loss over a batch (no gradient); the finite-difference oracle
/// differentiates this function.
pub fn batch_loss(
    model: &LdbpModel,
    rx: &RxContext,
    batch: &[(ComplexSignal, SymbolFrame)],
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let mut loss = 0.0;
    for (r, frame) in batch {
        loss += frame_loss(model, rx, r, frame)?;
    }
    Ok(loss / batch.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Layer, Layout, LinearStep, NonlinearStep};
    use crate::signal::Modulation;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn rand_model(
        seed: u64,
        num_layers: usize,
        half_len: usize,
        essm_kappa: Option<usize>,
        layout: Layout,
    ) -> LdbpModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let total = match layout {
            Layout::Asymmetric => num_layers,
            Layout::SymmetricPlusHalf => num_layers + 1,
        };
        for i in 0..total {
            let mut half_taps: Vec<Complex64> = (0..=half_len)
                .map(|_| Complex64::new(0.25 * rng.gen_range(-1.0..1.0), 0.25 * rng.gen_range(-1.0..1.0)))
                .collect();
            half_taps[0] += Complex64::new(1.0, 0.0);
            let is_trailing = layout == Layout::SymmetricPlusHalf && i == total - 1;
            let nonlinear = if is_trailing {
                NonlinearStep::identity()
            } else {
                let delta = rng.gen_range(20.0..60.0);
                let gamma = rng.gen_range(0.01..0.05);
                match essm_kappa {
                    None => NonlinearStep::standard_lossless(delta, gamma),
                    Some(kappa) => {
                        let eta: Vec<f64> = (0..=kappa)
                            .map(|k| if k == 0 { 1.0 } else { rng.gen_range(-0.2..0.2) })
                            .collect();
                        NonlinearStep::essm(delta, gamma, delta, eta)
                    }
                }
            };
            layers.push(Layer {
                linear: LinearStep::new(half_taps),
                nonlinear,
            });
        }
        LdbpModel {
            layers,
            layout,
            sample_rate_hz: 2.0,
        }
    }

    fn rand_batch(seed: u64, n: usize, frames: usize) -> Vec<(ComplexSignal, SymbolFrame)> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..frames)
            .map(|f| {
                let samples: Vec<Complex64> = (0..n)
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                let r = ComplexSignal::new(samples, 2.0).unwrap();
                let frame = crate::signal::generate_symbols(n / 2, Modulation::GaussianIid, seed + f as u64)
                    .unwrap()
                    .with_power(30.0); // 1 W: keeps the synthetic scales O(1)
                (r, frame)
            })
            .collect()
    }

    fn rx_for_tests() -> RxContext {
        let spec = SignalSpec {
            baud_rate_hz: 1.0,
            rolloff: 0.1,
            analog_oversampling: 4,
            digital_oversampling: 2,
            rrc_span_symbols: 8,
        };
        RxContext::new(&spec).unwrap()
    }

    /// Central finite differences against the analytic gradient,
    /// coordinate by coordinate.
    fn check_gradient(model: &LdbpModel, batch: &[(ComplexSignal, SymbolFrame)], tol: f64) {
        let layout = ParamLayout::of(model);
        let rx = rx_for_tests();
        let (_, analytic) = batch_gradient(model, &layout, &rx, batch).unwrap();
        let params = flatten_params(model, &layout);
        let trainable = layout.trainable(model);
        let eps = 1e-6;
        for p in 0..layout.total {
            if !trainable[p] {
                assert_eq!(analytic[p], 0.0, "masked parameter {p} has gradient");
                continue;
            }
            let mut plus = model.clone();
            let mut theta = params.clone();
            theta[p] += eps;
            apply_params(&mut plus, &layout, &theta);
            let lp = batch_loss(&plus, &rx, batch).unwrap();
            let mut minus = model.clone();
            theta[p] = params[p] - eps;
            apply_params(&mut minus, &layout, &theta);
            let lm = batch_loss(&minus, &rx, batch).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let denom = analytic[p].abs().max(fd.abs()).max(1e-6);
            assert!(
                (analytic[p] - fd).abs() / denom < tol,
                "param {p}: analytic {} vs fd {fd}",
                analytic[p]
            );
        }
    }

    #[test]
    fn gradient_matches_fd_standard() {
        let model = rand_model(1, 3, 3, None, Layout::Asymmetric);
        let batch = rand_batch(10, 64, 2);
        check_gradient(&model, &batch, 1e-5);
    }

    #[test]
    fn gradient_matches_fd_essm() {
        let model = rand_model(2, 2, 2, Some(3), Layout::Asymmetric);
        let batch = rand_batch(11, 64, 1);
        check_gradient(&model, &batch, 1e-5);
    }

    #[test]
    fn gradient_matches_fd_symmetric_layout() {
        let model = rand_model(3, 2, 2, None, Layout::SymmetricPlusHalf);
        let batch = rand_batch(12, 64, 1);
        check_gradient(&model, &batch, 1e-5);
    }

    #[test]
    fn gradient_matches_fd_with_masked_taps() {
        let mut model = rand_model(4, 2, 3, None, Layout::Asymmetric);
        model.layers[0].linear.mask[3] = false;
        model.layers[0].linear.half_taps[3] = Complex64::default();
        model.layers[1].linear.mask[2] = false;
        model.layers[1].linear.half_taps[2] = Complex64::default();
        let batch = rand_batch(13, 64, 1);
        check_gradient(&model, &batch, 1e-5);
    }

    #[test]
    fn gradient_zero_at_exact_inversion() {
        // Construct a configuration whose loss is exactly zero: take an
        // arbitrary model and input, and declare the receiver output to
        // be the reference frame itself. At the global minimum the
        // gradient must vanish to rounding.
        let model = rand_model(5, 2, 2, None, Layout::Asymmetric);
        let layout = ParamLayout::of(&model);
        let rx = rx_for_tests();
        let (r, mut frame) = rand_batch(16, 64, 1).pop().unwrap();
        let out = crate::model::forward(&model, &r).unwrap();
        let scale = 1.0 / ((rx.rho as f64).sqrt() * frame.power_watts().sqrt());
        let half = (rx.mf_taps.len() - 1) as i64 / 2;
        let n = out.len() as i64;
        for m in 0..frame.len() {
            let center = (m * rx.rho) as i64;
            let mut acc = Complex64::default();
            for (j, &gtap) in rx.mf_taps.iter().enumerate() {
                let idx = (center - (j as i64 - half)).rem_euclid(n) as usize;
                acc += gtap * out.samples[idx];
            }
            frame.symbols[m] = scale * acc;
        }
        let (loss, grads) = batch_gradient(&model, &layout, &rx, &[(r, frame)]).unwrap();
        let gnorm: f64 = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
        assert!(loss < 1e-28, "loss {loss}");
        assert!(gnorm < 1e-8, "gradient norm {gnorm}");
    }

    #[test]
    fn linear_layer_gradient_matches_least_squares_form() {
        // gamma = 0 single filter: with the genie phase frozen at its
        // optimum, the loss is an ordinary linear least-squares problem
        // in the half taps. Its closed-form gradient
        //   g_m = (2/N) sum_j e_j conj(C_{j,m})
        // (C the basis-response matrix) must match the backward pass
        // exactly; differentiating through the phase adds nothing at the
        // optimum.
        let mut model = rand_model(6, 1, 2, None, Layout::Asymmetric);
        model.layers[0].nonlinear = NonlinearStep::identity();
        let layout = ParamLayout::of(&model);
        let rx = rx_for_tests();
        let batch = rand_batch(14, 64, 1);
        let (r, frame) = &batch[0];
        let (_, analytic) = batch_gradient(&model, &layout, &rx, &batch).unwrap();

        // Receiver output for one basis filter (delta at half index m).
        let n_sym = frame.len();
        let receive = |m: &LdbpModel| -> Vec<Complex64> {
            let out = crate::model::forward(m, r).unwrap();
            let scale = 1.0 / ((rx.rho as f64).sqrt() * frame.power_watts().sqrt());
            let half = (rx.mf_taps.len() - 1) as i64 / 2;
            let n = out.len() as i64;
            (0..n_sym)
                .map(|s| {
                    let center = (s * rx.rho) as i64;
                    let mut acc = Complex64::default();
                    for (j, &gtap) in rx.mf_taps.iter().enumerate() {
                        let idx = (center - (j as i64 - half)).rem_euclid(n) as usize;
                        acc += gtap * out.samples[idx];
                    }
                    scale * acc
                })
                .collect()
        };
        // Columns of the linear map h -> s_tilde.
        let k = model.layers[0].linear.half_len();
        let mut columns = Vec::new();
        for m in 0..=k {
            let mut basis = model.clone();
            for (j, h) in basis.layers[0].linear.half_taps.iter_mut().enumerate() {
                *h = if j == m {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                };
            }
            columns.push(receive(&basis));
        }
        // Estimate, optimal phase, residual.
        let s_tilde = receive(&model);
        let (s_hat, phi) = rxdsp::phase_correct(&s_tilde, &frame.symbols);
        let rot = Complex64::from_polar(1.0, -phi);
        for m in 0..=k {
            let g: Complex64 = (0..n_sym)
                .map(|j| {
                    (s_hat[j] - frame.symbols[j]) * (columns[m][j] * rot).conj()
                })
                .sum::<Complex64>()
                * (2.0 / n_sym as f64);
            let (re, im) = layout.tap_indices(0, m);
            let denom = g.norm().max(1e-9);
            assert!(
                (analytic[re] - g.re).abs() / denom < 1e-9,
                "tap {m} re: {} vs {}",
                analytic[re],
                g.re
            );
            assert!(
                (analytic[im] - g.im).abs() / denom < 1e-9,
                "tap {m} im: {} vs {}",
                analytic[im],
                g.im
            );
        }
    }

    #[test]
    fn masked_params_have_zero_gradient_and_stay_put() {
        let mut model = rand_model(7, 2, 2, None, Layout::Asymmetric);
        model.layers[1].linear.mask[2] = false;
        model.layers[1].linear.half_taps[2] = Complex64::default();
        let layout = ParamLayout::of(&model);
        let rx = rx_for_tests();
        let batch = rand_batch(15, 64, 1);
        let (_, grads) = batch_gradient(&model, &layout, &rx, &batch).unwrap();
        let (re, im) = layout.tap_indices(1, 2);
        assert_eq!(grads[re], 0.0);
        assert_eq!(grads[im], 0.0);
        // apply_params cannot resurrect a masked tap.
        let mut theta = flatten_params(&model, &layout);
        theta[re] = 5.0;
        let mut poked = model.clone();
        apply_params(&mut poked, &layout, &theta);
        assert_eq!(poked.layers[1].linear.half_taps[2], Complex64::default());
    }
}
