//! The layered split-step equalizer: trainable symmetric complex FIR
//! filters alternating with fixed Kerr-phase nonlinearities.
//!
//! A model with layers (A_i, sigma_i) maps r to
//! sigma_l(A_l ... sigma_1(A_1 r)). Filters are stored as the unique
//! half of an odd-length even-symmetric impulse response together with
//! a pruning mask; nonlinear steps rotate each sample by
//! -gamma * L_eff * (weighted instantaneous power), the negative sign
//! because the model runs the fiber backwards.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::ComplexSignal;

/// One symmetric FIR filter stored as half taps h_0..h_K plus a binary
/// pruning mask. The full impulse response is (h_K..h_1, h_0, h_1..h_K);
/// masked positions are exactly zero and receive no gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStep {
    pub half_taps: Vec<Complex64>,
    pub mask: Vec<bool>,
}

impl LinearStep {
    pub fn new(half_taps: Vec<Complex64>) -> Self {
        let mask = vec![true; half_taps.len()];
        Self { half_taps, mask }
    }

    /// The identity filter with half length K (full length 2K+1).
    pub fn unit(half_len: usize) -> Self {
        let mut half_taps = vec![Complex64::default(); half_len + 1];
        half_taps[0] = Complex64::new(1.0, 0.0);
        Self::new(half_taps)
    }

    /// Half length K.
    pub fn half_len(&self) -> usize {
        self.half_taps.len() - 1
    }

    /// Full filter length 2K+1 before masking.
    pub fn full_len(&self) -> usize {
        2 * self.half_len() + 1
    }

    /// Masked half tap: zero wherever the mask is off.
    pub fn tap(&self, m: usize) -> Complex64 {
        if self.mask[m] {
            self.half_taps[m]
        } else {
            Complex64::default()
        }
    }

    /// Largest unmasked half index; the active impulse response has
    /// length 2 * active_half_len + 1.
    pub fn active_half_len(&self) -> usize {
        (0..=self.half_len()).rev().find(|&m| self.mask[m]).unwrap_or(0)
    }

    pub fn active_full_len(&self) -> usize {
        2 * self.active_half_len() + 1
    }

    /// Reconstruct the full symmetric impulse response with masking
    /// applied, indices -K..K.
    pub fn full_taps(&self) -> Vec<Complex64> {
        let k = self.half_len();
        let mut full = vec![Complex64::default(); 2 * k + 1];
        for m in 0..=k {
            let h = self.tap(m);
            full[k + m] = h;
            full[k - m] = h;
        }
        full
    }

    /// Frequency response at normalized angular frequency w (rad/sample):
    /// h_0 + 2 sum_m h_m cos(m w).
    pub fn response(&self, w: f64) -> Complex64 {
        let mut acc = self.tap(0);
        for m in 1..=self.half_len() {
            acc += 2.0 * (m as f64 * w).cos() * self.tap(m);
        }
        acc
    }

    fn scale(&mut self, factor: f64) {
        for h in &mut self.half_taps {
            *h *= factor;
        }
        // Masked values are pinned at zero.
        for (h, &on) in self.half_taps.iter_mut().zip(&self.mask) {
            if !on {
                *h = Complex64::default();
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearKind {
    /// Pointwise Kerr rotation from the sample's own power.
    Standard,
    /// Kerr rotation from a real symmetric FIR filtering of the
    /// instantaneous power (enhanced split-step).
    Essm,
}

/// One nonlinear step. `effective_length_km` is the loss- and
/// position-weighted length that multiplies gamma in the phase; it
/// equals delta_km for a lossless step and zero for the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearStep {
    pub kind: NonlinearKind,
    pub delta_km: f64,
    pub gamma_per_w_km: f64,
    pub effective_length_km: f64,
    /// eta_0..eta_kappa of the symmetric real power filter (ESSM only).
    pub eta_half_taps: Vec<f64>,
}

impl NonlinearStep {
    /// The identity step (delta = 0).
    pub fn identity() -> Self {
        Self {
            kind: NonlinearKind::Standard,
            delta_km: 0.0,
            gamma_per_w_km: 0.0,
            effective_length_km: 0.0,
            eta_half_taps: Vec::new(),
        }
    }

    /// Standard Kerr step ignoring loss: effective length = delta.
    pub fn standard_lossless(delta_km: f64, gamma_per_w_km: f64) -> Self {
        Self {
            kind: NonlinearKind::Standard,
            delta_km,
            gamma_per_w_km,
            effective_length_km: delta_km,
            eta_half_taps: Vec::new(),
        }
    }

    /// Standard Kerr step with an explicit effective length.
    pub fn standard(delta_km: f64, gamma_per_w_km: f64, effective_length_km: f64) -> Self {
        Self {
            kind: NonlinearKind::Standard,
            delta_km,
            gamma_per_w_km,
            effective_length_km,
            eta_half_taps: Vec::new(),
        }
    }

    /// ESSM step with the given power-filter half taps.
    pub fn essm(
        delta_km: f64,
        gamma_per_w_km: f64,
        effective_length_km: f64,
        eta_half_taps: Vec<f64>,
    ) -> Self {
        assert!(!eta_half_taps.is_empty(), "ESSM needs at least eta_0");
        Self {
            kind: NonlinearKind::Essm,
            delta_km,
            gamma_per_w_km,
            effective_length_km,
            eta_half_taps,
        }
    }

    /// Phase per watt: -gamma * effective length. Negative because the
    /// equalizer undoes the accumulated nonlinear phase.
    pub fn phase_coef_per_w(&self) -> f64 {
        -self.gamma_per_w_km * self.effective_length_km
    }

    pub fn is_identity(&self) -> bool {
        self.phase_coef_per_w() == 0.0
    }

    pub fn kappa(&self) -> usize {
        self.eta_half_taps.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// One layer per split step.
    Asymmetric,
    /// Merged half-step layout: M+1 layers, the last one purely linear.
    SymmetricPlusHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub linear: LinearStep,
    pub nonlinear: NonlinearStep,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdbpModel {
    pub layers: Vec<Layer>,
    pub layout: Layout,
    pub sample_rate_hz: f64,
}

impl LdbpModel {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Overall impulse-response length sum(T_i - 1) + 1 over the active
    /// (unmasked) filter lengths.
    pub fn total_taps(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.linear.active_full_len() - 1)
            .sum::<usize>()
            + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Config("model needs at least one layer".into()));
        }
        if self.layout == Layout::SymmetricPlusHalf {
            let last = &self.layers[self.layers.len() - 1].nonlinear;
            if !last.is_identity() {
                return Err(Error::Config(
                    "symmetric layout requires the trailing half-step to have an identity nonlinearity"
                        .into(),
                ));
            }
        }
        Ok(())
    }
}

/// Circular convolution of `x` with the reconstructed symmetric filter.
pub fn circular_conv_symmetric(x: &[Complex64], step: &LinearStep) -> Result<Vec<Complex64>> {
    let n = x.len();
    if step.full_len() > n {
        return Err(Error::FilterTooLong {
            filter_len: step.full_len(),
            block_len: n,
        });
    }
    let k = step.half_len() as i64;
    let mut out = vec![Complex64::default(); n];
    for (t, o) in out.iter_mut().enumerate() {
        let mut acc = step.tap(0) * x[t];
        for m in 1..=k {
            let h = step.tap(m as usize);
            if h.re == 0.0 && h.im == 0.0 {
                continue;
            }
            let a = x[(t as i64 - m).rem_euclid(n as i64) as usize];
            let b = x[(t as i64 + m).rem_euclid(n as i64) as usize];
            acc += h * (a + b);
        }
        *o = acc;
    }
    Ok(out)
}

/// The per-sample phase weight w_j of a nonlinear step: |x_j|^2 for the
/// standard step, sum_k eta_k |x_{j-k}|^2 (circular) for ESSM.
pub fn nonlinear_weighted_power(x: &[Complex64], step: &NonlinearStep) -> Vec<f64> {
    let n = x.len();
    let power: Vec<f64> = x.iter().map(|v| v.norm_sqr()).collect();
    match step.kind {
        NonlinearKind::Standard => power,
        NonlinearKind::Essm => {
            let kappa = step.kappa() as i64;
            let mut w = vec![0.0; n];
            for (j, wj) in w.iter_mut().enumerate() {
                let mut acc = step.eta_half_taps[0] * power[j];
                for m in 1..=kappa {
                    let eta = step.eta_half_taps[m as usize];
                    let a = power[(j as i64 - m).rem_euclid(n as i64) as usize];
                    let b = power[(j as i64 + m).rem_euclid(n as i64) as usize];
                    acc += eta * (a + b);
                }
                *wj = acc;
            }
            w
        }
    }
}

/// Apply a nonlinear step: x_j e^{j c w_j} with c the (negated) phase
/// coefficient. Magnitudes are preserved exactly.
pub fn nonlinear_apply(x: &[Complex64], step: &NonlinearStep) -> Vec<Complex64> {
    let c = step.phase_coef_per_w();
    if c == 0.0 {
        return x.to_vec();
    }
    let w = nonlinear_weighted_power(x, step);
    x.iter()
        .zip(&w)
        .map(|(&v, &wj)| v * Complex64::from_polar(1.0, c * wj))
        .collect()
}

/// Per-layer activations recorded during a traced forward pass.
#[derive(Debug, Clone)]
pub struct LayerTape {
    /// Filter output = nonlinearity input.
    pub filter_out: Vec<Complex64>,
    /// Weighted power w_j driving the phase (empty for identity steps).
    pub weighted_power: Vec<f64>,
    /// Layer output.
    pub out: Vec<Complex64>,
}

/// All activations of one forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct ModelTape {
    pub input: Vec<Complex64>,
    pub layers: Vec<LayerTape>,
}

impl ModelTape {
    /// Input of layer i.
    pub fn layer_input(&self, i: usize) -> &[Complex64] {
        if i == 0 {
            &self.input
        } else {
            &self.layers[i - 1].out
        }
    }

    pub fn output(&self) -> &[Complex64] {
        self.layers
            .last()
            .map(|l| &l.out[..])
            .unwrap_or(&self.input)
    }
}

fn check_rate(model: &LdbpModel, r: &ComplexSignal) -> Result<()> {
    if (r.sample_rate_hz - model.sample_rate_hz).abs() > 1e-6 * model.sample_rate_hz {
        return Err(Error::RateMismatch {
            signal_hz: r.sample_rate_hz,
            model_hz: model.sample_rate_hz,
        });
    }
    Ok(())
}

/// Run the model.
pub fn forward(model: &LdbpModel, r: &ComplexSignal) -> Result<ComplexSignal> {
    check_rate(model, r)?;
    let mut x = r.samples.clone();
    for layer in &model.layers {
        x = circular_conv_symmetric(&x, &layer.linear)?;
        x = nonlinear_apply(&x, &layer.nonlinear);
    }
    ComplexSignal::new(x, r.sample_rate_hz)
}

/// Run the model keeping every activation for the backward pass.
/// Non-finite activations abort with the offending layer index.
pub fn forward_traced(model: &LdbpModel, r: &ComplexSignal) -> Result<(ComplexSignal, ModelTape)> {
    check_rate(model, r)?;
    let mut tape = ModelTape {
        input: r.samples.clone(),
        layers: Vec::with_capacity(model.layers.len()),
    };
    let mut x = r.samples.clone();
    for (i, layer) in model.layers.iter().enumerate() {
        let filter_out = circular_conv_symmetric(&x, &layer.linear)?;
        let c = layer.nonlinear.phase_coef_per_w();
        let (weighted_power, out) = if c == 0.0 {
            (Vec::new(), filter_out.clone())
        } else {
            let w = nonlinear_weighted_power(&filter_out, &layer.nonlinear);
            let out: Vec<Complex64> = filter_out
                .iter()
                .zip(&w)
                .map(|(&v, &wj)| v * Complex64::from_polar(1.0, c * wj))
                .collect();
            (w, out)
        };
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::LayerNan { layer: i });
        }
        x = out.clone();
        tape.layers.push(LayerTape {
            filter_out,
            weighted_power,
            out,
        });
    }
    Ok((
        ComplexSignal {
            samples: x,
            sample_rate_hz: r.sample_rate_hz,
        },
        tape,
    ))
}

/// Run only the linear steps (every nonlinearity replaced by identity).
pub fn linear_only_forward(model: &LdbpModel, r: &ComplexSignal) -> Result<ComplexSignal> {
    check_rate(model, r)?;
    let mut x = r.samples.clone();
    for layer in &model.layers {
        x = circular_conv_symmetric(&x, &layer.linear)?;
    }
    ComplexSignal::new(x, r.sample_rate_hz)
}

/// Forward pass with per-layer scalings of the nonlinear phase
/// coefficients; `forward` is the special case of all-ones.
pub fn forward_with_scalings(
    model: &LdbpModel,
    r: &ComplexSignal,
    scalings: &[f64],
) -> Result<ComplexSignal> {
    check_rate(model, r)?;
    if scalings.len() != model.layers.len() {
        return Err(Error::Config(format!(
            "{} scalings for {} layers",
            scalings.len(),
            model.layers.len()
        )));
    }
    let mut x = r.samples.clone();
    for (layer, &xi) in model.layers.iter().zip(scalings) {
        x = circular_conv_symmetric(&x, &layer.linear)?;
        let c = xi * layer.nonlinear.phase_coef_per_w();
        if c != 0.0 {
            let w = nonlinear_weighted_power(&x, &layer.nonlinear);
            for (v, &wj) in x.iter_mut().zip(&w) {
                *v *= Complex64::from_polar(1.0, c * wj);
            }
        }
    }
    ComplexSignal::new(x, r.sample_rate_hz)
}

/// Product of the per-step frequency responses on a uniform grid over
/// [-pi, pi), plus the overall impulse-response length sum(T_i - 1) + 1.
pub fn overall_response(model: &LdbpModel, num_points: usize) -> (Vec<Complex64>, usize) {
    let grid = response_grid(num_points);
    let mut total = vec![Complex64::new(1.0, 0.0); num_points];
    for layer in &model.layers {
        for (acc, &w) in total.iter_mut().zip(&grid) {
            *acc *= layer.linear.response(w);
        }
    }
    (total, model.total_taps())
}

/// The normalized angular-frequency grid used by `overall_response`:
/// num_points values covering [-pi, pi).
pub fn response_grid(num_points: usize) -> Vec<f64> {
    (0..num_points)
        .map(|i| -std::f64::consts::PI + 2.0 * std::f64::consts::PI * i as f64 / num_points as f64)
        .collect()
}

/// Absorb per-layer nonlinear scalings into the adjacent filters: the
/// returned model has unit scalings and an identical input-output map.
/// Requires the merged-half-step layout (the final step must be the
/// identity so the trailing normalization has somewhere to go).
pub fn rescale_equivalent(model: &LdbpModel, scalings: &[f64]) -> Result<LdbpModel> {
    if model.layout != Layout::SymmetricPlusHalf {
        return Err(Error::Config(
            "rescale_equivalent requires the symmetric-plus-half layout".into(),
        ));
    }
    let l = model.layers.len();
    if scalings.len() != l {
        return Err(Error::Config(format!("{} scalings for {l} layers", scalings.len())));
    }
    if scalings[l - 1] != 0.0 {
        return Err(Error::Config("the final scaling must be 0".into()));
    }
    // With no active nonlinearity the scalings never enter the map.
    if model
        .layers
        .iter()
        .all(|layer| layer.nonlinear.phase_coef_per_w() == 0.0)
    {
        return Ok(model.clone());
    }
    for (i, &xi) in scalings.iter().enumerate().take(l - 1) {
        if xi <= 0.0 {
            return Err(Error::Config(format!(
                "scaling {xi} of layer {i} must be positive"
            )));
        }
    }
    let mut out = model.clone();
    for i in 0..l {
        let factor = if i == 0 {
            scalings[0].sqrt()
        } else if i < l - 1 {
            (scalings[i] / scalings[i - 1]).sqrt()
        } else {
            1.0 / scalings[l - 2].sqrt()
        };
        if factor != 1.0 {
            out.layers[i].linear.scale(factor);
        }
    }
    Ok(out)
}

/// Serialized model layout; `taps_re`/`taps_im` hold the full symmetric
/// impulse response of each linear step, `eta` the full symmetric power
/// filter of ESSM steps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDump {
    pub layout: Layout,
    pub sample_rate_hz: f64,
    pub layers: Vec<LayerDump>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerDump {
    pub delta_km: f64,
    pub taps_re: Vec<f64>,
    pub taps_im: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    pub mask: Vec<bool>,
    pub gamma_per_w_km: f64,
    pub effective_length_km: f64,
}

impl LdbpModel {
    pub fn to_dump(&self) -> ModelDump {
        let layers = self
            .layers
            .iter()
            .map(|layer| {
                let full = layer.linear.full_taps();
                let eta = match layer.nonlinear.kind {
                    NonlinearKind::Standard => None,
                    NonlinearKind::Essm => {
                        let kappa = layer.nonlinear.kappa();
                        let mut full_eta = vec![0.0; 2 * kappa + 1];
                        for m in 0..=kappa {
                            let v = layer.nonlinear.eta_half_taps[m];
                            full_eta[kappa + m] = v;
                            full_eta[kappa - m] = v;
                        }
                        Some(full_eta)
                    }
                };
                LayerDump {
                    delta_km: layer.nonlinear.delta_km,
                    taps_re: full.iter().map(|h| h.re).collect(),
                    taps_im: full.iter().map(|h| h.im).collect(),
                    eta,
                    mask: layer.linear.mask.clone(),
                    gamma_per_w_km: layer.nonlinear.gamma_per_w_km,
                    effective_length_km: layer.nonlinear.effective_length_km,
                }
            })
            .collect();
        ModelDump {
            layout: self.layout,
            sample_rate_hz: self.sample_rate_hz,
            layers,
        }
    }

    pub fn from_dump(dump: &ModelDump) -> Result<Self> {
        let mut layers = Vec::with_capacity(dump.layers.len());
        for (i, ld) in dump.layers.iter().enumerate() {
            if ld.taps_re.len() != ld.taps_im.len() || ld.taps_re.len() % 2 == 0 {
                return Err(Error::Config(format!(
                    "layer {i}: taps must be an odd-length re/im pair"
                )));
            }
            let k = ld.taps_re.len() / 2;
            if ld.mask.len() != k + 1 {
                return Err(Error::Config(format!(
                    "layer {i}: mask length {} does not match half length {}",
                    ld.mask.len(),
                    k + 1
                )));
            }
            let half_taps: Vec<Complex64> = (0..=k)
                .map(|m| Complex64::new(ld.taps_re[k + m], ld.taps_im[k + m]))
                .collect();
            for m in 1..=k {
                let lo = Complex64::new(ld.taps_re[k - m], ld.taps_im[k - m]);
                if (lo - half_taps[m]).norm() > 1e-12 {
                    return Err(Error::Config(format!(
                        "layer {i}: taps are not symmetric at offset {m}"
                    )));
                }
            }
            let linear = LinearStep {
                half_taps,
                mask: ld.mask.clone(),
            };
            let nonlinear = match &ld.eta {
                None => NonlinearStep::standard(
                    ld.delta_km,
                    ld.gamma_per_w_km,
                    ld.effective_length_km,
                ),
                Some(full_eta) => {
                    if full_eta.len() % 2 == 0 {
                        return Err(Error::Config(format!("layer {i}: eta must have odd length")));
                    }
                    let kappa = full_eta.len() / 2;
                    let eta_half = full_eta[kappa..].to_vec();
                    NonlinearStep::essm(
                        ld.delta_km,
                        ld.gamma_per_w_km,
                        ld.effective_length_km,
                        eta_half,
                    )
                }
            };
            layers.push(Layer { linear, nonlinear });
        }
        let model = LdbpModel {
            layers,
            layout: dump.layout,
            sample_rate_hz: dump.sample_rate_hz,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_dump())?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let dump: ModelDump = serde_json::from_str(&text)?;
        Self::from_dump(&dump)
    }
}
