//! Step-size planning and filter initialization.
//!
//! Provides the logarithmic step-size heuristic, half-step merging for
//! the symmetric layout, the least-squares fit of symmetric FIR filters
//! to the per-step inverse-CD response (in-band error, out-of-band gain
//! cap), the multi-objective joint design over combined responses, and
//! the z-domain split of a long symmetric filter into 3-tap sections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::FiberLink;
use crate::error::{Error, Result};
use crate::model::{Layer, LdbpModel, Layout, LinearStep, NonlinearStep};
use crate::rng::{self, Stream};
use crate::units::ps2_to_s2;

/// Logarithmic step sizes of one span, returned in backprop order
/// (largest step first). Each step carries an equal share of the
/// adjusted effective length: with a' = adjust * alpha_np, the k-th
/// boundary satisfies 1 - e^{-a' z_k} = (k/M)(1 - e^{-a' L}).
pub fn log_step_sizes(
    span_km: f64,
    steps_per_span: usize,
    alpha_db_per_km: f64,
    adjust: f64,
) -> Vec<f64> {
    assert!(steps_per_span >= 1, "steps_per_span must be >= 1");
    let a = adjust * crate::units::db_per_km_to_neper(alpha_db_per_km);
    let m = steps_per_span;
    if a * span_km < 1e-12 {
        return vec![span_km / m as f64; m];
    }
    let total = -(-a * span_km).exp_m1(); // 1 - e^{-a L}
    let mut boundaries = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let share = total * k as f64 / m as f64;
        // z_k = -ln(1 - share) / a
        boundaries.push(-(1.0 - share).ln() / a);
    }
    boundaries[m] = span_km; // exact by construction, avoid rounding
    let mut deltas: Vec<f64> = boundaries.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.reverse();
    deltas
}

/// Merge adjacent half-steps of a symmetric split-step plan:
/// (d1, ..., dM) -> (d1/2, (d1+d2)/2, ..., dM/2), length M+1.
pub fn merge_half_steps(deltas: &[f64]) -> Vec<f64> {
    let m = deltas.len();
    let mut merged = Vec::with_capacity(m + 1);
    merged.push(deltas[0] / 2.0);
    for i in 1..m {
        merged.push((deltas[i - 1] + deltas[i]) / 2.0);
    }
    merged.push(deltas[m - 1] / 2.0);
    merged
}

/// Integral of e^{-alpha (z mod span)} over the forward interval
/// [from_km, to_km]: the loss-weighted Kerr length of a backprop step,
/// valid also for steps that cross span boundaries.
pub fn kerr_weighted_length(from_km: f64, to_km: f64, span_km: f64, alpha_np: f64) -> f64 {
    if alpha_np == 0.0 {
        return to_km - from_km;
    }
    let mut acc = 0.0;
    let first_span = (from_km / span_km).floor() as i64;
    let last_span = ((to_km - 1e-12) / span_km).floor() as i64;
    for s in first_span..=last_span {
        let lo = (s as f64 * span_km).max(from_km);
        let hi = ((s + 1) as f64 * span_km).min(to_km);
        if hi <= lo {
            continue;
        }
        let u1 = lo - s as f64 * span_km;
        let u2 = hi - s as f64 * span_km;
        acc += ((-alpha_np * u1).exp() - (-alpha_np * u2).exp()) / alpha_np;
    }
    acc
}

/// The split-step partition of a whole link in backprop order, together
/// with the merged linear lengths of the symmetric layout.
#[derive(Debug, Clone)]
pub struct StepPlan {
    /// Per-step lengths in backprop order over the whole link.
    pub deltas_km: Vec<f64>,
    /// Half-step-merged linear lengths (length M+1).
    pub merged_km: Vec<f64>,
    pub span_km: f64,
    pub total_km: f64,
}

impl StepPlan {
    /// Logarithmic per-span partition, replicated over all spans.
    pub fn per_span(link: &FiberLink, steps_per_span: usize, adjust: f64) -> Self {
        let per_span = log_step_sizes(link.span_km, steps_per_span, link.alpha_db_per_km, adjust);
        let mut deltas = Vec::with_capacity(per_span.len() * link.num_spans);
        for _ in 0..link.num_spans {
            deltas.extend_from_slice(&per_span);
        }
        let merged = merge_half_steps(&deltas);
        Self {
            deltas_km: deltas,
            merged_km: merged,
            span_km: link.span_km,
            total_km: link.total_km(),
        }
    }

    /// Uniform partition of the whole link into `num_steps` steps; the
    /// steps may span multiple amplifier spans.
    pub fn few_steps(link: &FiberLink, num_steps: usize) -> Self {
        assert!(num_steps >= 1);
        let deltas = vec![link.total_km() / num_steps as f64; num_steps];
        let merged = merge_half_steps(&deltas);
        Self {
            deltas_km: deltas,
            merged_km: merged,
            span_km: link.span_km,
            total_km: link.total_km(),
        }
    }

    pub fn num_steps(&self) -> usize {
        self.deltas_km.len()
    }

    /// Number of model layers for the given layout.
    pub fn num_layers(&self, layout: Layout) -> usize {
        match layout {
            Layout::Asymmetric => self.num_steps(),
            Layout::SymmetricPlusHalf => self.num_steps() + 1,
        }
    }

    /// Design length of each layer's linear step.
    pub fn linear_lengths(&self, layout: Layout) -> Vec<f64> {
        match layout {
            Layout::Asymmetric => self.deltas_km.clone(),
            Layout::SymmetricPlusHalf => self.merged_km.clone(),
        }
    }

    /// Per-layer nonlinear step lengths; the symmetric layout appends
    /// the trailing identity (delta = 0).
    pub fn nonlinear_deltas(&self, layout: Layout) -> Vec<f64> {
        match layout {
            Layout::Asymmetric => self.deltas_km.clone(),
            Layout::SymmetricPlusHalf => {
                let mut d = self.deltas_km.clone();
                d.push(0.0);
                d
            }
        }
    }

    /// Loss- and position-weighted effective length of each nonlinear
    /// step (aligned with `nonlinear_deltas`). With `loss_aware` off,
    /// the plain step length is used instead.
    pub fn effective_lengths(&self, layout: Layout, alpha_np: f64, loss_aware: bool) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_steps() + 1);
        let mut covered = 0.0;
        for &d in &self.deltas_km {
            let hi = self.total_km - covered;
            let lo = hi - d;
            covered += d;
            out.push(if loss_aware {
                kerr_weighted_length(lo.max(0.0), hi, self.span_km, alpha_np)
            } else {
                d
            });
        }
        if layout == Layout::SymmetricPlusHalf {
            out.push(0.0);
        }
        out
    }
}

/// CD phase factor xi = -beta2 delta f_s^2 / 2 of the target response
/// e^{j xi w^2} that inverts dispersion over `delta_km`.
pub fn cd_phase_factor(delta_km: f64, beta2_ps2_per_km: f64, sample_rate_hz: f64) -> f64 {
    -ps2_to_s2(beta2_ps2_per_km) * delta_km * sample_rate_hz * sample_rate_hz / 2.0
}

/// The ideal inverse-CD response e^{j xi w^2} over the given normalized
/// angular-frequency grid.
pub fn ideal_inverse_cd(
    delta_km: f64,
    beta2_ps2_per_km: f64,
    sample_rate_hz: f64,
    grid: &[f64],
) -> Vec<Complex64> {
    let xi = cd_phase_factor(delta_km, beta2_ps2_per_km, sample_rate_hz);
    grid.iter()
        .map(|&w| Complex64::from_polar(1.0, xi * w * w))
        .collect()
}

/// Uniform grid w_i = 2 pi i / N for i = -N/2..N/2 (N+1 points, N even).
pub fn ls_grid(num_intervals: usize) -> Vec<f64> {
    let n = num_intervals as i64;
    (-n / 2..=n / 2)
        .map(|i| 2.0 * std::f64::consts::PI * i as f64 / n as f64)
        .collect()
}

/// Configuration of the constrained least-squares filter fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LsFitConfig {
    /// Minimum number of grid intervals; the fit uses
    /// max(num_freq_points, 8 * filter length, 256), rounded even.
    pub num_freq_points: usize,
    /// In-band edge as a fraction of the sample rate; the response error
    /// is minimized only for |f| <= fraction * f_s.
    pub signal_band_fraction: f64,
    /// Out-of-band magnitude cap (infinity disables the constraint).
    pub max_oob_gain: f64,
}

impl Default for LsFitConfig {
    fn default() -> Self {
        Self {
            num_freq_points: 0,
            // (1 + rolloff)/2 * R_s / f_s for the default 10% roll-off
            // at 2 samples/symbol.
            signal_band_fraction: 0.275,
            max_oob_gain: 1.0,
        }
    }
}

impl LsFitConfig {
    /// Band edge from a concrete pulse shape: (1 + rolloff) / (2 rho_d).
    pub fn for_spec(spec: &crate::signal::SignalSpec) -> Self {
        Self {
            signal_band_fraction: (1.0 + spec.rolloff) / (2.0 * spec.digital_oversampling as f64),
            ..Self::default()
        }
    }

    pub fn grid_intervals(&self, filter_len: usize) -> usize {
        let n = self.num_freq_points.max(8 * filter_len).max(256);
        n + n % 2
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.signal_band_fraction) || self.signal_band_fraction == 0.0 {
            return Err(Error::Config(format!(
                "signal_band_fraction must lie in (0, 0.5], got {}",
                self.signal_band_fraction
            )));
        }
        Ok(())
    }
}

/// Outcome flags of a constrained fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LsFitReport {
    /// Whether the out-of-band cap holds at the returned solution.
    pub oob_satisfied: bool,
    /// Penalty-tightening rounds used.
    pub rounds: usize,
}

/// Solve an SPD system via Cholesky; `ridge` is added to the diagonal on
/// failure (returns whether the ridge was needed).
fn cholesky_solve(a: &[Vec<f64>], rhs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return None;
                }
                l[i][j] = sum.sqrt();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    let solve_one = |b: &[f64]| -> Vec<f64> {
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut sum = b[i];
            for k in 0..i {
                sum -= l[i][k] * y[k];
            }
            y[i] = sum / l[i][i];
        }
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut sum = y[i];
            for k in i + 1..n {
                sum -= l[k][i] * x[k];
            }
            x[i] = sum / l[i][i];
        }
        x
    };
    Some(rhs.iter().map(|b| solve_one(b)).collect())
}

/// Row of the half-tap response matrix at normalized frequency w:
/// F(h)(w) = h_0 + 2 sum_m h_m cos(m w).
fn response_row(w: f64, half_len: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(half_len + 1);
    row.push(1.0);
    for m in 1..=half_len {
        row.push(2.0 * (m as f64 * w).cos());
    }
    row
}

/// Weighted normal-equation solve for a symmetric complex filter: rows
/// (c_i, weight_i, target_i) accumulate A = sum w c c^T and the re/im
/// right-hand sides. Returns the half taps.
fn solve_weighted(
    rows: &[(Vec<f64>, f64, Complex64)],
    half_len: usize,
) -> Result<(Vec<Complex64>, bool)> {
    let n = half_len + 1;
    let mut a = vec![vec![0.0; n]; n];
    let mut rhs_re = vec![0.0; n];
    let mut rhs_im = vec![0.0; n];
    for (c, w, d) in rows {
        for i in 0..n {
            let wc = w * c[i];
            for j in 0..=i {
                a[i][j] += wc * c[j];
            }
            rhs_re[i] += wc * d.re;
            rhs_im[i] += wc * d.im;
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            a[j][i] = a[j][i]; // lower triangle already filled
            a[i][j] = a[j][i];
        }
    }
    let mut ridged = false;
    let solution = match cholesky_solve(&a, &[rhs_re.clone(), rhs_im.clone()]) {
        Some(s) => s,
        None => {
            let ridge = 1e-12 * a.iter().enumerate().map(|(i, r)| r[i]).fold(1.0, f64::max);
            for (i, row) in a.iter_mut().enumerate() {
                row[i] += ridge;
            }
            ridged = true;
            cholesky_solve(&a, &[rhs_re, rhs_im])
                .ok_or_else(|| Error::Numerical("normal equations singular even with ridge".into()))?
        }
    };
    let taps = (0..n)
        .map(|i| Complex64::new(solution[0][i], solution[1][i]))
        .collect();
    Ok((taps, ridged))
}

/// Fit a symmetric complex filter of half length K to `target` over the
/// grid implied by its length: in-band squared error is minimized and
/// the out-of-band magnitude is pushed under `max_oob_gain` by a
/// geometrically tightened penalty (x10 per round, at most 6 rounds).
pub fn ls_fit_filter(
    target: &[Complex64],
    half_len: usize,
    config: &LsFitConfig,
) -> Result<(LinearStep, LsFitReport)> {
    config.validate()?;
    let n_points = target.len();
    if n_points < 4 * (2 * half_len + 1) {
        return Err(Error::Config(format!(
            "{n_points} grid points are too few for a filter of length {}",
            2 * half_len + 1
        )));
    }
    let grid = ls_grid(n_points - 1);
    let w_edge = 2.0 * std::f64::consts::PI * config.signal_band_fraction;
    let mut base_rows: Vec<(Vec<f64>, f64, Complex64)> = Vec::new();
    let mut oob: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, &w) in grid.iter().enumerate() {
        let row = response_row(w, half_len);
        if w.abs() <= w_edge + 1e-12 {
            base_rows.push((row, 1.0, target[i]));
        } else {
            oob.push((i, row));
        }
    }
    let cap = config.max_oob_gain;
    let mut rows = base_rows.clone();
    let (mut taps, _) = solve_weighted(&rows, half_len)?;
    let mut report = LsFitReport {
        oob_satisfied: true,
        rounds: 0,
    };
    if cap.is_finite() {
        let mut penalty = 1.0;
        for round in 0..6 {
            let violations: Vec<(&Vec<f64>, Complex64)> = oob
                .iter()
                .filter_map(|(_, row)| {
                    let resp: Complex64 = row
                        .iter()
                        .zip(&taps)
                        .map(|(c, h)| c * h)
                        .sum();
                    let mag = resp.norm();
                    if mag > cap * (1.0 + 1e-9) {
                        // Pull the response back onto the cap circle.
                        Some((row, resp * (cap / mag)))
                    } else {
                        None
                    }
                })
                .collect();
            if violations.is_empty() {
                report.oob_satisfied = true;
                break;
            }
            report.rounds = round + 1;
            report.oob_satisfied = false;
            rows = base_rows.clone();
            for (row, target) in &violations {
                rows.push(((*row).clone(), penalty, *target));
            }
            let (new_taps, _) = solve_weighted(&rows, half_len)?;
            taps = new_taps;
            penalty *= 10.0;
        }
        if !report.oob_satisfied {
            // Final check after the last solve.
            report.oob_satisfied = oob.iter().all(|(_, row)| {
                let resp: Complex64 = row.iter().zip(&taps).map(|(c, h)| c * h).sum();
                resp.norm() <= cap * (1.0 + 1e-9)
            });
        }
    }
    Ok((LinearStep::new(taps), report))
}

/// Filter initialization schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Least-squares fit to the per-layer inverse-CD response.
    LeastSquares,
    /// Identity filters; agnostic to the link parameters.
    Unit,
    /// I.i.d. standard-normal taps, energy-normalized per filter.
    Random,
}

/// Everything needed to build a model from a link.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    pub layout: Layout,
    /// Steps per span of the per-span logarithmic plan; ignored when
    /// `total_steps` is set.
    pub steps_per_span: usize,
    /// Optional uniform whole-link partition with this many steps
    /// (steps may cover several spans).
    pub total_steps: Option<usize>,
    /// Half lengths K per layer; a single entry is broadcast.
    pub half_lengths: Vec<usize>,
    pub scheme: InitScheme,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub ls: LsFitConfig,
    /// ESSM power-filter half length per layer (None: standard steps).
    pub essm_kappa: Option<usize>,
    /// Use the loss- and position-aware effective length in the
    /// nonlinear steps (the plain step length otherwise).
    pub loss_aware: bool,
    /// Adjusting factor of the logarithmic step heuristic.
    pub log_adjust: f64,
}

impl ModelBuilder {
    pub fn new(layout: Layout, steps_per_span: usize, half_len: usize, sample_rate_hz: f64) -> Self {
        Self {
            layout,
            steps_per_span,
            total_steps: None,
            half_lengths: vec![half_len],
            scheme: InitScheme::LeastSquares,
            seed: 0,
            sample_rate_hz,
            ls: LsFitConfig::default(),
            essm_kappa: None,
            loss_aware: true,
            log_adjust: 0.4,
        }
    }

    pub fn plan(&self, link: &FiberLink) -> StepPlan {
        match self.total_steps {
            Some(n) => StepPlan::few_steps(link, n),
            None => StepPlan::per_span(link, self.steps_per_span, self.log_adjust),
        }
    }
}

/// Build an initialized model for the link.
pub fn init_model(link: &FiberLink, builder: &ModelBuilder) -> Result<LdbpModel> {
    let plan = builder.plan(link);
    let num_layers = plan.num_layers(builder.layout);
    let half_lengths: Vec<usize> = if builder.half_lengths.len() == 1 {
        vec![builder.half_lengths[0]; num_layers]
    } else if builder.half_lengths.len() == num_layers {
        builder.half_lengths.clone()
    } else {
        return Err(Error::Config(format!(
            "{} half lengths for {} layers",
            builder.half_lengths.len(),
            num_layers
        )));
    };
    let linear_lengths = plan.linear_lengths(builder.layout);
    let nl_deltas = plan.nonlinear_deltas(builder.layout);
    let nl_effective = plan.effective_lengths(builder.layout, link.alpha_np(), builder.loss_aware);

    let mut ls_cache: std::collections::HashMap<(u64, usize), LinearStep> =
        std::collections::HashMap::new();
    let mut layers = Vec::with_capacity(num_layers);
    for i in 0..num_layers {
        let k = half_lengths[i];
        let linear = match builder.scheme {
            InitScheme::Unit => LinearStep::unit(k),
            InitScheme::LeastSquares => {
                let key = (linear_lengths[i].to_bits(), k);
                if let Some(step) = ls_cache.get(&key) {
                    step.clone()
                } else {
                    let n = builder.ls.grid_intervals(2 * k + 1);
                    let grid = ls_grid(n);
                    let target = ideal_inverse_cd(
                        linear_lengths[i],
                        link.beta2_ps2_per_km,
                        builder.sample_rate_hz,
                        &grid,
                    );
                    let (step, _) = ls_fit_filter(&target, k, &builder.ls)?;
                    ls_cache.insert(key, step.clone());
                    step
                }
            }
            InitScheme::Random => {
                use rand_distr::{Distribution, Normal};
                let normal = Normal::new(0.0, 1.0).unwrap();
                let mut rng = rng::substream(builder.seed, Stream::Init, i as u64, 0);
                let half: Vec<Complex64> = (0..=k)
                    .map(|_| Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
                    .collect();
                let mut step = LinearStep::new(half);
                // Normalize by the full-filter energy sum |h_j|^2.
                let energy: f64 = step.full_taps().iter().map(|h| h.norm_sqr()).sum();
                for h in &mut step.half_taps {
                    *h /= energy;
                }
                step
            }
        };
        let nonlinear = if nl_deltas[i] == 0.0 {
            NonlinearStep::identity()
        } else {
            match builder.essm_kappa {
                None => NonlinearStep::standard(nl_deltas[i], link.gamma_per_w_km, nl_effective[i]),
                Some(kappa) => {
                    let mut eta = vec![0.0; kappa + 1];
                    eta[0] = 1.0;
                    NonlinearStep::essm(nl_deltas[i], link.gamma_per_w_km, nl_effective[i], eta)
                }
            }
        };
        layers.push(Layer { linear, nonlinear });
    }
    let model = LdbpModel {
        layers,
        layout: builder.layout,
        sample_rate_hz: builder.sample_rate_hz,
    };
    model.validate()?;
    Ok(model)
}

/// Multi-objective joint filter design.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultiObjectiveConfig {
    /// Weight per objective group: weights[g] applies to all contiguous
    /// filter chains of length g+1. Missing groups are excluded.
    pub weights: Vec<f64>,
    pub max_sweeps: usize,
    /// Stop when the objective decrease falls below tol (relative).
    pub tol: f64,
    pub grid: LsFitConfig,
}

impl Default for MultiObjectiveConfig {
    fn default() -> Self {
        Self {
            weights: vec![1.0],
            max_sweeps: 20,
            tol: 1e-9,
            grid: LsFitConfig::default(),
        }
    }
}

/// Result of the coordinate-descent joint design.
#[derive(Debug, Clone)]
pub struct MultiObjectiveOutcome {
    pub model: LdbpModel,
    /// Objective value after each sweep (index 0: before any sweep).
    pub objective_trace: Vec<f64>,
    pub ridged: bool,
}

/// Jointly fit all linear steps to the family of combined-response
/// objectives by cyclic per-filter weighted least squares. The model
/// must be all-linear (identity nonlinearities). The objective is
/// non-increasing across solves because each solve is an exact
/// minimization in one filter's coefficients.
pub fn multiobjective_ls(
    model: &LdbpModel,
    xi_per_layer: &[f64],
    config: &MultiObjectiveConfig,
) -> Result<MultiObjectiveOutcome> {
    let m = model.layers.len();
    if xi_per_layer.len() != m {
        return Err(Error::Config(format!(
            "{} CD factors for {m} layers",
            xi_per_layer.len()
        )));
    }
    if model
        .layers
        .iter()
        .any(|l| !l.nonlinear.is_identity())
    {
        return Err(Error::Config(
            "multiobjective_ls expects an all-linear model".into(),
        ));
    }
    if config.weights.is_empty() || config.weights.iter().any(|&w| w < 0.0) {
        return Err(Error::Config("objective weights must be non-negative".into()));
    }
    let max_filter_len = model
        .layers
        .iter()
        .map(|l| l.linear.full_len())
        .max()
        .unwrap_or(1);
    let n = config.grid.grid_intervals(max_filter_len);
    let grid = ls_grid(n);
    let w_edge = 2.0 * std::f64::consts::PI * config.grid.signal_band_fraction;
    let band: Vec<usize> = grid
        .iter()
        .enumerate()
        .filter(|(_, w)| w.abs() <= w_edge + 1e-12)
        .map(|(i, _)| i)
        .collect();

    // All contiguous chains with a positive group weight.
    struct Chain {
        lo: usize,
        hi: usize, // inclusive
        weight: f64,
        target: Vec<Complex64>, // on band points
    }
    let mut chains = Vec::new();
    for len in 1..=m.min(config.weights.len()) {
        let weight = config.weights[len - 1];
        if weight <= 0.0 {
            continue;
        }
        for lo in 0..=(m - len) {
            let hi = lo + len - 1;
            let xi_total: f64 = xi_per_layer[lo..=hi].iter().sum();
            let target = band
                .iter()
                .map(|&p| Complex64::from_polar(1.0, xi_total * grid[p] * grid[p]))
                .collect();
            chains.push(Chain {
                lo,
                hi,
                weight,
                target,
            });
        }
    }
    if chains.is_empty() {
        return Err(Error::Config("no objectives selected".into()));
    }

    let mut out = model.clone();
    // Cached per-layer responses on the band points.
    let mut responses: Vec<Vec<Complex64>> = out
        .layers
        .iter()
        .map(|l| band.iter().map(|&p| l.linear.response(grid[p])).collect())
        .collect();
    let evaluate = |responses: &[Vec<Complex64>]| -> f64 {
        let mut total = 0.0;
        for chain in &chains {
            for (bi, d) in chain.target.iter().enumerate() {
                let mut combined = Complex64::new(1.0, 0.0);
                for resp in &responses[chain.lo..=chain.hi] {
                    combined *= resp[bi];
                }
                total += chain.weight * (combined - d).norm_sqr();
            }
        }
        total
    };

    let mut trace = vec![evaluate(&responses)];
    let mut ridged = false;
    for _sweep in 0..config.max_sweeps {
        for j in 0..m {
            let half_len = out.layers[j].linear.half_len();
            let mut rows: Vec<(Vec<f64>, f64, Complex64)> = Vec::new();
            for chain in &chains {
                if j < chain.lo || j > chain.hi {
                    continue;
                }
                for (bi, &p) in band.iter().enumerate() {
                    // Response of the other filters in the chain.
                    let mut env = Complex64::new(1.0, 0.0);
                    for (k, resp) in responses.iter().enumerate().take(chain.hi + 1).skip(chain.lo)
                    {
                        if k != j {
                            env *= resp[bi];
                        }
                    }
                    let env_sq = env.norm_sqr();
                    if env_sq == 0.0 {
                        continue;
                    }
                    // |F_j(w) env - d|^2 = |env|^2 |F_j(w) - d/env|^2.
                    rows.push((
                        response_row(grid[p], half_len),
                        chain.weight * env_sq,
                        chain.target[bi] / env,
                    ));
                }
            }
            if rows.is_empty() {
                continue;
            }
            let (taps, was_ridged) = solve_weighted(&rows, half_len)?;
            ridged |= was_ridged;
            out.layers[j].linear = LinearStep::new(taps);
            responses[j] = band
                .iter()
                .map(|&p| out.layers[j].linear.response(grid[p]))
                .collect();
        }
        let objective = evaluate(&responses);
        let prev = *trace.last().unwrap();
        trace.push(objective);
        if prev - objective < config.tol * prev.max(1e-300) {
            break;
        }
    }
    Ok(MultiObjectiveOutcome {
        model: out,
        objective_trace: trace,
        ridged,
    })
}

/// Durand-Kerner root finding for a complex polynomial given by
/// ascending coefficients. Returns the deg(p) roots.
fn polynomial_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let deg = coeffs.len() - 1;
    let lead = coeffs[deg];
    if lead.norm() == 0.0 {
        return Err(Error::Numerical("leading coefficient is zero".into()));
    }
    let monic: Vec<Complex64> = coeffs.iter().map(|c| c / lead).collect();
    let eval = |x: Complex64| -> Complex64 {
        let mut acc = Complex64::default();
        for &c in monic.iter().rev() {
            acc = acc * x + c;
        }
        acc
    };
    // Standard initialization on a spiral off the unit circle.
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..deg).map(|k| seed.powu(k as u32 + 1)).collect();
    let scale = monic.iter().map(|c| c.norm()).fold(1.0, f64::max);
    for _ in 0..600 {
        let mut max_step = 0.0f64;
        for k in 0..deg {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..deg {
                if j != k {
                    denom *= roots[k] - roots[j];
                }
            }
            if denom.norm() == 0.0 {
                // Perturb coincident estimates.
                roots[k] += Complex64::new(1e-6, 1e-6);
                max_step = f64::MAX;
                continue;
            }
            let step = eval(roots[k]) / denom;
            roots[k] -= step;
            max_step = max_step.max(step.norm());
        }
        if max_step < 1e-14 * scale.max(1.0) {
            return Ok(roots);
        }
    }
    // Accept if residuals are small even without step convergence.
    if roots.iter().all(|&r| eval(r).norm() < 1e-8 * scale.max(1.0)) {
        Ok(roots)
    } else {
        Err(Error::Numerical(
            "polynomial root finding did not converge".into(),
        ))
    }
}

/// Split a symmetric odd-length filter into symmetric 3-tap sections
/// whose cascade reproduces it: roots of the z-polynomial come in
/// reciprocal pairs (q, 1/q), each contributing a section
/// (1, -(q + 1/q), 1); the overall gain is spread evenly across
/// sections (the split is exact but not unique).
pub fn factor_filter(full_taps: &[Complex64]) -> Result<Vec<Vec<Complex64>>> {
    if full_taps.len() % 2 == 0 {
        return Err(Error::Config("filter length must be odd".into()));
    }
    let peak = full_taps.iter().map(|h| h.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::Config("cannot factor the zero filter".into()));
    }
    for (a, b) in full_taps.iter().zip(full_taps.iter().rev()) {
        if (a - b).norm() > 1e-10 * peak {
            return Err(Error::Config("filter is not symmetric".into()));
        }
    }
    // Trim zero outer tap pairs.
    let mut taps = full_taps.to_vec();
    while taps.len() > 1 && taps[0].norm() <= 1e-14 * peak {
        taps = taps[1..taps.len() - 1].to_vec();
    }
    if taps.len() == 1 {
        return Ok(vec![vec![Complex64::default(), taps[0], Complex64::default()]]);
    }
    if taps.len() == 3 {
        return Ok(vec![taps]);
    }
    let roots = polynomial_roots(&taps)?;
    // Pair each root with the one closest to its reciprocal.
    let mut used = vec![false; roots.len()];
    let mut sections: Vec<Vec<Complex64>> = Vec::new();
    for k in 0..roots.len() {
        if used[k] {
            continue;
        }
        used[k] = true;
        let inv = 1.0 / roots[k];
        let mut best = None;
        let mut best_err = f64::MAX;
        for (j, &r) in roots.iter().enumerate() {
            if used[j] {
                continue;
            }
            let err = (r - inv).norm();
            if err < best_err {
                best_err = err;
                best = Some(j);
            }
        }
        let j = best.ok_or_else(|| Error::Numerical("unpaired polynomial root".into()))?;
        used[j] = true;
        let b = (roots[k] + 1.0 / roots[k] + roots[j] + 1.0 / roots[j]) / 2.0;
        sections.push(vec![Complex64::new(1.0, 0.0), -b, Complex64::new(1.0, 0.0)]);
    }
    // Distribute the overall gain evenly across sections.
    let mut cascade = vec![Complex64::new(1.0, 0.0)];
    for s in &sections {
        let mut next = vec![Complex64::default(); cascade.len() + 2];
        for (i, &a) in cascade.iter().enumerate() {
            for (j, &b) in s.iter().enumerate() {
                next[i + j] += a * b;
            }
        }
        cascade = next;
    }
    let num: Complex64 = cascade
        .iter()
        .zip(&taps)
        .map(|(p, t)| p.conj() * t)
        .sum();
    let den: f64 = cascade.iter().map(|p| p.norm_sqr()).sum();
    let gain = num / den;
    let per_section = gain.powf(1.0 / sections.len() as f64);
    for s in &mut sections {
        for c in s.iter_mut() {
            *c *= per_section;
        }
    }
    Ok(sections)
}

/// CD memory in samples: |2 pi beta2 df L f_s|.
pub fn cd_memory_taps(
    beta2_ps2_per_km: f64,
    bandwidth_hz: f64,
    length_km: f64,
    sample_rate_hz: f64,
) -> f64 {
    (2.0 * std::f64::consts::PI
        * ps2_to_s2(beta2_ps2_per_km)
        * bandwidth_hz
        * length_km
        * sample_rate_hz)
        .abs()
}

#[cfg(test)]
mod tests {
    use super::*;


    #[test]
    fn single_step_is_whole_span() {
        let d = log_step_sizes(80.0, 1, 0.2, 0.4);
        assert_eq!(d.len(), 1);
        assert!((d[0] - 80.0).abs() < 1e-12);
    }

    #[test]
    fn example_two_step_split() {
        // 100 km at 2 steps per span: ~70 km then ~30 km in backprop order.
        let d = log_step_sizes(100.0, 2, 0.2, 0.4);
        assert!((d[0] - 70.0).abs() < 1.0, "d0 = {}", d[0]);
        assert!((d[1] - 30.0).abs() < 1.0, "d1 = {}", d[1]);
    }

    #[test]
    fn steps_partition_span() {
        for steps in [1usize, 2, 5, 16] {
            let d = log_step_sizes(103.7, steps, 0.21, 0.4);
            let sum: f64 = d.iter().sum();
            assert!((sum - 103.7).abs() < 1e-9);
            // Backprop order: non-increasing.
            for w in d.windows(2) {
                assert!(w[0] >= w[1] - 1e-12);
            }
        }
    }

    #[test]
    fn zero_adjust_gives_uniform() {
        let d = log_step_sizes(90.0, 3, 0.2, 0.0);
        for v in &d {
            assert!((v - 30.0).abs() < 1e-12);
        }
        // Continuity: a vanishing adjust factor approaches uniform.
        let d2 = log_step_sizes(90.0, 3, 0.2, 1e-9);
        for v in &d2 {
            assert!((v - 30.0).abs() < 1e-4);
        }
    }

    #[test]
    fn merge_examples() {
        let merged = merge_half_steps(&[70.0, 30.0, 70.0, 30.0]);
        assert_eq!(merged, vec![35.0, 50.0, 50.0, 50.0, 15.0]);
        assert_eq!(merge_half_steps(&[100.0]), vec![50.0, 50.0]);
        let sum: f64 = merged.iter().sum();
        assert!((sum - 200.0).abs() < 1e-12);
    }

    #[test]
    fn example_one_merged_plan() {
        let link = FiberLink {
            span_km: 100.0,
            num_spans: 2,
            ..FiberLink::default()
        };
        let plan = StepPlan::per_span(&link, 2, 0.4);
        let golden = [35.0, 50.0, 50.0, 50.0, 15.0];
        assert_eq!(plan.merged_km.len(), 5);
        for (got, want) in plan.merged_km.iter().zip(&golden) {
            assert!((got - want).abs() < 1.0, "{got} vs {want}");
        }
    }

    #[test]
    fn kerr_weighted_length_basics() {
        // Lossless: plain length.
        assert!((kerr_weighted_length(10.0, 60.0, 80.0, 0.0) - 50.0).abs() < 1e-12);
        // Within one span starting at the amplifier: L_eff.
        let a = crate::units::db_per_km_to_neper(0.2);
        let leff = crate::channel::effective_length_km(80.0, a);
        assert!((kerr_weighted_length(0.0, 80.0, 80.0, a) - leff).abs() < 1e-12);
        // Crossing a span boundary equals the sum of the pieces.
        let whole = kerr_weighted_length(60.0, 110.0, 80.0, a);
        let split = kerr_weighted_length(60.0, 80.0, 80.0, a) + kerr_weighted_length(80.0, 110.0, 80.0, a);
        assert!((whole - split).abs() < 1e-12);
        // Offset into the span attenuates the weight.
        let near = kerr_weighted_length(0.0, 10.0, 80.0, a);
        let far = kerr_weighted_length(60.0, 70.0, 80.0, a);
        assert!(far < near);
        assert!((far - (-a * 60.0).exp() * crate::channel::effective_length_km(10.0, a)).abs() < 1e-12);
    }

    #[test]
    fn ideal_inverse_cd_properties() {
        let grid = ls_grid(64);
        let d0 = ideal_inverse_cd(0.0, -21.683, 21.4e9, &grid);
        for v in &d0 {
            assert!((v - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let d = ideal_inverse_cd(80.0, -21.683, 21.4e9, &grid);
        let n = grid.len();
        for i in 0..n {
            assert!((d[i].norm() - 1.0).abs() < 1e-12);
            // Even in w.
            assert!((d[i] - d[n - 1 - i]).norm() < 1e-12);
        }
    }

    #[test]
    fn ls_fit_flat_target_is_delta() {
        let cfg = LsFitConfig::default();
        let n = cfg.grid_intervals(9);
        let target = vec![Complex64::new(1.0, 0.0); n + 1];
        let (step, report) = ls_fit_filter(&target, 4, &cfg).unwrap();
        assert!(report.oob_satisfied);
        assert!((step.half_taps[0] - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        for m in 1..=4 {
            assert!(step.half_taps[m].norm() < 1e-9);
        }
    }

    #[test]
    fn ls_fit_matches_pseudoinverse_oracle() {
        let cfg = LsFitConfig {
            max_oob_gain: f64::INFINITY,
            ..LsFitConfig::default()
        };
        let k = 6;
        let n = cfg.grid_intervals(2 * k + 1);
        let grid = ls_grid(n);
        let target = ideal_inverse_cd(80.0, -21.683, 21.4e9, &grid);
        let (step, _) = ls_fit_filter(&target, k, &cfg).unwrap();

        // Oracle: SVD least squares on the in-band rows, re/im separately.
        let w_edge = 2.0 * std::f64::consts::PI * cfg.signal_band_fraction;
        let rows: Vec<usize> = (0..grid.len())
            .filter(|&i| grid[i].abs() <= w_edge + 1e-12)
            .collect();
        let mat = nalgebra::DMatrix::from_fn(rows.len(), k + 1, |r, c| {
            if c == 0 {
                1.0
            } else {
                2.0 * (c as f64 * grid[rows[r]]).cos()
            }
        });
        let svd = mat.svd(true, true);
        let re = svd
            .solve(
                &nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i].re)),
                1e-12,
            )
            .unwrap();
        let im = svd
            .solve(
                &nalgebra::DVector::from_iterator(rows.len(), rows.iter().map(|&i| target[i].im)),
                1e-12,
            )
            .unwrap();
        for m in 0..=k {
            let want = Complex64::new(re[m], im[m]);
            assert!(
                (step.half_taps[m] - want).norm() < 1e-8,
                "tap {m}: {} vs {want}",
                step.half_taps[m]
            );
        }
    }

    #[test]
    fn ls_fit_ripple_shrinks_with_length() {
        let cfg = LsFitConfig {
            max_oob_gain: f64::INFINITY,
            ..LsFitConfig::default()
        };
        let mut ripples = Vec::new();
        for &k in &[2usize, 4, 8] {
            let n = cfg.grid_intervals(2 * k + 1).max(1024);
            let cfg_k = LsFitConfig {
                num_freq_points: n,
                ..cfg.clone()
            };
            let grid = ls_grid(n);
            let target = ideal_inverse_cd(120.0, -21.683, 21.4e9, &grid);
            let (step, _) = ls_fit_filter(&target, k, &cfg_k).unwrap();
            let w_edge = 2.0 * std::f64::consts::PI * cfg.signal_band_fraction;
            let ripple = grid
                .iter()
                .enumerate()
                .filter(|(_, w)| w.abs() <= w_edge)
                .map(|(i, &w)| (step.response(w) - target[i]).norm())
                .fold(0.0, f64::max);
            ripples.push(ripple);
        }
        assert!(ripples[0] > ripples[1] && ripples[1] > ripples[2], "{ripples:?}");
    }

    #[test]
    fn ls_fit_respects_oob_cap() {
        let cfg = LsFitConfig {
            max_oob_gain: 1.0,
            ..LsFitConfig::default()
        };
        let k = 8;
        let n = cfg.grid_intervals(2 * k + 1);
        let grid = ls_grid(n);
        let target = ideal_inverse_cd(300.0, -21.683, 21.4e9, &grid);
        let (step, report) = ls_fit_filter(&target, k, &cfg).unwrap();
        if report.oob_satisfied {
            let w_edge = 2.0 * std::f64::consts::PI * cfg.signal_band_fraction;
            let max_oob = grid
                .iter()
                .filter(|w| w.abs() > w_edge + 1e-12)
                .map(|&w| step.response(w).norm())
                .fold(0.0, f64::max);
            assert!(max_oob <= 1.0 + 1e-6, "max oob {max_oob}");
        }
    }

    #[test]
    fn init_model_example_one_layer_structure() {
        let link = FiberLink {
            span_km: 100.0,
            num_spans: 2,
            ..FiberLink::default()
        };
        let mut builder = ModelBuilder::new(Layout::SymmetricPlusHalf, 2, 8, 21.4e9);
        builder.scheme = InitScheme::LeastSquares;
        let model = init_model(&link, &builder).unwrap();
        assert_eq!(model.num_layers(), 5);
        // Layers 2..4 share the same 50 km design length, hence equal taps.
        for i in 2..=3 {
            assert_eq!(
                model.layers[1].linear.half_taps, model.layers[i].linear.half_taps,
                "layer {i} differs from layer 1"
            );
        }
        assert!(model.layers[4].nonlinear.is_identity());
    }

    #[test]
    fn init_unit_scheme_is_identity_linear_chain() {
        let link = FiberLink::default();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, 21.4e9);
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let x = crate::signal::ComplexSignal::new(
            (0..64)
                .map(|t| Complex64::new((t as f64 * 0.1).sin(), 0.2))
                .collect(),
            21.4e9,
        )
        .unwrap();
        let y = crate::model::linear_only_forward(&model, &x).unwrap();
        for (a, b) in y.samples.iter().zip(&x.samples) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn init_random_deterministic_and_normalized() {
        let link = FiberLink::default();
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 4, 21.4e9);
        builder.scheme = InitScheme::Random;
        builder.seed = 9;
        let a = init_model(&link, &builder).unwrap();
        let b = init_model(&link, &builder).unwrap();
        assert_eq!(a, b);
        builder.seed = 10;
        let c = init_model(&link, &builder).unwrap();
        assert_ne!(a, c);
        // Energy normalization: sum |h|^2 = 1 / (previous sum), i.e. the
        // normalized filter satisfies sum |h|^2 * E = 1 with E the raw
        // energy; just check the rule maps the raw taps consistently.
        for layer in &a.layers {
            let e: f64 = layer.linear.full_taps().iter().map(|h| h.norm_sqr()).sum();
            assert!(e > 0.0 && e.is_finite());
        }
    }

    #[test]
    fn multiobjective_individual_weights_match_ls_fit() {
        let link = FiberLink {
            span_km: 100.0,
            num_spans: 2,
            gamma_per_w_km: 0.0,
            ..FiberLink::default()
        };
        let fs = 21.4e9;
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 5, fs);
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let xi: Vec<f64> = [100.0, 100.0]
            .iter()
            .map(|&d| cd_phase_factor(d, link.beta2_ps2_per_km, fs))
            .collect();
        let cfg = MultiObjectiveConfig {
            weights: vec![1.0],
            max_sweeps: 3,
            tol: 0.0,
            grid: LsFitConfig {
                max_oob_gain: f64::INFINITY,
                ..LsFitConfig::default()
            },
        };
        let outcome = multiobjective_ls(&model, &xi, &cfg).unwrap();
        // Individual objectives decouple: each filter equals its own fit.
        let n = cfg.grid.grid_intervals(11);
        let grid = ls_grid(n);
        let target = ideal_inverse_cd(100.0, link.beta2_ps2_per_km, fs, &grid);
        let (want, _) = ls_fit_filter(&target, 5, &cfg.grid).unwrap();
        for layer in &outcome.model.layers {
            for (a, b) in layer.linear.half_taps.iter().zip(&want.half_taps) {
                assert!((a - b).norm() < 1e-8, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn multiobjective_objective_non_increasing() {
        let link = FiberLink {
            span_km: 80.0,
            num_spans: 3,
            gamma_per_w_km: 0.0,
            ..FiberLink::default()
        };
        let fs = 21.4e9;
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 3, fs);
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let xi: Vec<f64> = (0..3)
            .map(|_| cd_phase_factor(80.0, link.beta2_ps2_per_km, fs))
            .collect();
        let cfg = MultiObjectiveConfig {
            weights: vec![1.0, 1.0, 4.0],
            max_sweeps: 8,
            tol: 0.0,
            grid: LsFitConfig::default(),
        };
        let outcome = multiobjective_ls(&model, &xi, &cfg).unwrap();
        for w in outcome.objective_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "objective rose: {w:?}");
        }
    }

    #[test]
    fn multiobjective_overall_weight_flattens_response() {
        let link = FiberLink {
            span_km: 100.0,
            num_spans: 2,
            gamma_per_w_km: 0.0,
            ..FiberLink::default()
        };
        let fs = 21.4e9;
        let mut builder = ModelBuilder::new(Layout::Asymmetric, 1, 8, fs);
        builder.scheme = InitScheme::Unit;
        let model = init_model(&link, &builder).unwrap();
        let xi: Vec<f64> = (0..2)
            .map(|_| cd_phase_factor(100.0, link.beta2_ps2_per_km, fs))
            .collect();
        let cfg = MultiObjectiveConfig {
            weights: vec![0.01, 10.0],
            max_sweeps: 12,
            tol: 0.0,
            grid: LsFitConfig {
                max_oob_gain: f64::INFINITY,
                ..LsFitConfig::default()
            },
        };
        let outcome = multiobjective_ls(&model, &xi, &cfg).unwrap();
        // The overall in-band response should be flat within +/- 0.5 dB.
        let w_edge = 2.0 * std::f64::consts::PI * cfg.grid.signal_band_fraction;
        let grid = ls_grid(512);
        let xi_total: f64 = xi.iter().sum();
        for &w in grid.iter().filter(|w| w.abs() <= w_edge) {
            let combined = outcome.model.layers[0].linear.response(w)
                * outcome.model.layers[1].linear.response(w);
            let err_db = 20.0 * combined.norm().log10();
            assert!(err_db.abs() < 0.5, "ripple {err_db} dB at w = {w}");
            // Phase should track the total CD target.
            let target = Complex64::from_polar(1.0, xi_total * w * w);
            assert!((combined / target).arg().abs() < 0.1);
        }
    }

    #[test]
    fn factor_three_tap_returns_itself() {
        let taps = vec![
            Complex64::new(0.2, 0.1),
            Complex64::new(1.0, -0.3),
            Complex64::new(0.2, 0.1),
        ];
        let sections = factor_filter(&taps).unwrap();
        assert_eq!(sections.len(), 1);
        assert_eq!(sections[0], taps);
    }

    #[test]
    fn factor_five_tap_cascade_reproduces_filter() {
        let taps = vec![
            Complex64::new(0.21, -0.13),
            Complex64::new(-0.4, 0.33),
            Complex64::new(1.0, 0.1),
            Complex64::new(-0.4, 0.33),
            Complex64::new(0.21, -0.13),
        ];
        let sections = factor_filter(&taps).unwrap();
        assert_eq!(sections.len(), 2);
        for s in &sections {
            assert!((s[0] - s[2]).norm() < 1e-9, "section not symmetric");
        }
        let mut cascade = vec![Complex64::new(1.0, 0.0)];
        for s in &sections {
            let mut next = vec![Complex64::default(); cascade.len() + 2];
            for (i, &a) in cascade.iter().enumerate() {
                for (j, &b) in s.iter().enumerate() {
                    next[i + j] += a * b;
                }
            }
            cascade = next;
        }
        let scale = taps.iter().map(|h| h.norm()).fold(0.0, f64::max);
        for (a, b) in cascade.iter().zip(&taps) {
            assert!((a - b).norm() < 1e-6 * scale, "{a} vs {b}");
        }
    }

    #[test]
    fn factor_delta_of_length_five() {
        let mut taps = vec![Complex64::default(); 5];
        taps[2] = Complex64::new(1.0, 0.0);
        let sections = factor_filter(&taps).unwrap();
        assert_eq!(sections.len(), 1);
        assert!((sections[0][1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(sections[0][0].norm() < 1e-12 && sections[0][2].norm() < 1e-12);
    }

    #[test]
    fn cd_memory_golden_values() {
        let t69 = cd_memory_taps(21.683, 1.1 * 10.7e9, 2000.0, 21.4e9);
        assert!((t69 - 69.0).abs() <= 1.0, "{t69}");
        let t307 = cd_memory_taps(21.683, 1.1 * 32e9, 1000.0, 64e9);
        assert!((t307 - 307.0).abs() <= 1.0, "{t307}");
        assert_eq!(cd_memory_taps(21.683, 1.1e9, 0.0, 21.4e9), 0.0);
    }
}
