//! Progressive tap pruning: binary masks remove the outermost symmetric
//! tap pair of a filter at scheduled iterations. Masks never un-prune.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LdbpModel;
use crate::train::adam::AdamState;
use crate::train::grad::ParamLayout;

/// One pruning event: remove the outermost active tap pair of `layer`
/// at the end of `iteration`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneEvent {
    pub iteration: usize,
    pub layer: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PruneSchedule {
    /// Target half length per layer.
    pub target_half_lengths: Vec<usize>,
    pub events: Vec<PruneEvent>,
}

impl PruneSchedule {
    pub fn none() -> Self {
        Self::default()
    }

    /// Front-loaded schedule: all events uniformly spread over the first
    /// `fraction` of the run, picking the currently longest filter first
    /// (ties resolved by layer index).
    pub fn front_loaded(
        model: &LdbpModel,
        target_half_lengths: &[usize],
        total_iterations: usize,
        fraction: f64,
    ) -> Result<Self> {
        let l = model.layers.len();
        if target_half_lengths.len() != l {
            return Err(Error::Config(format!(
                "{} target lengths for {l} layers",
                target_half_lengths.len()
            )));
        }
        let mut current: Vec<usize> = model.layers.iter().map(|x| x.linear.half_len()).collect();
        for (i, (&cur, &tgt)) in current.iter().zip(target_half_lengths).enumerate() {
            if tgt > cur {
                return Err(Error::Config(format!(
                    "layer {i}: target half length {tgt} exceeds current {cur}"
                )));
            }
        }
        let total_events: usize = current
            .iter()
            .zip(target_half_lengths)
            .map(|(&c, &t)| c - t)
            .sum();
        let window = ((total_iterations as f64 * fraction).floor() as usize).max(total_events);
        let mut events = Vec::with_capacity(total_events);
        let mut prev_iter = 0usize;
        for e in 0..total_events {
            let mut iter = (window * (e + 1)) / (total_events + 1);
            if iter <= prev_iter {
                iter = prev_iter + 1;
            }
            prev_iter = iter;
            // Longest remaining filter, lowest index on ties.
            let layer = (0..l)
                .filter(|&i| current[i] > target_half_lengths[i])
                .max_by_key(|&i| (current[i], std::cmp::Reverse(i)))
                .expect("event count matches remaining work");
            current[layer] -= 1;
            events.push(PruneEvent {
                iteration: iter,
                layer,
            });
        }
        Ok(Self {
            target_half_lengths: target_half_lengths.to_vec(),
            events,
        })
    }

    pub fn num_events(&self) -> usize {
        self.events.len()
    }
}

/// Fire every event scheduled for `iteration`: mask and zero the
/// outermost active tap of the named layer and clear its optimizer
/// moments. Returns the number of taps pruned.
pub fn prune_apply(
    model: &mut LdbpModel,
    layout: &ParamLayout,
    schedule: &PruneSchedule,
    iteration: usize,
    adam: Option<&mut AdamState>,
) -> usize {
    let mut fired = 0;
    let mut adam = adam;
    for event in schedule.events.iter().filter(|e| e.iteration == iteration) {
        let linear = &mut model.layers[event.layer].linear;
        // Outermost active tap; never prune the center tap.
        let m = (1..=linear.half_len()).rev().find(|&m| linear.mask[m]);
        let Some(m) = m else { continue };
        linear.mask[m] = false;
        linear.half_taps[m] = num_complex::Complex64::default();
        let (re, im) = layout.tap_indices(event.layer, m);
        if let Some(state) = adam.as_deref_mut() {
            state.zero_param(re);
            state.zero_param(im);
        }
        fired += 1;
    }
    fired
}
