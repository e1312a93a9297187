use alloc::collections::VecDeque;
use alloc::format;
use alloc::vec::Vec;
use rand::Rng;

use crate::rng::StreamRng;
use crate::{Error, Result};

/// Persistent contrastive-divergence reservoir of past chain endpoints.
///
/// New chains start from a stored state with probability `1 − δ`, otherwise
/// from a uniform draw inside the initialization box. Eviction is FIFO.
#[derive(Clone, Debug, PartialEq)]
pub struct PcdBuffer {
    capacity: usize,
    reinit_prob: f64,
    low: Vec<f64>,
    high: Vec<f64>,
    states: VecDeque<Vec<f64>>,
}

impl PcdBuffer {
    pub const DEFAULT_CAPACITY: usize = 10_000;
    pub const DEFAULT_REINIT_PROB: f64 = 0.05;

    pub fn new(capacity: usize, reinit_prob: f64, low: Vec<f64>, high: Vec<f64>) -> Result<Self> {
        if capacity == 0 || !(0.0..=1.0).contains(&reinit_prob) {
            return Err(Error::Config(format!(
                "buffer needs κ ≥ 1 and δ ∈ [0, 1] (got κ = {capacity}, δ = {reinit_prob})"
            )));
        }
        if low.len() != high.len() || low.is_empty() {
            return Err(Error::Dimension {
                context: "buffer init range".into(),
                expected: low.len(),
                found: high.len(),
            });
        }
        if low
            .iter()
            .zip(&high)
            .any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::Config(
                "buffer init range must be finite with low ≤ high".into(),
            ));
        }
        Ok(Self {
            capacity,
            reinit_prob,
            low,
            high,
            states: VecDeque::new(),
        })
    }

    /// Per-dimension `[min, max]` of `states`, widened by 10% of the range
    /// (5% on each side). Flat dimensions get a ±0.05 margin.
    pub fn init_range(states: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>)> {
        let first = states
            .first()
            .ok_or_else(|| Error::Contract("init range needs at least one state".into()))?;
        let mut low = first.clone();
        let mut high = first.clone();
        for s in states {
            if s.len() != low.len() {
                return Err(Error::Dimension {
                    context: "state for init range".into(),
                    expected: low.len(),
                    found: s.len(),
                });
            }
            for ((l, h), &v) in low.iter_mut().zip(high.iter_mut()).zip(s) {
                *l = l.min(v);
                *h = h.max(v);
            }
        }
        for (l, h) in low.iter_mut().zip(high.iter_mut()) {
            let margin = if *h > *l { 0.05 * (*h - *l) } else { 0.05 };
            *l -= margin;
            *h += margin;
        }
        Ok((low, high))
    }

    /// Buffer whose init range is estimated from `states`.
    pub fn from_states(states: &[Vec<f64>], capacity: usize, reinit_prob: f64) -> Result<Self> {
        let (low, high) = Self::init_range(states)?;
        Self::new(capacity, reinit_prob, low, high)
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn reinit_prob(&self) -> f64 {
        self.reinit_prob
    }

    pub fn dim(&self) -> usize {
        self.low.len()
    }

    pub fn low(&self) -> &[f64] {
        &self.low
    }

    pub fn high(&self) -> &[f64] {
        &self.high
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Stored states, oldest first.
    pub fn states(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.states.iter()
    }

    pub fn push(&mut self, state: Vec<f64>) -> Result<()> {
        if state.len() != self.dim() {
            return Err(Error::Dimension {
                context: "buffer state".into(),
                expected: self.dim(),
                found: state.len(),
            });
        }
        if self.states.len() == self.capacity {
            self.states.pop_front();
        }
        self.states.push_back(state);
        Ok(())
    }

    pub fn sample_uniform(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.low
            .iter()
            .zip(&self.high)
            .map(|(&l, &h)| if h > l { rng.random_range(l..h) } else { l })
            .collect()
    }

    /// Chain start: a stored state w.p. `1 − δ`, else uniform in the init box.
    /// An empty buffer always yields a uniform draw.
    pub fn draw_start(&self, rng: &mut StreamRng) -> Vec<f64> {
        let reinit = rng.random::<f64>() < self.reinit_prob;
        if reinit || self.states.is_empty() {
            self.sample_uniform(rng)
        } else {
            let i = rng.random_range(0..self.states.len());
            self.states[i].clone()
        }
    }

    pub fn clamp(&self, state: &mut [f64]) {
        for ((v, &l), &h) in state.iter_mut().zip(&self.low).zip(&self.high) {
            *v = v.clamp(l, h);
        }
    }
}
