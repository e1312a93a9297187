use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::autodiff::Activation;
use crate::{Error, Result};

/// Langevin sampler settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgldConfig {
    /// Step size α on the energy gradient.
    pub step_size: f64,
    /// Noise coefficient σ. Kept independent of α.
    pub noise: f64,
    /// Steps per chain (ι).
    pub chain_length: usize,
    /// Clamp chain states into the buffer's initialization box after each step.
    pub clamp_to_init_range: bool,
}

impl Default for SgldConfig {
    fn default() -> Self {
        Self {
            step_size: 0.01,
            noise: 0.01,
            chain_length: 20,
            clamp_to_init_range: false,
        }
    }
}

impl SgldConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !(self.noise >= 0.0) || self.chain_length == 0 {
            return Err(Error::Config(format!(
                "SGLD needs α > 0, σ ≥ 0 and ι ≥ 1 (got α = {}, σ = {}, ι = {})",
                self.step_size, self.noise, self.chain_length
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Edm,
    Bc,
    Rcal,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Edm => "edm",
            Algorithm::Bc => "bc",
            Algorithm::Rcal => "rcal",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "edm" => Ok(Algorithm::Edm),
            "bc" => Ok(Algorithm::Bc),
            "rcal" => Ok(Algorithm::Rcal),
            other => Err(Error::Config(format!("unknown algorithm `{other}`"))),
        }
    }
}

/// Source of negative-phase states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NegativePhase {
    /// Langevin chains from a persistent buffer.
    Sgld,
    /// Exact expectation over a finite feature set.
    Exact,
}

impl fmt::Display for NegativePhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NegativePhase::Sgld => "sgld",
            NegativePhase::Exact => "exact",
        })
    }
}

impl FromStr for NegativePhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgld" => Ok(NegativePhase::Sgld),
            "exact" => Ok(NegativePhase::Exact),
            other => Err(Error::Config(format!("unknown negative phase `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// RCAL sparsity coefficient λ.
    pub rcal_lambda: f64,
    pub negative_phase: NegativePhase,
    /// Weight on `L̂_ρ`; 0 drops the term from the objective altogether.
    pub occupancy_weight: f64,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// Iterations between log records (and exact-KL diagnostics).
    pub log_interval: usize,
    /// Iterations between checkpoint callbacks; 0 disables them.
    pub checkpoint_interval: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 64,
            iterations: 10_000,
            learning_rate: 1e-3,
            seed: 0,
            algorithm: Algorithm::Edm,
            rcal_lambda: 1e-2,
            negative_phase: NegativePhase::Sgld,
            occupancy_weight: 1.0,
            hidden: vec![64, 64],
            activation: Activation::Elu,
            log_interval: 100,
            checkpoint_interval: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.iterations == 0 {
            return Err(Error::Config(
                "batch size and iteration count must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.rcal_lambda >= 0.0) || !(self.occupancy_weight >= 0.0) {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        if self.log_interval == 0 {
            return Err(Error::Config("log interval must be at least 1".into()));
        }
        Ok(())
    }
}
