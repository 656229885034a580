use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::loss::NoiseParams;

use super::ProtocolError;

/// Largest register the state-vector engine accepts.
pub const MICROSCOPIC_MAX_ENSEMBLES: usize = 10;
/// Default per-trial budget of heralded pair preparations.
pub const DEFAULT_MAX_PAIR_PREPS: u64 = 10_000_000;

/// Heralded pair source: success `p0` per pulse at repetition rate `f_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrepParams {
    p0: f64,
    f_p: f64,
}

impl PrepParams {
    pub fn new(p0: f64, f_p: f64) -> Result<Self, ProtocolError> {
        analytics::pair_time(p0, f_p)?;
        Ok(Self { p0, f_p })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn f_p(&self) -> f64 {
        self.f_p
    }

    /// Mean preparation time `1/(p0·f_p)`.
    pub fn t0(&self) -> f64 {
        1.0 / (self.p0 * self.f_p)
    }

    /// `1 − p0`; carried as metadata, the simulated pair is ideal.
    pub fn fidelity(&self) -> f64 {
        1.0 - self.p0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Basic,
    Improved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseMode {
    Zero,
    Random,
    Mirrored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Sparse state-vector trajectories with sampled loss and clicks.
    Microscopic,
    /// Bernoulli draws at the closed-form step probabilities.
    Abstract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RestartMode {
    /// A failed connection discards both sub-blocks; they are rebuilt from
    /// pairs.
    RestartAll,
    /// Idealized variant: a failed connection keeps the left sub-block and
    /// rebuilds only the right one. Ignores that the left boundary ensemble
    /// was consumed by the measurement.
    LocalRetry,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepSchedule {
    /// Independent factors are prepared at the same time.
    Parallel,
    /// Factors are prepared one after the other.
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub n: usize,
    pub noise: NoiseParams,
    pub prep: PrepParams,
    pub scheme: Scheme,
    pub phase_mode: PhaseMode,
    pub engine: Engine,
    pub restart_mode: RestartMode,
    pub schedule: PrepSchedule,
    pub max_pair_preps: u64,
}

impl ProtocolConfig {
    pub fn new(n: usize, eta: f64, p0: f64, f_p: f64, scheme: Scheme) -> Result<Self, ProtocolError> {
        let cfg = Self {
            n,
            noise: NoiseParams::new(eta)?,
            prep: PrepParams::new(p0, f_p)?,
            scheme,
            phase_mode: PhaseMode::Zero,
            engine: Engine::Microscopic,
            restart_mode: RestartMode::RestartAll,
            schedule: PrepSchedule::Parallel,
            max_pair_preps: DEFAULT_MAX_PAIR_PREPS,
        };
        cfg.validate_shape()?;
        Ok(cfg)
    }

    pub fn with_engine(mut self, engine: Engine) -> Self {
        self.engine = engine;
        self
    }

    pub fn with_phases(mut self, mode: PhaseMode) -> Self {
        self.phase_mode = mode;
        self
    }

    pub fn with_restart(mut self, mode: RestartMode) -> Self {
        self.restart_mode = mode;
        self
    }

    pub fn with_schedule(mut self, schedule: PrepSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_max_pair_preps(mut self, cap: u64) -> Self {
        self.max_pair_preps = cap;
        self
    }

    pub fn eta(&self) -> f64 {
        self.noise.eta()
    }

    /// Ladder depth for the improved scheme.
    pub fn depth(&self) -> Option<u32> {
        analytics::ladder_depth(self.n).ok()
    }

    /// Configuration errors first, then the state-size guard.
    pub fn validate(&self) -> Result<(), ProtocolError> {
        self.validate_shape()?;
        if self.engine == Engine::Microscopic && self.n > MICROSCOPIC_MAX_ENSEMBLES {
            return Err(ProtocolError::Guard {
                n: self.n,
                max: MICROSCOPIC_MAX_ENSEMBLES,
            });
        }
        Ok(())
    }

    /// Everything except the engine's state-size guard.
    fn validate_shape(&self) -> Result<(), ProtocolError> {
        if self.n < 2 {
            return Err(ProtocolError::Config(format!("need n ≥ 2 ensembles, got {}", self.n)));
        }
        if self.scheme == Scheme::Improved && self.depth().is_none() {
            return Err(ProtocolError::Config(format!(
                "improved scheme needs n = 2^(i+1) ≥ 4, got {}",
                self.n
            )));
        }
        if self.phase_mode == PhaseMode::Mirrored && !self.n.is_multiple_of(2) {
            return Err(ProtocolError::Config(format!(
                "mirrored phases need an even number of ensembles, got {}",
                self.n
            )));
        }
        if self.max_pair_preps == 0 {
            return Err(ProtocolError::Config("max_pair_preps must be positive".into()));
        }
        Ok(())
    }
}
