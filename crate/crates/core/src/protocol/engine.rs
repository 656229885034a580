//! Sampled trials of the basic and improved schemes.
//!
//! Time model: pair preparations take a geometric number of pulses at the
//! repetition rate. Sibling blocks are built side by side, so a connection
//! attempt costs the slower of its two sub-blocks; the linking pair is
//! prepared alongside and adds pulses but no time. Measurements and
//! connections are instantaneous. With [`PrepSchedule::Sequential`] every
//! preparation, links included, is added instead.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::fock::{PhaseLedger, Polarization, SparseState};
use crate::loss::NoiseParams;
use crate::optics::{detect_ensemble_sample, ClickOutcome, RotationSpec};

use super::{
    assign_phases, chain_state, pair_state, Engine, PrepParams, PrepSchedule, ProtocolConfig, ProtocolError,
    RestartMode, Scheme,
};

type Result<T> = std::result::Result<T, ProtocolError>;

/// Step label of the level-`i` connection.
pub fn connect_label(level: u32) -> String {
    format!("connect_{level}")
}

pub const CLOSE_LABEL: &str = "close";
pub const CHAIN_LABEL: &str = "chain";

#[derive(Debug, Clone)]
pub struct PairPrep {
    pub state: SparseState,
    pub pulses: u64,
    pub elapsed: f64,
}

fn geometric(prep: &PrepParams) -> Result<Geometric> {
    Geometric::new(prep.p0()).map_err(|e| ProtocolError::Config(format!("p0: {e}")))
}

/// Heralded pair `(i, j)` on a register of `ledger.ensemble_count()`
/// ensembles, with the sampled pulse count it took.
pub fn prepare_pair<R: Rng + ?Sized>(
    i: usize,
    j: usize,
    ledger: &PhaseLedger,
    prep: &PrepParams,
    rng: &mut R,
) -> Result<PairPrep> {
    if i == j {
        return Err(ProtocolError::Config(format!(
            "pair needs two ensembles, got ({i}, {j})"
        )));
    }
    let state = pair_state(ledger.ensemble_count(), i, j, ledger.phase(i, j))?;
    let pulses = geometric(prep)?.sample(rng) + 1;
    Ok(PairPrep {
        state,
        pulses,
        elapsed: pulses as f64 / prep.f_p(),
    })
}

#[derive(Debug, Clone)]
pub struct ChainBuild {
    pub state: SparseState,
    pub pulses: u64,
    pub elapsed: f64,
}

/// All `n` ring pairs, combined according to the preparation schedule.
pub fn build_chain<R: Rng + ?Sized>(config: &ProtocolConfig, ledger: &PhaseLedger, rng: &mut R) -> Result<ChainBuild> {
    if config.engine != Engine::Microscopic {
        return Err(ProtocolError::Config(
            "chain states need the state-vector engine".into(),
        ));
    }
    config.validate()?;
    let n = config.n;
    let dist = geometric(&config.prep)?;
    let mut pulses = 0;
    let mut elapsed = 0.0f64;
    for _ in 0..n {
        let p = dist.sample(rng) + 1;
        pulses += p;
        elapsed = combine(config.schedule, elapsed, p as f64 / config.prep.f_p());
    }
    Ok(ChainBuild {
        state: chain_state(ledger)?,
        pulses,
        elapsed,
    })
}

fn combine(schedule: PrepSchedule, a: f64, b: f64) -> f64 {
    match schedule {
        PrepSchedule::Parallel => a.max(b),
        PrepSchedule::Sequential => a + b,
    }
}

/// A connected block `first..=last` as seen by a sampled trial.
#[derive(Debug, Clone)]
pub struct Block {
    pub first: usize,
    pub last: usize,
    /// `None` in the abstract engine.
    pub state: Option<SparseState>,
    /// Pending Z correction on the block: the ideal state is
    /// `(h_first … + (−1)^z e^{iφ} … v_last)/√2`.
    pub z_frame: bool,
    pub outcomes: Vec<ClickOutcome>,
}

impl Block {
    pub fn pair(first: usize, state: Option<SparseState>) -> Self {
        Self {
            first,
            last: first + 1,
            state,
            z_frame: false,
            outcomes: Vec::new(),
        }
    }
}

fn v_parity(outcomes: &[ClickOutcome]) -> bool {
    outcomes
        .iter()
        .filter(|o| o.polarization_bit() == Some(Polarization::V))
        .count()
        % 2
        == 1
}

/// Measures two ensembles in the Hadamard basis; stops at the first
/// rejected click.
fn measure_pair<R: Rng + ?Sized>(
    state: &SparseState,
    ensembles: [usize; 2],
    noise: NoiseParams,
    rng: &mut R,
) -> Result<(bool, Vec<ClickOutcome>, SparseState)> {
    let mut current = state.clone();
    let mut outcomes = Vec::with_capacity(2);
    for e in ensembles {
        let (o, next) = detect_ensemble_sample(&current, e, RotationSpec::hadamard(), noise, rng)?;
        outcomes.push(o);
        current = next;
        if !o.accepted() {
            return Ok((false, outcomes, current));
        }
    }
    Ok((true, outcomes, current))
}

#[derive(Debug, Clone)]
pub struct Connection {
    pub outcomes: Vec<ClickOutcome>,
    pub block: Option<Block>,
}

/// Joins two adjacent state-vector blocks through the linking pair `link`
/// on `(left.last, right.first)`.
pub fn connect<R: Rng + ?Sized>(
    left: &Block,
    right: &Block,
    link: &SparseState,
    noise: NoiseParams,
    rng: &mut R,
) -> Result<Connection> {
    let (Some(ls), Some(rs)) = (&left.state, &right.state) else {
        return Err(ProtocolError::Config("connect needs state-vector blocks".into()));
    };
    if left.last + 1 != right.first {
        return Err(ProtocolError::Config(format!(
            "blocks {}..={} and {}..={} are not adjacent",
            left.first, left.last, right.first, right.last
        )));
    }
    let joint = ls.tensor(rs)?.tensor(link)?;
    let (ok, outcomes, state) = measure_pair(&joint, [left.last, right.first], noise, rng)?;
    let block = ok.then(|| {
        let mut all = left.outcomes.clone();
        all.extend_from_slice(&right.outcomes);
        all.extend_from_slice(&outcomes);
        Block {
            first: left.first,
            last: right.last,
            state: Some(state),
            z_frame: left.z_frame ^ right.z_frame ^ v_parity(&outcomes),
            outcomes: all,
        }
    });
    Ok(Connection { outcomes, block })
}

#[derive(Debug, Clone)]
pub struct Closure {
    pub success: bool,
    pub outcomes: Vec<ClickOutcome>,
    pub state: SparseState,
}

/// Closes a state-vector block over `1..=n` with the pair `link` on `(n, 1)`.
pub fn close_loop<R: Rng + ?Sized>(
    block: &Block,
    link: &SparseState,
    noise: NoiseParams,
    rng: &mut R,
) -> Result<Closure> {
    let Some(state) = &block.state else {
        return Err(ProtocolError::Config("close_loop needs a state-vector block".into()));
    };
    let n = state.ensemble_count();
    if block.first != 1 || block.last != n {
        return Err(ProtocolError::Config(format!(
            "closure needs a block over 1..={n}, got {}..={}",
            block.first, block.last
        )));
    }
    let joint = state.tensor(link)?;
    let (success, outcomes, state) = measure_pair(&joint, [n, 1], noise, rng)?;
    Ok(Closure {
        success,
        outcomes,
        state,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepCount {
    pub attempts: u64,
    pub successes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Success,
    SafetyCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub status: TrialStatus,
    pub pair_preps: u64,
    pub pulses: u64,
    pub steps: BTreeMap<String, StepCount>,
    /// Seconds until the final state was heralded (or the cap was hit).
    pub wall_time: f64,
    /// Outcome per ensemble `1..=n`; empty in the abstract engine.
    pub final_polarization_bits: Vec<Option<Polarization>>,
}

impl TrialRecord {
    pub fn success(&self) -> bool {
        self.status == TrialStatus::Success
    }

    /// Parity of V outcomes over all ensembles, when every bit is known.
    pub fn v_parity(&self) -> Option<bool> {
        if self.final_polarization_bits.is_empty() {
            return None;
        }
        let mut odd = false;
        for b in &self.final_polarization_bits {
            odd ^= (*b)? == Polarization::V;
        }
        Some(odd)
    }
}

struct Trial<'a, R: Rng + ?Sized> {
    cfg: &'a ProtocolConfig,
    ledger: PhaseLedger,
    dist: Geometric,
    rng: &'a mut R,
    pair_preps: u64,
    pulses: u64,
    steps: BTreeMap<String, StepCount>,
    time: f64,
}

impl<R: Rng + ?Sized> Trial<'_, R> {
    fn micro(&self) -> bool {
        self.cfg.engine == Engine::Microscopic
    }

    /// Samples one pair preparation; returns its duration.
    fn draw_pair(&mut self) -> Result<f64> {
        if self.pair_preps >= self.cfg.max_pair_preps {
            return Err(ProtocolError::SafetyCap {
                cap: self.cfg.max_pair_preps,
            });
        }
        let p = self.dist.sample(self.rng) + 1;
        self.pair_preps += 1;
        self.pulses += p;
        Ok(p as f64 / self.cfg.prep.f_p())
    }

    fn pair(&mut self, i: usize, j: usize) -> Result<(Option<SparseState>, f64)> {
        let t = self.draw_pair()?;
        let state = if self.micro() {
            Some(pair_state(self.cfg.n, i, j, self.ledger.phase(i, j))?)
        } else {
            None
        };
        Ok((state, t))
    }

    fn record(&mut self, label: &str, success: bool) {
        let s = self.steps.entry(label.to_string()).or_default();
        s.attempts += 1;
        s.successes += u64::from(success);
    }

    fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.random::<f64>() < p
    }

    /// Builds a level-`level` block starting at `first`; returns it with the
    /// time it took.
    fn build(&mut self, level: u32, first: usize) -> Result<(Block, f64)> {
        if level == 0 {
            let (state, t) = self.pair(first, first + 1)?;
            return Ok((Block::pair(first, state), t));
        }
        let label = connect_label(level);
        let offset = 1usize << level;
        let p = analytics::p_connect(level, self.cfg.eta())?;
        let mut kept: Option<Block> = None;
        let mut total = 0.0;
        loop {
            let (left, tl) = match kept.take() {
                Some(b) => (b, 0.0),
                None => self.build(level - 1, first)?,
            };
            let (right, tr) = self.build(level - 1, first + offset)?;
            let (link, t_link) = self.pair(left.last, right.first)?;
            total += match self.cfg.schedule {
                PrepSchedule::Parallel => tl.max(tr),
                PrepSchedule::Sequential => tl + tr + t_link,
            };
            let joined = match link {
                Some(link) => connect(&left, &right, &link, self.cfg.noise, self.rng)?.block,
                None => self.bernoulli(p).then(|| Block {
                    first: left.first,
                    last: right.last,
                    state: None,
                    z_frame: false,
                    outcomes: Vec::new(),
                }),
            };
            self.record(&label, joined.is_some());
            if let Some(block) = joined {
                return Ok((block, total));
            }
            if self.cfg.restart_mode == RestartMode::LocalRetry {
                kept = Some(left);
            }
        }
    }

    fn improved(&mut self) -> Result<Vec<ClickOutcome>> {
        let depth = analytics::ladder_depth(self.cfg.n)?;
        let n = self.cfg.n;
        let p = analytics::p_close(depth, self.cfg.eta())?;
        loop {
            let (block, t) = self.build(depth, 1)?;
            let (link, t_link) = self.pair(n, 1)?;
            self.time += match self.cfg.schedule {
                PrepSchedule::Parallel => t,
                PrepSchedule::Sequential => t + t_link,
            };
            let closed = match link {
                Some(link) => {
                    let c = close_loop(&block, &link, self.cfg.noise, self.rng)?;
                    c.success.then(|| {
                        let mut all = block.outcomes;
                        all.extend(c.outcomes);
                        all
                    })
                }
                None => self.bernoulli(p).then(Vec::new),
            };
            self.record(CLOSE_LABEL, closed.is_some());
            if let Some(outcomes) = closed {
                return Ok(outcomes);
            }
        }
    }

    fn basic(&mut self) -> Result<Vec<ClickOutcome>> {
        let n = self.cfg.n;
        let p = analytics::basic_acceptance(n, self.cfg.eta())?;
        let chain = if self.micro() {
            Some(chain_state(&self.ledger)?)
        } else {
            None
        };
        loop {
            let mut elapsed = 0.0f64;
            for _ in 0..n {
                let t = self.draw_pair()?;
                elapsed = combine(self.cfg.schedule, elapsed, t);
            }
            self.time += elapsed;
            let accepted = match &chain {
                Some(state) => {
                    let mut current = state.clone();
                    let mut outcomes = Vec::with_capacity(n);
                    let mut ok = true;
                    for e in 1..=n {
                        let (o, next) =
                            detect_ensemble_sample(&current, e, RotationSpec::hadamard(), self.cfg.noise, self.rng)?;
                        outcomes.push(o);
                        current = next;
                        if !o.accepted() {
                            ok = false;
                            break;
                        }
                    }
                    ok.then_some(outcomes)
                }
                None => self.bernoulli(p).then(Vec::new),
            };
            self.record(CHAIN_LABEL, accepted.is_some());
            if let Some(outcomes) = accepted {
                return Ok(outcomes);
            }
        }
    }
}

fn bits_by_ensemble(n: usize, outcomes: &[ClickOutcome]) -> Vec<Option<Polarization>> {
    if outcomes.is_empty() {
        return Vec::new();
    }
    let mut bits = vec![None; n];
    for o in outcomes {
        bits[o.ensemble - 1] = o.polarization_bit();
    }
    bits
}

/// Runs one trial of the configured scheme until success or the safety cap.
pub fn run_trial<R: Rng + ?Sized>(config: &ProtocolConfig, trial: u64, rng: &mut R) -> Result<TrialRecord> {
    config.validate()?;
    let ledger = assign_phases(config.phase_mode, config.n, rng)?;
    let mut t = Trial {
        cfg: config,
        ledger,
        dist: geometric(&config.prep)?,
        rng,
        pair_preps: 0,
        pulses: 0,
        steps: BTreeMap::new(),
        time: 0.0,
    };
    let result = match config.scheme {
        Scheme::Basic => t.basic(),
        Scheme::Improved => t.improved(),
    };
    let (status, outcomes) = match result {
        Ok(o) => (TrialStatus::Success, o),
        Err(ProtocolError::SafetyCap { .. }) => (TrialStatus::SafetyCap, Vec::new()),
        Err(e) => return Err(e),
    };
    Ok(TrialRecord {
        trial,
        status,
        pair_preps: t.pair_preps,
        pulses: t.pulses,
        steps: t.steps,
        wall_time: t.time,
        final_polarization_bits: bits_by_ensemble(config.n, &outcomes),
    })
}

/// Basic scheme: the whole chain is rebuilt until every ensemble clicks once.
pub fn run_basic_trial<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<TrialRecord> {
    if config.scheme != Scheme::Basic {
        return Err(ProtocolError::Config("run_basic_trial needs the basic scheme".into()));
    }
    run_trial(config, 0, rng)
}

/// Improved scheme: ladder of pairwise connections, then loop closure.
pub fn run_improved_trial<R: Rng + ?Sized>(config: &ProtocolConfig, rng: &mut R) -> Result<TrialRecord> {
    if config.scheme != Scheme::Improved {
        return Err(ProtocolError::Config(
            "run_improved_trial needs the improved scheme".into(),
        ));
    }
    run_trial(config, 0, rng)
}
