//! Named exact scenarios with their closed-form counterparts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::fock::{ModeId, PhaseLedger};
use crate::loss::{damp_all_exact, BranchMixture, NoiseParams};
use crate::optics::{detect_ensemble_exact, RotationSpec};
use crate::protocol::exact::{connect_exact, run_ladder_exact, ExactBlock, LevelSummary};
use crate::protocol::{pair_state, ProtocolError};

/// Largest register the oracle enumerates.
pub const ORACLE_MAX_ENSEMBLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// One pair through loss, one end measured.
    Pair,
    /// First-level connection of two pairs.
    StepI,
    /// Second-level connection of two four-ensemble blocks.
    StepIi,
    /// Full ladder plus loop closure.
    Closure,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [Scenario::Pair, Scenario::StepI, Scenario::StepIi, Scenario::Closure];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Pair => "pair",
            Scenario::StepI => "step-i",
            Scenario::StepIi => "step-ii",
            Scenario::Closure => "closure",
        }
    }

    fn min_ensembles(self) -> usize {
        match self {
            Scenario::Pair => 2,
            Scenario::StepI | Scenario::Closure => 4,
            Scenario::StepIi => 8,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scenario {0:?}; expected one of pair, step-i, step-ii, closure")]
pub struct UnknownScenario(pub String);

impl FromStr for Scenario {
    type Err = UnknownScenario;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scenario::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| UnknownScenario(s.to_string()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub scenario: Scenario,
    pub n: usize,
    pub eta: f64,
    pub acceptance: f64,
    pub analytic_acceptance: f64,
    pub vacuum_weight: f64,
    pub analytic_vacuum_weight: f64,
    pub fidelity: f64,
    /// What `fidelity` is measured against.
    pub fidelity_target: String,
    pub levels: Vec<LevelSummary>,
    pub posterior: Option<BranchMixture>,
}

fn level_block(ledger: &PhaseLedger, noise: NoiseParams, first: usize) -> Result<ExactBlock, ProtocolError> {
    let l = ExactBlock::pair(ledger, first)?;
    let r = ExactBlock::pair(ledger, first + 2)?;
    connect_exact(&l, &r, ledger, noise)?
        .block
        .ok_or_else(|| ProtocolError::Config("first-level connection cannot succeed".into()))
}

/// Evaluates `scenario` exactly on `n` ensembles with zero channel phases.
pub fn run_oracle(scenario: Scenario, n: usize, eta: f64) -> Result<OracleReport, ProtocolError> {
    if n > ORACLE_MAX_ENSEMBLES || n < scenario.min_ensembles() {
        return Err(ProtocolError::Config(format!(
            "scenario {scenario} needs {} ≤ n ≤ {ORACLE_MAX_ENSEMBLES}, got {n}",
            scenario.min_ensembles()
        )));
    }
    let noise = NoiseParams::new(eta)?;
    let ledger = PhaseLedger::zero(n);
    let vac = |c: f64| c / (1.0 + c);
    let report = match scenario {
        Scenario::Pair => {
            let pair = pair_state(n, 1, 2, 0.0)?;
            let damped = damp_all_exact(&pair, &[ModeId::h(1), ModeId::v(2)], noise)?;
            let detections =
                detect_ensemble_exact(&BranchMixture::pure(pair.clone())?, 2, RotationSpec::hadamard(), noise)?;
            let acceptance = detections
                .iter()
                .filter(|d| d.outcome.accepted())
                .map(|d| d.probability)
                .sum();
            let block = ExactBlock {
                first: 1,
                last: 2,
                mixture: damped,
            };
            OracleReport {
                scenario,
                n,
                eta,
                acceptance,
                analytic_acceptance: (1.0 - eta) / 2.0,
                vacuum_weight: block.vacuum_weight(),
                analytic_vacuum_weight: eta,
                fidelity: block.fidelity(&ledger)?,
                fidelity_target: "pair (1,2)".into(),
                levels: Vec::new(),
                posterior: Some(block.mixture),
            }
        }
        Scenario::StepI => {
            let l = ExactBlock::pair(&ledger, 1)?;
            let r = ExactBlock::pair(&ledger, 3)?;
            let c = connect_exact(&l, &r, &ledger, noise)?;
            let block = c
                .block
                .ok_or_else(|| ProtocolError::Config("first-level connection cannot succeed".into()))?;
            OracleReport {
                scenario,
                n,
                eta,
                acceptance: c.acceptance,
                analytic_acceptance: analytics::p_connect(1, eta)?,
                vacuum_weight: block.vacuum_weight(),
                analytic_vacuum_weight: vac(analytics::vacuum_coeff(1, eta)),
                fidelity: block.fidelity(&ledger)?,
                fidelity_target: "block 1..=4".into(),
                levels: Vec::new(),
                posterior: Some(block.mixture),
            }
        }
        Scenario::StepIi => {
            let l = level_block(&ledger, noise, 1)?;
            let r = level_block(&ledger, noise, 5)?;
            let c = connect_exact(&l, &r, &ledger, noise)?;
            let block = c
                .block
                .ok_or_else(|| ProtocolError::Config("second-level connection cannot succeed".into()))?;
            OracleReport {
                scenario,
                n,
                eta,
                acceptance: c.acceptance,
                analytic_acceptance: analytics::p_connect(2, eta)?,
                vacuum_weight: block.vacuum_weight(),
                analytic_vacuum_weight: vac(analytics::vacuum_coeff(2, eta)),
                fidelity: block.fidelity(&ledger)?,
                fidelity_target: "block 1..=8".into(),
                levels: Vec::new(),
                posterior: Some(block.mixture),
            }
        }
        Scenario::Closure => {
            let depth = analytics::ladder_depth(n)?;
            let ladder = run_ladder_exact(&ledger, noise)?;
            OracleReport {
                scenario,
                n,
                eta,
                acceptance: ladder.closure_acceptance,
                analytic_acceptance: analytics::p_close(depth, eta)?,
                vacuum_weight: 0.0,
                analytic_vacuum_weight: 0.0,
                fidelity: ladder.ghz_fidelity,
                fidelity_target: format!("GHZ over {n} ensembles, phase 0"),
                levels: ladder.levels,
                posterior: None,
            }
        }
    };
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn scenario_names_round_trip() {
        for s in Scenario::ALL {
            assert_eq!(s.name().parse::<Scenario>().unwrap(), s);
            assert_eq!(serde_json::to_string(&s).unwrap(), format!("\"{}\"", s.name()));
        }
        assert!("step-iii".parse::<Scenario>().is_err());
    }

    #[test]
    fn step_i_example() {
        let r = run_oracle(Scenario::StepI, 4, 0.2).unwrap();
        assert_abs_diff_eq!(r.acceptance, 0.224, epsilon = 1e-12);
        assert_abs_diff_eq!(r.vacuum_weight, 0.4 / 1.4, epsilon = 1e-12);
        let r0 = run_oracle(Scenario::StepI, 4, 0.0).unwrap();
        assert_abs_diff_eq!(r0.vacuum_weight, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pair_and_closure() {
        let p = run_oracle(Scenario::Pair, 2, 0.3).unwrap();
        assert_abs_diff_eq!(p.acceptance, p.analytic_acceptance, epsilon = 1e-14);
        assert_abs_diff_eq!(p.vacuum_weight, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(p.fidelity, 0.7, epsilon = 1e-14);
        let c = run_oracle(Scenario::Closure, 4, 0.0).unwrap();
        assert_abs_diff_eq!(c.fidelity, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.acceptance, 0.5, epsilon = 1e-14);
    }

    #[test]
    fn size_limits() {
        assert!(run_oracle(Scenario::StepIi, 4, 0.1).is_err());
        assert!(run_oracle(Scenario::Pair, 9, 0.1).is_err());
        assert!(run_oracle(Scenario::Closure, 6, 0.1).is_err());
    }
}
