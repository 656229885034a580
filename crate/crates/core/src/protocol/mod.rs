//! Entanglement-generation protocols on a ring of ensembles.
//!
//! Ensemble `i` is linked to `i+1` (cyclically) by a heralded pair
//! `(h_i† + e^{iφ} v_{i+1}†)|vac⟩/√2`. The basic scheme postselects the whole
//! chain at once; the improved scheme connects blocks pairwise in a ladder
//! and closes the ring at the end.

#[cfg(test)]
mod checks;
mod config;
pub mod engine;
pub mod exact;
mod phases;
pub mod runner;

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use thiserror::Error;

use crate::analytics::AnalyticsError;
use crate::fock::{next_ensemble, FockError, ModeId, OccupationKey, PhaseLedger, SparseState};
use crate::loss::InvalidLoss;

pub use config::{
    Engine, PhaseMode, PrepParams, PrepSchedule, ProtocolConfig, RestartMode, Scheme, DEFAULT_MAX_PAIR_PREPS,
    MICROSCOPIC_MAX_ENSEMBLES,
};
pub use phases::assign_phases;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("state-vector engine supports at most {max} ensembles, got {n}; use the abstract engine")]
    Guard { n: usize, max: usize },
    #[error("safety cap of {cap} pair preparations reached")]
    SafetyCap { cap: u64 },
    #[error(transparent)]
    Fock(#[from] FockError),
    #[error(transparent)]
    Analytics(#[from] AnalyticsError),
    #[error(transparent)]
    Loss(#[from] InvalidLoss),
}

/// `(h_i† + e^{iφ} v_j†)|vac⟩/√2` on a register of `n` ensembles.
pub fn pair_state(n: usize, i: usize, j: usize, phi: f64) -> Result<SparseState, ProtocolError> {
    ModeId::h(i).checked_index(2 * n)?;
    ModeId::v(j).checked_index(2 * n)?;
    Ok(SparseState::from_entries(
        2 * n,
        [
            (
                OccupationKey::VACUUM.with_ensemble_counts(i, 1, 0),
                Complex64::new(FRAC_1_SQRT_2, 0.0),
            ),
            (
                OccupationKey::VACUUM.with_ensemble_counts(j, 0, 1),
                Complex64::from_polar(FRAC_1_SQRT_2, phi),
            ),
        ],
    )?)
}

/// Product of all `n` ring pairs with the ledger's phases.
pub fn chain_state(ledger: &PhaseLedger) -> Result<SparseState, ProtocolError> {
    let n = ledger.ensemble_count();
    let mut state = SparseState::vacuum(n)?;
    for i in 1..=n {
        let j = next_ensemble(i, n);
        state = state.tensor(&pair_state(n, i, j, ledger.phase(i, j))?)?;
    }
    Ok(state)
}

/// Ideal block over `first..=last`:
/// `(Π_{k<last} h_k† + e^{iφ} Π_{k>first} v_k†)|vac⟩/√2`.
pub fn block_reference(n: usize, first: usize, last: usize, phi: f64) -> Result<SparseState, ProtocolError> {
    if !(1 <= first && first < last && last <= n) {
        return Err(ProtocolError::Config(format!(
            "invalid block {first}..={last} on {n} ensembles"
        )));
    }
    let mut h_term = OccupationKey::VACUUM;
    let mut v_term = OccupationKey::VACUUM;
    for k in first..last {
        h_term = h_term.with(ModeId::h(k).index(), 1);
        v_term = v_term.with(ModeId::v(k + 1).index(), 1);
    }
    Ok(SparseState::from_entries(
        2 * n,
        [
            (h_term, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (v_term, Complex64::from_polar(FRAC_1_SQRT_2, phi)),
        ],
    )?)
}

/// Sum of the ledger phases along `first → last`.
pub fn block_phase(ledger: &PhaseLedger, first: usize, last: usize) -> f64 {
    (first..last).map(|k| ledger.phase(k, k + 1)).sum()
}
