use std::f64::consts::TAU;

use rand::Rng;

use crate::fock::{next_ensemble, PhaseLedger};

use super::{PhaseMode, ProtocolError};

/// Channel phases for the `n` ring links `(i, i+1)`.
///
/// Mirrored assignment pairs link `i` with link `n+1−i` (ensembles
/// `i' = n+2−i` sit next to `i`) and sets `φ_{i,i+1} = −φ_{(i+1)',i'}`, so
/// the ring total cancels.
pub fn assign_phases<R: Rng + ?Sized>(mode: PhaseMode, n: usize, rng: &mut R) -> Result<PhaseLedger, ProtocolError> {
    let mut ledger = PhaseLedger::zero(n);
    match mode {
        PhaseMode::Zero => {}
        PhaseMode::Random => {
            for i in 1..=n {
                ledger.set(i, next_ensemble(i, n), rng.random::<f64>() * TAU);
            }
        }
        PhaseMode::Mirrored => {
            if !n.is_multiple_of(2) {
                return Err(ProtocolError::Config(format!(
                    "mirrored phases need an even number of ensembles, got {n}"
                )));
            }
            for i in 1..=n / 2 {
                let phi = rng.random::<f64>() * TAU;
                let partner = n + 1 - i;
                ledger.set(i, i + 1, phi);
                ledger.set(partner, next_ensemble(partner, n), -phi);
            }
        }
    }
    Ok(ledger)
}
