//! Exact (branch-enumerating) evaluation of the protocol steps.
//!
//! Connections use [`Acceptance::Effective`]: the boundary ensembles are
//! projected onto one excitation each, so posteriors stay in the original
//! frame and can be compared with [`block_reference`] directly.

use serde::Serialize;

use crate::fock::{ghz_reference, PhaseLedger, SparseState};
use crate::loss::{BranchMixture, NoiseParams};
use crate::optics::{postselect_all, Acceptance, RotationSpec};

use super::{block_phase, block_reference, chain_state, pair_state, ProtocolError};

type Result<T> = std::result::Result<T, ProtocolError>;

/// A contiguous block `first..=last` of a ring of `n` ensembles.
#[derive(Debug, Clone)]
pub struct ExactBlock {
    pub first: usize,
    pub last: usize,
    pub mixture: BranchMixture,
}

impl ExactBlock {
    /// Level-0 block: the ring pair `(first, first+1)`.
    pub fn pair(ledger: &PhaseLedger, first: usize) -> Result<Self> {
        let n = ledger.ensemble_count();
        let state = pair_state(n, first, first + 1, ledger.phase(first, first + 1))?;
        Ok(Self {
            first,
            last: first + 1,
            mixture: BranchMixture::pure(state)?,
        })
    }

    pub fn ensemble_count(&self) -> usize {
        self.mixture.mode_count() / 2
    }

    /// Probability that both end ensembles hold no excitation.
    pub fn vacuum_weight(&self) -> f64 {
        let (first, last) = (self.first, self.last);
        self.mixture.probability_where(|k| {
            let (a, b) = k.ensemble_counts(first);
            let (c, d) = k.ensemble_counts(last);
            a + b + c + d == 0
        })
    }

    /// Fidelity with the ideal block carrying the ledger's phases.
    pub fn fidelity(&self, ledger: &PhaseLedger) -> Result<f64> {
        let reference = block_reference(
            self.ensemble_count(),
            self.first,
            self.last,
            block_phase(ledger, self.first, self.last),
        )?;
        Ok(self.mixture.fidelity_to(&reference)?)
    }
}

#[derive(Debug, Clone)]
pub struct ExactConnection {
    pub acceptance: f64,
    pub block: Option<ExactBlock>,
}

fn boundary_postselect(
    mixture: &BranchMixture,
    ensembles: [usize; 2],
    noise: NoiseParams,
) -> Result<(f64, Option<BranchMixture>)> {
    let specs = [RotationSpec::hadamard(); 2];
    let r = postselect_all(mixture, &ensembles, &specs, noise, Acceptance::Effective)?;
    Ok((r.success_probability, r.posterior))
}

/// Joins two adjacent blocks with the linking pair `(left.last, right.first)`
/// and postselects one click on each of those two ensembles.
pub fn connect_exact(
    left: &ExactBlock,
    right: &ExactBlock,
    ledger: &PhaseLedger,
    noise: NoiseParams,
) -> Result<ExactConnection> {
    if left.last + 1 != right.first {
        return Err(ProtocolError::Config(format!(
            "blocks {}..={} and {}..={} are not adjacent",
            left.first, left.last, right.first, right.last
        )));
    }
    let n = left.ensemble_count();
    let link = pair_state(n, left.last, right.first, ledger.phase(left.last, right.first))?;
    let joint = left.mixture.tensor(&right.mixture)?.tensor_pure(&link)?;
    let (acceptance, posterior) = boundary_postselect(&joint, [left.last, right.first], noise)?;
    Ok(ExactConnection {
        acceptance,
        block: posterior.map(|mixture| ExactBlock {
            first: left.first,
            last: right.last,
            mixture,
        }),
    })
}

#[derive(Debug, Clone)]
pub struct ExactClosure {
    pub acceptance: f64,
    pub posterior: Option<BranchMixture>,
}

/// Closes a block spanning the whole ring with the pair `(n, 1)`.
pub fn close_exact(block: &ExactBlock, ledger: &PhaseLedger, noise: NoiseParams) -> Result<ExactClosure> {
    let n = block.ensemble_count();
    if block.first != 1 || block.last != n {
        return Err(ProtocolError::Config(format!(
            "closure needs a block over 1..={n}, got {}..={}",
            block.first, block.last
        )));
    }
    let link = pair_state(n, n, 1, ledger.phase(n, 1))?;
    let joint = block.mixture.tensor_pure(&link)?;
    let (acceptance, posterior) = boundary_postselect(&joint, [n, 1], noise)?;
    Ok(ExactClosure { acceptance, posterior })
}

#[derive(Debug, Clone, Serialize)]
pub struct LevelSummary {
    pub level: u32,
    pub acceptance: f64,
    pub vacuum_weight: f64,
    pub block_fidelity: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactLadder {
    pub n: usize,
    pub levels: Vec<LevelSummary>,
    pub closure_acceptance: f64,
    /// Product of the acceptances of every connection and the closure.
    pub path_acceptance: f64,
    pub ghz_fidelity: f64,
    /// Effective state after a successful closure.
    #[serde(skip)]
    pub posterior: Option<BranchMixture>,
}

/// Runs the whole ladder on `n = 2^{i+1}` ensembles, recording one
/// connection per level (all connections of a level are equivalent).
pub fn run_ladder_exact(ledger: &PhaseLedger, noise: NoiseParams) -> Result<ExactLadder> {
    let n = ledger.ensemble_count();
    crate::analytics::ladder_depth(n)?;
    let mut blocks = (0..n / 2)
        .map(|k| ExactBlock::pair(ledger, 2 * k + 1))
        .collect::<Result<Vec<_>>>()?;
    let mut levels = Vec::new();
    let mut path_acceptance = 1.0;
    let mut level = 0;
    while blocks.len() > 1 {
        level += 1;
        let mut next = Vec::with_capacity(blocks.len() / 2);
        let mut first_acceptance = None;
        for chunk in blocks.chunks(2) {
            let c = connect_exact(&chunk[0], &chunk[1], ledger, noise)?;
            first_acceptance.get_or_insert(c.acceptance);
            path_acceptance *= c.acceptance;
            match c.block {
                Some(b) => next.push(b),
                None => {
                    return Err(ProtocolError::Config(format!(
                        "level {level} connection cannot succeed"
                    )))
                }
            }
        }
        let acceptance = first_acceptance.unwrap_or(0.0);
        levels.push(LevelSummary {
            level,
            acceptance,
            vacuum_weight: next[0].vacuum_weight(),
            block_fidelity: next[0].fidelity(ledger)?,
        });
        blocks = next;
    }
    let closure = close_exact(&blocks[0], ledger, noise)?;
    path_acceptance *= closure.acceptance;
    let ghz = ghz_reference(n, ledger.total_phase())?;
    let ghz_fidelity = match &closure.posterior {
        Some(m) => m.fidelity_to(&ghz)?,
        None => 0.0,
    };
    Ok(ExactLadder {
        n,
        levels,
        closure_acceptance: closure.acceptance,
        path_acceptance,
        ghz_fidelity,
        posterior: closure.posterior,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExactBasic {
    pub n: usize,
    pub acceptance: f64,
    pub ghz_fidelity: f64,
}

/// Postselects the full chain on one click per ensemble.
pub fn run_basic_exact(ledger: &PhaseLedger, noise: NoiseParams) -> Result<ExactBasic> {
    let n = ledger.ensemble_count();
    let chain = BranchMixture::pure(chain_state(ledger)?)?;
    let ensembles: Vec<usize> = (1..=n).collect();
    let specs = vec![RotationSpec::hadamard(); n];
    let r = postselect_all(&chain, &ensembles, &specs, noise, Acceptance::Effective)?;
    let ghz = ghz_reference(n, ledger.total_phase())?;
    let ghz_fidelity = match &r.posterior {
        Some(m) => m.fidelity_to(&ghz)?,
        None => 0.0,
    };
    Ok(ExactBasic {
        n,
        acceptance: r.success_probability,
        ghz_fidelity,
    })
}

/// State of the lossless ideal block, for reference output.
pub fn ideal_block(ledger: &PhaseLedger, first: usize, last: usize) -> Result<SparseState> {
    block_reference(ledger.ensemble_count(), first, last, block_phase(ledger, first, last))
}
