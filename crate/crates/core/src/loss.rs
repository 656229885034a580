//! Excitation loss with one lumped probability `η` per excitation.
//!
//! Each mode is an independent amplitude-damping channel. Losing `k` of `m`
//! photons has Kraus amplitude `√C(m,k)·(1−η)^{(m−k)/2}·η^{k/2}`. The exact
//! form enumerates these branches into a [`BranchMixture`]; the sampled form
//! draws one branch per call with the same probabilities.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fock::{FockError, ModeId, OccupationKey, Result, SparseState, CUTOFF};

/// Tolerance used when merging branches that hold the same state.
const MERGE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    eta: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("loss probability must lie in [0, 1), got {0}")]
pub struct InvalidLoss(pub f64);

impl NoiseParams {
    pub fn new(eta: f64) -> Result<Self, InvalidLoss> {
        if !(0.0..1.0).contains(&eta) {
            return Err(InvalidLoss(eta));
        }
        Ok(Self { eta })
    }

    pub fn lossless() -> Self {
        Self { eta: 0.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn is_lossless(&self) -> bool {
        self.eta == 0.0
    }
}

/// `√C(m,k)·(1−η)^{(m−k)/2}·η^{k/2}` for `k ≤ m ≤ CUTOFF`.
#[inline]
fn kraus_factor(m: u8, k: u8, eta: f64) -> f64 {
    let binom = match (m, k) {
        (_, 0) => 1.0,
        (2, 1) => 2.0,
        (m, k) if m == k => 1.0,
        _ => unreachable!("photon numbers are capped at {CUTOFF}"),
    };
    (binom * (1.0 - eta).powi((m - k) as i32) * eta.powi(k as i32)).sqrt()
}

fn apply_kraus(state: &SparseState, mode: usize, lost: u8, eta: f64) -> SparseState {
    let entries = state.iter().filter_map(|(k, a)| {
        let m = k.get(mode);
        (m >= lost).then(|| (k.with(mode, m - lost), a * kraus_factor(m, lost, eta)))
    });
    let map: BTreeMap<OccupationKey, Complex64> = entries.collect();
    SparseState::from_map_unchecked(state.mode_count(), map)
}

fn max_occupation(state: &SparseState, mode: usize) -> u8 {
    state.iter().map(|(k, _)| k.get(mode)).max().unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub weight: f64,
    pub state: SparseState,
}

/// Probability-weighted pure states; a mixed state in ensemble form.
///
/// Weights are positive and sum to one; each state is normalized. Branches
/// holding the same state up to a global phase are merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchMixture {
    branches: Vec<Branch>,
}

impl BranchMixture {
    pub fn pure(state: SparseState) -> Result<Self> {
        Ok(Self {
            branches: vec![Branch {
                weight: 1.0,
                state: state.normalize()?.canonical_phase(),
            }],
        })
    }

    /// Builds a mixture from unnormalized `(weight, state)` pairs, folding
    /// each state's norm into its weight. Returns the total weight before
    /// renormalization alongside the mixture.
    pub fn from_unnormalized<I>(mode_count: usize, parts: I) -> (f64, Option<Self>)
    where
        I: IntoIterator<Item = (f64, SparseState)>,
    {
        let mut branches = Vec::new();
        let mut total = 0.0;
        for (w, s) in parts {
            let n = s.norm_sqr();
            let weight = w * n;
            if weight <= 0.0 || s.is_empty() {
                continue;
            }
            total += weight;
            let state = s.scale(Complex64::new(1.0 / n.sqrt(), 0.0)).canonical_phase();
            branches.push(Branch { weight, state });
        }
        if branches.is_empty() {
            return (0.0, None);
        }
        for b in &mut branches {
            b.weight /= total;
        }
        let mut m = Self { branches };
        m.merge();
        debug_assert!(m.branches.iter().all(|b| b.state.mode_count() == mode_count));
        (total, Some(m))
    }

    fn merge(&mut self) {
        let mut merged: Vec<Branch> = Vec::with_capacity(self.branches.len());
        for b in self.branches.drain(..) {
            let same = merged.iter_mut().find(|m| {
                m.state.len() == b.state.len()
                    && m.state.iter().zip(b.state.iter()).all(|(x, y)| x.0 == y.0)
                    && m.state.approx_eq(&b.state, MERGE_TOLERANCE)
            });
            match same {
                Some(m) => m.weight += b.weight,
                None => merged.push(b),
            }
        }
        self.branches = merged;
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }

    pub fn mode_count(&self) -> usize {
        self.branches.first().map_or(0, |b| b.state.mode_count())
    }

    /// Product of two mixtures on disjoint modes of one register.
    pub fn tensor(&self, other: &BranchMixture) -> Result<Self> {
        let mut parts = Vec::with_capacity(self.len() * other.len());
        for a in &self.branches {
            for b in &other.branches {
                parts.push((a.weight * b.weight, a.state.tensor(&b.state)?));
            }
        }
        let (_, m) = Self::from_unnormalized(self.mode_count(), parts);
        m.ok_or(FockError::ZeroNorm)
    }

    pub fn tensor_pure(&self, state: &SparseState) -> Result<Self> {
        self.tensor(&BranchMixture::pure(state.clone())?)
    }

    /// `Σ_b w_b |⟨target|ψ_b⟩|²`.
    pub fn fidelity_to(&self, target: &SparseState) -> Result<f64> {
        let mut f = 0.0;
        for b in &self.branches {
            f += b.weight * b.state.inner_product(target)?.norm_sqr();
        }
        Ok(f)
    }

    /// Total probability carried by keys satisfying `pred`.
    pub fn probability_where<F>(&self, mut pred: F) -> f64
    where
        F: FnMut(OccupationKey) -> bool,
    {
        self.branches
            .iter()
            .map(|b| {
                b.weight
                    * b.state
                        .iter()
                        .filter(|(k, _)| pred(*k))
                        .map(|(_, a)| a.norm_sqr())
                        .sum::<f64>()
            })
            .sum()
    }

    /// Sparse density matrix `Σ w |ψ⟩⟨ψ|`, keyed by (row, column).
    pub fn density_matrix(&self) -> BTreeMap<(OccupationKey, OccupationKey), Complex64> {
        let mut rho = BTreeMap::new();
        for b in &self.branches {
            for (r, ar) in b.state.iter() {
                for (c, ac) in b.state.iter() {
                    *rho.entry((r, c)).or_insert_with(Complex64::default) += ar * ac.conj() * b.weight;
                }
            }
        }
        rho
    }

    /// Largest elementwise difference between the two density matrices.
    pub fn density_distance(&self, other: &BranchMixture) -> f64 {
        let a = self.density_matrix();
        let b = other.density_matrix();
        let mut d = 0.0_f64;
        for (k, x) in &a {
            d = d.max((x - b.get(k).copied().unwrap_or_default()).norm());
        }
        for (k, y) in &b {
            if !a.contains_key(k) {
                d = d.max(y.norm());
            }
        }
        d
    }

    /// Applies `f` to every branch state, keeping weights.
    pub fn map_states<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(&SparseState) -> Result<SparseState>,
    {
        let parts = self
            .branches
            .iter()
            .map(|b| Ok((b.weight, f(&b.state)?)))
            .collect::<Result<Vec<_>>>()?;
        let (_, m) = Self::from_unnormalized(self.mode_count(), parts);
        m.ok_or(FockError::ZeroNorm)
    }
}

/// Kraus branches of losing 0..=m photons from one mode.
pub fn damp_mode_exact(state: &SparseState, mode: ModeId, params: NoiseParams) -> Result<BranchMixture> {
    let m = mode.checked_index(state.mode_count())?;
    let parts = damp_mode_parts(state, m, params.eta);
    let (_, mixture) = BranchMixture::from_unnormalized(state.mode_count(), parts);
    mixture.ok_or(FockError::ZeroNorm)
}

fn damp_mode_parts(state: &SparseState, mode: usize, eta: f64) -> Vec<(f64, SparseState)> {
    if eta == 0.0 {
        return vec![(1.0, state.clone())];
    }
    (0..=max_occupation(state, mode))
        .map(|lost| (1.0, apply_kraus(state, mode, lost, eta)))
        .collect()
}

fn check_distinct(modes: &[ModeId], mode_count: usize) -> Result<Vec<usize>> {
    let mut seen = Vec::with_capacity(modes.len());
    for m in modes {
        let idx = m.checked_index(mode_count)?;
        if seen.contains(&idx) {
            return Err(FockError::DuplicateMode { mode: idx });
        }
        seen.push(idx);
    }
    Ok(seen)
}

/// Damps every listed mode; the composition of [`damp_mode_exact`].
pub fn damp_all_exact(state: &SparseState, modes: &[ModeId], params: NoiseParams) -> Result<BranchMixture> {
    damp_mixture_exact(&BranchMixture::pure(state.clone())?, modes, params)
}

pub fn damp_mixture_exact(mixture: &BranchMixture, modes: &[ModeId], params: NoiseParams) -> Result<BranchMixture> {
    let mode_count = mixture.mode_count();
    let indices = check_distinct(modes, mode_count)?;
    if params.is_lossless() {
        return Ok(mixture.clone());
    }
    let mut current = mixture.clone();
    for idx in indices {
        let parts = current.branches.iter().flat_map(|b| {
            damp_mode_parts(&b.state, idx, params.eta)
                .into_iter()
                .map(move |(_, d)| (b.weight, d))
        });
        let (_, m) = BranchMixture::from_unnormalized(mode_count, parts.collect::<Vec<_>>());
        current = m.ok_or(FockError::ZeroNorm)?;
    }
    Ok(current)
}

/// Photons lost per mode along one sampled trajectory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub lost_counts: BTreeMap<ModeId, u8>,
}

impl LossRecord {
    pub fn total(&self) -> u32 {
        self.lost_counts.values().map(|&c| c as u32).sum()
    }
}

#[derive(Debug, Clone)]
pub struct DampSample {
    pub state: SparseState,
    pub record: LossRecord,
    /// Product of the probabilities of the branches taken.
    pub path_weight: f64,
}

/// Draws one loss branch with its exact probability.
pub fn damp_sample<R: Rng + ?Sized>(
    state: &SparseState,
    modes: &[ModeId],
    params: NoiseParams,
    rng: &mut R,
) -> Result<DampSample> {
    let indices = check_distinct(modes, state.mode_count())?;
    let mut current = state.normalize()?;
    let mut record = LossRecord::default();
    let mut path_weight = 1.0;
    if params.is_lossless() {
        return Ok(DampSample {
            state: current,
            record,
            path_weight,
        });
    }
    let eta = params.eta;
    for (mode, idx) in modes.iter().zip(indices) {
        // P(lose k) = Σ_m P(m)·C(m,k)(1−η)^{m−k}η^k
        let mut probs = [0.0_f64; CUTOFF as usize + 1];
        for (k, a) in current.iter() {
            let m = k.get(idx);
            let p = a.norm_sqr();
            for (lost, slot) in probs.iter_mut().enumerate().take(m as usize + 1) {
                *slot += p * kraus_factor(m, lost as u8, eta).powi(2);
            }
        }
        let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
        let mut acc = 0.0;
        let mut lost = 0u8;
        for (k, p) in probs.iter().enumerate() {
            if *p <= 0.0 {
                continue;
            }
            lost = k as u8;
            acc += p;
            if u < acc {
                break;
            }
        }
        path_weight *= probs[lost as usize];
        if lost > 0 {
            record.lost_counts.insert(*mode, lost);
        }
        current = apply_kraus(&current, idx, lost, eta).normalize()?;
    }
    Ok(DampSample {
        state: current,
        record,
        path_weight,
    })
}
