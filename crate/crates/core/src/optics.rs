//! Ensemble rotations, photon-number detection and single-click
//! postselection.
//!
//! A measurement on ensemble `e` is: loss on both of its modes, a two-mode
//! rotation, then a number measurement of `(n_h, n_v)`. An outcome is
//! accepted when exactly one photon is registered.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fock::{FockError, ModeId, OccupationKey, Polarization, Result, SparseState, CUTOFF, PRUNE_THRESHOLD};
use crate::loss::{damp_mixture_exact, damp_sample, BranchMixture, NoiseParams};

/// `h† → cosθ·h† + e^{iφ} sinθ·v†`, `v† → −e^{−iφ} sinθ·h† + cosθ·v†`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotationSpec {
    pub theta: f64,
    pub phi: f64,
}

impl RotationSpec {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn hadamard() -> Self {
        Self::new(FRAC_PI_4, 0.0)
    }

    fn is_identity(&self) -> bool {
        self.theta == 0.0
    }

    /// Images of `h†` and `v†` as `(coeff of h†, coeff of v†)`.
    fn images(&self) -> ([Complex64; 2], [Complex64; 2]) {
        let (s, c) = self.theta.sin_cos();
        let e = Complex64::from_polar(1.0, self.phi);
        ([Complex64::new(c, 0.0), e * s], [-e.conj() * s, Complex64::new(c, 0.0)])
    }
}

const FACTORIAL: [f64; 5] = [1.0, 1.0, 2.0, 6.0, 24.0];

fn binomial(n: usize, k: usize) -> f64 {
    FACTORIAL[n] / (FACTORIAL[k] * FACTORIAL[n - k])
}

/// Output amplitudes of `|a,b⟩` under the rotation, indexed by output `n_h`
/// (`n_v = a + b − n_h`).
fn rotate_number_state(a: usize, b: usize, images: &([Complex64; 2], [Complex64; 2])) -> [Complex64; 5] {
    let ([alpha, beta], [gamma, delta]) = *images;
    let total = a + b;
    let mut out = [Complex64::default(); 5];
    for j in 0..=a {
        let left = alpha.powu(j as u32) * beta.powu((a - j) as u32) * binomial(a, j);
        for l in 0..=b {
            let right = gamma.powu(l as u32) * delta.powu((b - l) as u32) * binomial(b, l);
            out[j + l] += left * right;
        }
    }
    let norm_in = (FACTORIAL[a] * FACTORIAL[b]).sqrt();
    for (p, amp) in out.iter_mut().enumerate().take(total + 1) {
        *amp *= (FACTORIAL[p] * FACTORIAL[total - p]).sqrt() / norm_in;
    }
    out
}

/// Applies the rotation to the `(h_e, v_e)` mode pair.
pub fn rotate_ensemble(state: &SparseState, ensemble: usize, spec: RotationSpec) -> Result<SparseState> {
    ModeId::h(ensemble).checked_index(state.mode_count())?;
    if spec.is_identity() {
        return Ok(state.clone());
    }
    let images = spec.images();
    let mode_count = state.mode_count();
    let rotated = state.flat_map(|key, amp, emit| {
        let (a, b) = key.ensemble_counts(ensemble);
        if a + b == 0 {
            emit(key, amp);
            return Ok(());
        }
        let total = (a + b) as usize;
        let out = rotate_number_state(a as usize, b as usize, &images);
        for (p, c) in out.iter().enumerate().take(total + 1) {
            if c.norm() < PRUNE_THRESHOLD {
                continue;
            }
            let q = total - p;
            if p > CUTOFF as usize || q > CUTOFF as usize {
                return Err(FockError::CutoffExceeded {
                    key: format!("{:?}", key.counts(mode_count)),
                    mode: ModeId::h(ensemble).index() + usize::from(q > CUTOFF as usize),
                    count: p.max(q) as u8,
                });
            }
            emit(key.with_ensemble_counts(ensemble, p as u8, q as u8), amp * c);
        }
        Ok(())
    })?;
    Ok(rotated)
}

/// Photon counts registered on one ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ClickOutcome {
    pub ensemble: usize,
    pub n_h: u8,
    pub n_v: u8,
}

impl ClickOutcome {
    pub fn accepted(&self) -> bool {
        self.n_h + self.n_v == 1
    }

    /// Which detector fired, for accepted outcomes only.
    pub fn polarization_bit(&self) -> Option<Polarization> {
        match (self.n_h, self.n_v) {
            (1, 0) => Some(Polarization::H),
            (0, 1) => Some(Polarization::V),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub outcome: ClickOutcome,
    pub probability: f64,
    pub posterior: BranchMixture,
}

fn ensemble_modes(ensemble: usize) -> [ModeId; 2] {
    [ModeId::h(ensemble), ModeId::v(ensemble)]
}

/// Full outcome distribution of measuring one ensemble, with posteriors.
///
/// Posteriors stay in the rotated frame with the ensemble left in the
/// registered number state. Zero-probability outcomes are omitted.
pub fn detect_ensemble_exact(
    mixture: &BranchMixture,
    ensemble: usize,
    spec: RotationSpec,
    params: NoiseParams,
) -> Result<Vec<Detection>> {
    let damped = damp_mixture_exact(mixture, &ensemble_modes(ensemble), params)?;
    let mut by_outcome: BTreeMap<(u8, u8), Vec<(f64, SparseState)>> = BTreeMap::new();
    for branch in damped.branches() {
        let rotated = rotate_ensemble(&branch.state, ensemble, spec)?;
        let mut groups: BTreeMap<(u8, u8), Vec<(OccupationKey, Complex64)>> = BTreeMap::new();
        for (k, a) in rotated.iter() {
            groups.entry(k.ensemble_counts(ensemble)).or_default().push((k, a));
        }
        for (counts, entries) in groups {
            let s = SparseState::from_entries(rotated.mode_count(), entries)?;
            by_outcome.entry(counts).or_default().push((branch.weight, s));
        }
    }
    let mode_count = mixture.mode_count();
    let mut detections = Vec::with_capacity(by_outcome.len());
    for ((n_h, n_v), parts) in by_outcome {
        let (probability, posterior) = BranchMixture::from_unnormalized(mode_count, parts);
        if let Some(posterior) = posterior {
            detections.push(Detection {
                outcome: ClickOutcome { ensemble, n_h, n_v },
                probability,
                posterior,
            });
        }
    }
    Ok(detections)
}

/// Samples one measurement outcome; returns it with the collapsed state.
pub fn detect_ensemble_sample<R: Rng + ?Sized>(
    state: &SparseState,
    ensemble: usize,
    spec: RotationSpec,
    params: NoiseParams,
    rng: &mut R,
) -> Result<(ClickOutcome, SparseState)> {
    let damped = damp_sample(state, &ensemble_modes(ensemble), params, rng)?;
    let rotated = rotate_ensemble(&damped.state, ensemble, spec)?;
    let mut probs: Vec<((u8, u8), f64)> = Vec::with_capacity(6);
    for (k, a) in rotated.iter() {
        let c = k.ensemble_counts(ensemble);
        match probs.iter_mut().find(|(x, _)| *x == c) {
            Some((_, p)) => *p += a.norm_sqr(),
            None => probs.push((c, a.norm_sqr())),
        }
    }
    probs.sort_by_key(|a| a.0);
    let total: f64 = probs.iter().map(|(_, p)| p).sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut chosen = probs[probs.len() - 1].0;
    for (c, p) in &probs {
        acc += p;
        if u < acc {
            chosen = *c;
            break;
        }
    }
    let collapsed = rotated.filter(|k| k.ensemble_counts(ensemble) == chosen).normalize()?;
    Ok((
        ClickOutcome {
            ensemble,
            n_h: chosen.0,
            n_v: chosen.1,
        },
        collapsed,
    ))
}

/// Coherent projection onto exactly one excitation on `ensemble`.
///
/// This projector commutes with every [`RotationSpec`], so it represents
/// "some single click was registered" without fixing the basis.
pub fn project_single_excitation(state: &SparseState, ensemble: usize) -> SparseState {
    state.filter(|k| {
        let (h, v) = k.ensemble_counts(ensemble);
        h + v == 1
    })
}

/// How accepted outcomes are combined into the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Acceptance {
    /// Coherent single-excitation projection; the posterior is the effective
    /// state in the original frame.
    Effective,
    /// Incoherent sum of the accepted number outcomes in the rotated frame.
    Resolved,
}

#[derive(Debug, Clone)]
pub struct Postselection {
    pub success_probability: f64,
    /// `None` when nothing survives.
    pub posterior: Option<BranchMixture>,
}

/// Keeps only runs where every listed ensemble registers a single click.
pub fn postselect_all(
    mixture: &BranchMixture,
    ensembles: &[usize],
    specs: &[RotationSpec],
    params: NoiseParams,
    acceptance: Acceptance,
) -> Result<Postselection> {
    if specs.len() != ensembles.len() {
        return Err(FockError::InvalidKey(format!(
            "{} rotation specs for {} ensembles",
            specs.len(),
            ensembles.len()
        )));
    }
    for (i, e) in ensembles.iter().enumerate() {
        if ensembles[..i].contains(e) {
            return Err(FockError::DuplicateMode {
                mode: ModeId::h(*e).index(),
            });
        }
    }
    let mode_count = mixture.mode_count();
    let mut current = mixture.clone();
    let mut success = 1.0;
    for (&e, &spec) in ensembles.iter().zip(specs) {
        let (p, next) = match acceptance {
            Acceptance::Effective => {
                let damped = damp_mixture_exact(&current, &ensemble_modes(e), params)?;
                let parts: Vec<_> = damped
                    .branches()
                    .iter()
                    .map(|b| (b.weight, project_single_excitation(&b.state, e)))
                    .collect();
                BranchMixture::from_unnormalized(mode_count, parts)
            }
            Acceptance::Resolved => {
                let mut parts = Vec::new();
                for d in detect_ensemble_exact(&current, e, spec, params)? {
                    if d.outcome.accepted() {
                        parts.extend(
                            d.posterior
                                .branches()
                                .iter()
                                .map(|b| (d.probability * b.weight, b.state.clone())),
                        );
                    }
                }
                BranchMixture::from_unnormalized(mode_count, parts)
            }
        };
        success *= p;
        match next {
            Some(m) => current = m,
            None => {
                return Ok(Postselection {
                    success_probability: 0.0,
                    posterior: None,
                })
            }
        }
    }
    Ok(Postselection {
        success_probability: success,
        posterior: Some(current),
    })
}
