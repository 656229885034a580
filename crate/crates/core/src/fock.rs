//! Sparse pure states of `2n` bosonic modes, one `h` and one `v` mode per
//! atomic ensemble.
//!
//! Every state lives on a fixed register. Mode `2·(e−1)` is the `h` mode of
//! ensemble `e` (1-based) and mode `2·(e−1)+1` is its `v` mode. Occupations
//! are capped at [`CUTOFF`] photons per mode, which is exact for every state
//! the GHZ protocols can reach: at most two excitations ever meet on one
//! ensemble.
//!
//! States are immutable values; every operation returns a new state.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest photon number stored per mode.
pub const CUTOFF: u8 = 2;
/// Register size limit imposed by the packed key layout.
pub const MAX_MODES: usize = 32;
/// Amplitudes below this magnitude are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Allowed deviation of `Σ|a|²` from one after [`SparseState::normalize`].
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Inputs to [`fidelity`] must be this close to unit norm.
pub const FIDELITY_NORM_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FockError {
    #[error("ensemble count must be at least {min}, got {got}")]
    TooFewEnsembles { min: usize, got: usize },
    #[error("register of {modes} modes exceeds the {MAX_MODES}-mode limit")]
    TooManyModes { modes: usize },
    #[error("ensemble {ensemble} outside register of {ensembles} ensembles")]
    EnsembleOutOfRange { ensemble: usize, ensembles: usize },
    #[error("mode {mode} outside register of {modes} modes")]
    ModeOutOfRange { mode: usize, modes: usize },
    #[error("occupation {count} on mode {mode} of key {key} exceeds cutoff {CUTOFF}")]
    CutoffExceeded { key: String, mode: usize, count: u8 },
    #[error("mode count mismatch: {left} vs {right}")]
    ModeCountMismatch { left: usize, right: usize },
    #[error("states overlap on mode {mode}")]
    OverlappingModes { mode: usize },
    #[error("state has zero norm")]
    ZeroNorm,
    #[error("state is not normalized (norm² = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("duplicate mode {mode} in mode list")]
    DuplicateMode { mode: usize },
    #[error("invalid key: {0}")]
    InvalidKey(String),
}

pub type Result<T, E = FockError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub fn offset(self) -> usize {
        match self {
            Polarization::H => 0,
            Polarization::V => 1,
        }
    }
}

/// One bosonic mode: the `h` or `v` collective mode of a 1-based ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeId {
    pub ensemble: usize,
    pub polarization: Polarization,
}

impl ModeId {
    pub fn new(ensemble: usize, polarization: Polarization) -> Self {
        Self { ensemble, polarization }
    }

    pub fn h(ensemble: usize) -> Self {
        Self::new(ensemble, Polarization::H)
    }

    pub fn v(ensemble: usize) -> Self {
        Self::new(ensemble, Polarization::V)
    }

    /// Flat register index, `2·(ensemble−1) + {0 for H, 1 for V}`.
    pub fn index(self) -> usize {
        2 * (self.ensemble - 1) + self.polarization.offset()
    }

    pub fn from_index(index: usize) -> Self {
        let polarization = if index.is_multiple_of(2) {
            Polarization::H
        } else {
            Polarization::V
        };
        Self::new(index / 2 + 1, polarization)
    }

    pub(crate) fn checked_index(self, mode_count: usize) -> Result<usize> {
        let ensembles = mode_count / 2;
        if self.ensemble == 0 || self.ensemble > ensembles {
            return Err(FockError::EnsembleOutOfRange {
                ensemble: self.ensemble,
                ensembles,
            });
        }
        Ok(self.index())
    }
}

/// Successor of ensemble `i` on a ring of `n` ensembles (`n+1 ≡ 1`).
pub fn next_ensemble(i: usize, n: usize) -> usize {
    i % n + 1
}

/// Per-mode photon numbers packed two bits per mode.
///
/// Mode `m` occupies bits `62−2m..=63−2m`, so the integer order of two keys
/// of equal length is their lexicographic order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct OccupationKey(u64);

impl OccupationKey {
    pub const VACUUM: OccupationKey = OccupationKey(0);

    #[inline]
    fn shift(mode: usize) -> u32 {
        (62 - 2 * mode) as u32
    }

    #[inline]
    pub fn get(self, mode: usize) -> u8 {
        ((self.0 >> Self::shift(mode)) & 0b11) as u8
    }

    #[inline]
    pub fn with(self, mode: usize, count: u8) -> Self {
        debug_assert!(count <= 3);
        let s = Self::shift(mode);
        OccupationKey((self.0 & !(0b11 << s)) | ((count as u64) << s))
    }

    pub fn from_counts(counts: &[u8]) -> Result<Self> {
        if counts.len() > MAX_MODES {
            return Err(FockError::TooManyModes { modes: counts.len() });
        }
        let mut key = OccupationKey::VACUUM;
        for (mode, &c) in counts.iter().enumerate() {
            if c > CUTOFF {
                return Err(FockError::CutoffExceeded {
                    key: format!("{counts:?}"),
                    mode,
                    count: c,
                });
            }
            key = key.with(mode, c);
        }
        Ok(key)
    }

    pub fn counts(self, mode_count: usize) -> Vec<u8> {
        (0..mode_count).map(|m| self.get(m)).collect()
    }

    /// Photons held by ensemble `e` as `(n_h, n_v)`.
    #[inline]
    pub fn ensemble_counts(self, ensemble: usize) -> (u8, u8) {
        let base = 2 * (ensemble - 1);
        (self.get(base), self.get(base + 1))
    }

    #[inline]
    pub fn with_ensemble_counts(self, ensemble: usize, n_h: u8, n_v: u8) -> Self {
        let base = 2 * (ensemble - 1);
        self.with(base, n_h).with(base + 1, n_v)
    }

    pub fn total(self) -> u32 {
        let mut x = self.0;
        let mut t = 0;
        while x != 0 {
            t += (x & 0b11) as u32;
            x >>= 2;
        }
        t
    }

    fn is_disjoint(self, other: Self) -> bool {
        // two-bit fields never carry, so a field is nonzero iff either bit is set
        let occupied = |k: u64| (k | (k >> 1)) & 0x5555_5555_5555_5555;
        occupied(self.0) & occupied(other.0) == 0
    }

    fn render(self, mode_count: usize) -> String {
        let counts: Vec<String> = self.counts(mode_count).iter().map(u8::to_string).collect();
        format!("({})", counts.join(","))
    }
}

/// Sparse pure state: occupation key → complex amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseState {
    mode_count: usize,
    amplitudes: BTreeMap<OccupationKey, Complex64>,
}

impl SparseState {
    fn check_modes(mode_count: usize) -> Result<()> {
        if mode_count > MAX_MODES {
            return Err(FockError::TooManyModes { modes: mode_count });
        }
        Ok(())
    }

    /// Empty (zero) vector on a register; useful as an accumulator.
    pub fn zero(mode_count: usize) -> Result<Self> {
        Self::check_modes(mode_count)?;
        Ok(Self {
            mode_count,
            amplitudes: BTreeMap::new(),
        })
    }

    /// Builds a state from raw entries, summing duplicates and pruning dust.
    pub fn from_entries<I>(mode_count: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (OccupationKey, Complex64)>,
    {
        let mut s = Self::zero(mode_count)?;
        for (k, a) in entries {
            s.accumulate(k, a);
        }
        s.prune();
        Ok(s)
    }

    pub(crate) fn from_map_unchecked(mode_count: usize, amplitudes: BTreeMap<OccupationKey, Complex64>) -> Self {
        let mut s = Self { mode_count, amplitudes };
        s.prune();
        s
    }

    #[inline]
    pub(crate) fn accumulate(&mut self, key: OccupationKey, amp: Complex64) {
        match self.amplitudes.entry(key) {
            Entry::Vacant(e) => {
                e.insert(amp);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += amp;
            }
        }
    }

    pub(crate) fn prune(&mut self) {
        self.amplitudes.retain(|_, a| a.norm() >= PRUNE_THRESHOLD);
    }

    /// The vacuum of `n` ensembles.
    pub fn vacuum(ensembles: usize) -> Result<Self> {
        if ensembles == 0 {
            return Err(FockError::TooFewEnsembles { min: 1, got: 0 });
        }
        let mut s = Self::zero(2 * ensembles)?;
        s.amplitudes.insert(OccupationKey::VACUUM, Complex64::new(1.0, 0.0));
        Ok(s)
    }

    pub fn mode_count(&self) -> usize {
        self.mode_count
    }

    pub fn ensemble_count(&self) -> usize {
        self.mode_count / 2
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn amplitude(&self, key: OccupationKey) -> Complex64 {
        self.amplitudes.get(&key).copied().unwrap_or_default()
    }

    /// Entries in lexicographic key order.
    pub fn iter(&self) -> impl Iterator<Item = (OccupationKey, Complex64)> + '_ {
        self.amplitudes.iter().map(|(k, a)| (*k, *a))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self, tolerance: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tolerance
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if n <= 0.0 || !n.is_finite() {
            return Err(FockError::ZeroNorm);
        }
        Ok(self.scale(Complex64::new(1.0 / n.sqrt(), 0.0)))
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let amplitudes = self.amplitudes.iter().map(|(k, a)| (*k, *a * factor)).collect();
        Self::from_map_unchecked(self.mode_count, amplitudes)
    }

    /// Keeps only entries whose key satisfies `keep`; not renormalized.
    pub fn filter<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(OccupationKey) -> bool,
    {
        Self {
            mode_count: self.mode_count,
            amplitudes: self
                .amplitudes
                .iter()
                .filter(|(k, _)| keep(**k))
                .map(|(k, a)| (*k, *a))
                .collect(),
        }
    }

    /// Applies the bosonic creation operator on `mode`; the result is not
    /// normalized.
    pub fn create(&self, mode: ModeId) -> Result<Self> {
        let m = mode.checked_index(self.mode_count)?;
        let mut amplitudes = BTreeMap::new();
        for (k, a) in &self.amplitudes {
            let c = k.get(m);
            if c >= CUTOFF {
                return Err(FockError::CutoffExceeded {
                    key: k.render(self.mode_count),
                    mode: m,
                    count: c + 1,
                });
            }
            amplitudes.insert(k.with(m, c + 1), *a * ((c + 1) as f64).sqrt());
        }
        Ok(Self {
            mode_count: self.mode_count,
            amplitudes,
        })
    }

    /// Modes with a nonzero count in at least one key.
    pub fn support(&self) -> OccupationKey {
        // OR of keys marks every occupied field
        OccupationKey(self.amplitudes.keys().fold(0, |acc, k| acc | k.0))
    }

    /// Product of two states on the same register acting on disjoint modes.
    pub fn tensor(&self, other: &SparseState) -> Result<Self> {
        if self.mode_count != other.mode_count {
            return Err(FockError::ModeCountMismatch {
                left: self.mode_count,
                right: other.mode_count,
            });
        }
        let (sa, sb) = (self.support(), other.support());
        if !sa.is_disjoint(sb) {
            let mode = (0..self.mode_count)
                .find(|&m| sa.get(m) != 0 && sb.get(m) != 0)
                .unwrap_or(0);
            return Err(FockError::OverlappingModes { mode });
        }
        let mut amplitudes = BTreeMap::new();
        for (ka, a) in &self.amplitudes {
            for (kb, b) in &other.amplitudes {
                amplitudes.insert(OccupationKey(ka.0 | kb.0), a * b);
            }
        }
        Ok(Self::from_map_unchecked(self.mode_count, amplitudes))
    }

    /// `⟨self|other⟩`.
    pub fn inner_product(&self, other: &SparseState) -> Result<Complex64> {
        if self.mode_count != other.mode_count {
            return Err(FockError::ModeCountMismatch {
                left: self.mode_count,
                right: other.mode_count,
            });
        }
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (k, a) in &small.amplitudes {
            if let Some(b) = large.amplitudes.get(k) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// Multiplies by a global phase so the largest-magnitude amplitude (first
    /// in key order among ties) is real and positive.
    pub fn canonical_phase(&self) -> Self {
        let max = self.amplitudes.values().map(|a| a.norm()).fold(0.0_f64, f64::max);
        let pivot = self.amplitudes.values().find(|a| a.norm() >= max * (1.0 - 1e-12));
        match pivot {
            Some(p) if p.norm() > 0.0 => self.scale(p.conj() / p.norm()),
            _ => self.clone(),
        }
    }

    /// Largest elementwise amplitude difference.
    pub fn max_abs_diff(&self, other: &SparseState) -> f64 {
        let mut d = 0.0_f64;
        for (k, a) in &self.amplitudes {
            d = d.max((a - other.amplitude(*k)).norm());
        }
        for (k, b) in &other.amplitudes {
            if !self.amplitudes.contains_key(k) {
                d = d.max(b.norm());
            }
        }
        d
    }

    /// Same keys and amplitudes within `tolerance`.
    pub fn approx_eq(&self, other: &SparseState, tolerance: f64) -> bool {
        self.mode_count == other.mode_count && self.max_abs_diff(other) <= tolerance
    }

    /// Applies a per-entry linear map producing new entries; results are
    /// accumulated and pruned.
    pub(crate) fn flat_map<F>(&self, mut f: F) -> Result<Self>
    where
        F: FnMut(OccupationKey, Complex64, &mut dyn FnMut(OccupationKey, Complex64)) -> Result<()>,
    {
        let mut out = Self {
            mode_count: self.mode_count,
            amplitudes: BTreeMap::new(),
        };
        for (k, a) in &self.amplitudes {
            f(*k, *a, &mut |nk, na| out.accumulate(nk, na))?;
        }
        out.prune();
        Ok(out)
    }

    /// Single-excitation state `h_i†|vac⟩` or `v_i†|vac⟩` on a register.
    pub fn single(ensembles: usize, mode: ModeId) -> Result<Self> {
        Self::vacuum(ensembles)?.create(mode)
    }
}

impl fmt::Display for SparseState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (k, a) in &self.amplitudes {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)|{}⟩", a.re, a.im, k.render(self.mode_count))?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// `|⟨a|b⟩|²` for two normalized states.
pub fn fidelity(a: &SparseState, b: &SparseState) -> Result<f64> {
    for s in [a, b] {
        let n = s.norm_sqr();
        if (n - 1.0).abs() > FIDELITY_NORM_TOLERANCE {
            return Err(FockError::NotNormalized { norm_sqr: n });
        }
    }
    Ok(a.inner_product(b)?.norm_sqr().min(1.0))
}

/// `(Π h_i† + e^{iφ_t} Π v_i†)|vac⟩/√2` over `n ≥ 2` ensembles.
pub fn ghz_reference(ensembles: usize, phi_t: f64) -> Result<SparseState> {
    if ensembles < 2 {
        return Err(FockError::TooFewEnsembles { min: 2, got: ensembles });
    }
    SparseState::check_modes(2 * ensembles)?;
    let mut all_h = OccupationKey::VACUUM;
    let mut all_v = OccupationKey::VACUUM;
    for e in 1..=ensembles {
        all_h = all_h.with_ensemble_counts(e, 1, 0);
        all_v = all_v.with_ensemble_counts(e, 0, 1);
    }
    SparseState::from_entries(
        2 * ensembles,
        [
            (all_h, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (all_v, Complex64::from_polar(FRAC_1_SQRT_2, phi_t)),
        ],
    )
}

/// Channel phases `φ_{i,i+1}` of the pair states around the ring.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseLedger {
    ensembles: usize,
    link_phases: BTreeMap<(usize, usize), f64>,
}

impl PhaseLedger {
    pub fn zero(ensembles: usize) -> Self {
        Self {
            ensembles,
            link_phases: BTreeMap::new(),
        }
    }

    pub fn ensemble_count(&self) -> usize {
        self.ensembles
    }

    /// Records `φ_{i,j}`; the reversed orientation reads back as `−φ`.
    pub fn set(&mut self, i: usize, j: usize, phi: f64) {
        self.link_phases.remove(&(j, i));
        self.link_phases.insert((i, j), phi);
    }

    pub fn phase(&self, i: usize, j: usize) -> f64 {
        if let Some(p) = self.link_phases.get(&(i, j)) {
            *p
        } else if let Some(p) = self.link_phases.get(&(j, i)) {
            -*p
        } else {
            0.0
        }
    }

    /// `φ_t = Σ_i φ_{i,i+1}` with `n+1 ≡ 1`.
    pub fn total_phase(&self) -> f64 {
        (1..=self.ensembles)
            .map(|i| self.phase(i, next_ensemble(i, self.ensembles)))
            .sum()
    }

    pub fn links(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.link_phases.iter().map(|(k, v)| (*k, *v))
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    key: Vec<u8>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateJson {
    mode_count: usize,
    entries: Vec<EntryJson>,
}

impl Serialize for SparseState {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        StateJson {
            mode_count: self.mode_count,
            entries: self
                .amplitudes
                .iter()
                .map(|(k, a)| EntryJson {
                    key: k.counts(self.mode_count),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SparseState {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error;
        let raw = StateJson::deserialize(deserializer)?;
        let mut entries = Vec::with_capacity(raw.entries.len());
        for e in raw.entries {
            if e.key.len() != raw.mode_count {
                return Err(D::Error::custom(FockError::InvalidKey(format!(
                    "key length {} != mode_count {}",
                    e.key.len(),
                    raw.mode_count
                ))));
            }
            let key = OccupationKey::from_counts(&e.key).map_err(D::Error::custom)?;
            entries.push((key, Complex64::new(e.re, e.im)));
        }
        SparseState::from_entries(raw.mode_count, entries).map_err(D::Error::custom)
    }
}
