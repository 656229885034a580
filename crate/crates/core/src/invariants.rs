//! Property tests for the state, channel and protocol invariants.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analytics;
use crate::fock::{fidelity, ghz_reference, next_ensemble, ModeId, OccupationKey, SparseState};
use crate::loss::{damp_all_exact, damp_mixture_exact, BranchMixture, NoiseParams};
use crate::optics::{detect_ensemble_exact, project_single_excitation, rotate_ensemble, RotationSpec};
use crate::protocol::engine::TrialRecord;
use crate::protocol::exact::{connect_exact, ExactBlock};
use crate::protocol::{assign_phases, chain_state, PhaseMode};

/// Per-ensemble occupations with at most two photons in total.
const LOCAL: [(u8, u8); 6] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)];

fn two_ensemble_state() -> impl Strategy<Value = SparseState> {
    proptest::collection::vec((0usize..6, 0usize..6, -1.0f64..1.0, -1.0f64..1.0), 1..8).prop_filter_map(
        "nonzero state",
        |terms| {
            let entries = terms.into_iter().map(|(a, b, re, im)| {
                let key = OccupationKey::VACUUM
                    .with_ensemble_counts(1, LOCAL[a].0, LOCAL[a].1)
                    .with_ensemble_counts(2, LOCAL[b].0, LOCAL[b].1);
                (key, Complex64::new(re, im))
            });
            SparseState::from_entries(4, entries).ok()?.normalize().ok()
        },
    )
}

fn rotation() -> impl Strategy<Value = RotationSpec> {
    (0.0..PI, 0.0..TAU).prop_map(|(t, p)| RotationSpec::new(t, p))
}

fn both_modes(e: usize) -> [ModeId; 2] {
    [ModeId::h(e), ModeId::v(e)]
}

fn accepted_probability(m: &BranchMixture, e: usize, spec: RotationSpec, noise: NoiseParams) -> f64 {
    detect_ensemble_exact(m, e, spec, noise)
        .unwrap()
        .iter()
        .filter(|d| d.outcome.accepted())
        .map(|d| d.probability)
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalize_and_rotate_preserve_norm(s in two_ensemble_state(), spec in rotation()) {
        prop_assert!(s.is_normalized(1e-10));
        let r = rotate_ensemble(&s, 1, spec).unwrap();
        prop_assert!((r.norm_sqr() - 1.0).abs() < 1e-10);
        let back = rotate_ensemble(&r, 1, RotationSpec::new(-spec.theta, spec.phi)).unwrap();
        prop_assert!(back.max_abs_diff(&s) < 1e-10);
    }

    #[test]
    fn loss_keeps_unit_trace(s in two_ensemble_state(), eta in 0.0f64..0.99) {
        let m = damp_all_exact(&s, &[ModeId::h(1), ModeId::v(1), ModeId::h(2)], NoiseParams::new(eta).unwrap()).unwrap();
        prop_assert!((m.total_weight() - 1.0).abs() < 1e-10);
        for b in m.branches() {
            prop_assert!(b.state.is_normalized(1e-10));
        }
    }

    #[test]
    fn loss_channels_compose(s in two_ensemble_state(), a in 0.0f64..0.9, b in 0.0f64..0.9) {
        let modes = both_modes(1);
        let pure = BranchMixture::pure(s).unwrap();
        let twice = damp_mixture_exact(
            &damp_mixture_exact(&pure, &modes, NoiseParams::new(a).unwrap()).unwrap(),
            &modes,
            NoiseParams::new(b).unwrap(),
        )
        .unwrap();
        // Transmissions multiply.
        let once = damp_mixture_exact(&pure, &modes, NoiseParams::new(1.0 - (1.0 - a) * (1.0 - b)).unwrap()).unwrap();
        prop_assert!(twice.density_distance(&once) < 1e-10);
    }

    #[test]
    fn loss_commutes_with_rotation(s in two_ensemble_state(), spec in rotation(), eta in 0.0f64..0.9) {
        let noise = NoiseParams::new(eta).unwrap();
        let pure = BranchMixture::pure(s).unwrap();
        let rotate = |m: &BranchMixture| m.map_states(|x| rotate_ensemble(x, 2, spec)).unwrap();
        let lr = rotate(&damp_mixture_exact(&pure, &both_modes(2), noise).unwrap());
        let rl = damp_mixture_exact(&rotate(&pure), &both_modes(2), noise).unwrap();
        prop_assert!(lr.density_distance(&rl) < 1e-10);
    }

    #[test]
    fn acceptance_ignores_basis(s in two_ensemble_state(), spec in rotation(), eta in 0.0f64..0.9) {
        let noise = NoiseParams::new(eta).unwrap();
        let m = BranchMixture::pure(s).unwrap();
        let reference = accepted_probability(&m, 1, RotationSpec::identity(), noise);
        prop_assert!((accepted_probability(&m, 1, spec, noise) - reference).abs() < 1e-10);
    }

    #[test]
    fn chain_projects_onto_ghz(n in 2usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ledger = assign_phases(PhaseMode::Random, n, &mut rng).unwrap();
        let chain = chain_state(&ledger).unwrap();
        prop_assert_eq!(chain.len(), 1usize << n);
        prop_assert!(chain.is_normalized(1e-10));
        let mut projected = chain;
        for e in 1..=n {
            projected = project_single_excitation(&projected, e);
        }
        prop_assert!((projected.norm_sqr() - 2.0 / (1u64 << n) as f64).abs() < 1e-12);
        let ghz = ghz_reference(n, ledger.total_phase()).unwrap();
        prop_assert!((fidelity(&projected.normalize().unwrap(), &ghz).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mirrored_phases_cancel(half in 1usize..=8, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ledger = assign_phases(PhaseMode::Mirrored, 2 * half, &mut rng).unwrap();
        prop_assert!(ledger.total_phase().abs() < 1e-12);
    }

    #[test]
    fn first_connection_matches_closed_form(eta in 0.0f64..0.95, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ledger = assign_phases(PhaseMode::Random, 4, &mut rng).unwrap();
        let noise = NoiseParams::new(eta).unwrap();
        let c = connect_exact(
            &ExactBlock::pair(&ledger, 1).unwrap(),
            &ExactBlock::pair(&ledger, 3).unwrap(),
            &ledger,
            noise,
        )
        .unwrap();
        prop_assert!((c.acceptance - analytics::p_connect(1, eta).unwrap()).abs() < 1e-12);
        let c1 = analytics::vacuum_coeff(1, eta);
        prop_assert!((c.block.unwrap().vacuum_weight() - c1 / (1.0 + c1)).abs() < 1e-12);
    }

    #[test]
    fn vacuum_coefficient_forms_agree(i in 0u32..=20, step in 0u128..=19) {
        // η = step/20 scaled by 20 keeps the check in integers.
        prop_assert_eq!(analytics::scaled::closed(i, step), analytics::scaled::recursive(i, step));
    }

    #[test]
    fn improved_time_is_quadratic_without_loss(k in 1u32..=5, t0 in 1e-9f64..1.0) {
        let n = 1usize << (k + 1);
        prop_assert_eq!(analytics::improved_time(n, 0.0, t0).unwrap(), analytics::quadratic_time(n, t0));
    }

    #[test]
    fn state_json_round_trip(s in two_ensemble_state()) {
        let text = serde_json::to_string(&s).unwrap();
        let back: SparseState = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, s);
    }

    #[test]
    fn mixture_json_round_trip(s in two_ensemble_state(), eta in 0.0f64..0.9) {
        let m = damp_all_exact(&s, &both_modes(1), NoiseParams::new(eta).unwrap()).unwrap();
        let back: BranchMixture = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }

    #[test]
    fn trial_json_round_trip(seed in any::<u64>(), n_exp in 1u32..=2, eta in 0.0f64..0.5) {
        let n = 1usize << (n_exp + 1);
        let cfg = crate::protocol::ProtocolConfig::new(n, eta, 0.2, 1e6, crate::protocol::Scheme::Improved).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = crate::protocol::engine::run_trial(&cfg, 0, &mut rng).unwrap();
        prop_assert!(r.pair_preps >= n as u64);
        let back: TrialRecord = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
        prop_assert_eq!(back, r);
    }
}

#[test]
fn ring_neighbours_wrap() {
    assert_eq!(next_ensemble(4, 4), 1);
    assert_eq!(next_ensemble(1, 4), 2);
}
