//! Monte Carlo checks of the sampled engine against exact values.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::engine::{StepCount, TrialRecord, CHAIN_LABEL, CLOSE_LABEL};
use super::exact::run_ladder_exact;
use super::runner::run_trials;
use super::{Engine, PhaseMode, ProtocolConfig, RestartMode, Scheme};
use crate::fock::{ghz_reference, PhaseLedger};
use crate::loss::NoiseParams;

const P0: f64 = 0.01;
const FP: f64 = 1e7;

fn config(n: usize, eta: f64, scheme: Scheme) -> ProtocolConfig {
    ProtocolConfig::new(n, eta, P0, FP, scheme).unwrap()
}

fn totals(records: &[TrialRecord]) -> BTreeMap<String, StepCount> {
    let mut out: BTreeMap<String, StepCount> = BTreeMap::new();
    for r in records {
        for (label, s) in &r.steps {
            let t = out.entry(label.clone()).or_default();
            t.attempts += s.attempts;
            t.successes += s.successes;
        }
    }
    out
}

/// Distance of a Bernoulli frequency from `p`, in standard errors.
fn z(s: &StepCount, p: f64) -> f64 {
    let f = s.successes as f64 / s.attempts as f64;
    (f - p) / (p * (1.0 - p) / s.attempts as f64).sqrt()
}

fn mean_and_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// E[max of k independent geometric(p) pulse counts], by summing
/// k·P(max = k) with the point masses taken from the CDF.
fn max_geometric_mean(k: i32, p: f64) -> f64 {
    let cdf = |m: i32| (1.0 - (1.0 - p).powi(m)).powi(k);
    (1..200_000).map(|m| m as f64 * (cdf(m) - cdf(m - 1))).sum()
}

#[test]
fn basic_acceptance_per_attempt() {
    for (eta, seed) in [(0.0, 1), (0.2, 2)] {
        let records = run_trials(&config(4, eta, Scheme::Basic), 3000, seed).unwrap();
        let s = totals(&records)[CHAIN_LABEL];
        assert!(s.attempts >= 10_000, "{}", s.attempts);
        let p = (1.0f64 - eta).powi(4) / 8.0;
        assert!(z(&s, p).abs() < 3.0, "eta {eta}: z {}", z(&s, p));
    }
    let s = totals(&run_trials(&config(2, 0.0, Scheme::Basic), 5000, 3).unwrap())[CHAIN_LABEL];
    assert!(z(&s, 0.5).abs() < 3.0);
}

#[test]
fn basic_mean_wall_time() {
    let cfg = config(4, 0.2, Scheme::Basic);
    let records = run_trials(&cfg, 2000, 4).unwrap();
    let times: Vec<f64> = records.iter().map(|r| r.wall_time).collect();
    let (mean, err) = mean_and_error(&times);
    let t0 = 1.0 / (P0 * FP);
    let accept = 0.8f64.powi(4) / 8.0;
    let expected = max_geometric_mean(4, P0) * t0 * P0 / accept;
    assert!(
        (mean - expected).abs() < 3.0 * err,
        "mean {mean}, expected {expected} ± {err}"
    );
    let sequential = config(4, 0.2, Scheme::Basic).with_schedule(super::PrepSchedule::Sequential);
    let times: Vec<f64> = run_trials(&sequential, 2000, 4)
        .unwrap()
        .iter()
        .map(|r| r.wall_time)
        .collect();
    let (mean, err) = mean_and_error(&times);
    let expected = 4.0 * t0 / accept;
    assert!(
        (mean - expected).abs() < 3.0 * err,
        "mean {mean}, expected {expected} ± {err}"
    );
}

#[test]
fn four_ensembles_lossless_mean_time() {
    let t0 = 1.0 / (P0 * FP);
    // Each connection attempt waits for the slower of two pairs, four
    // attempts per connection and two closure attempts on average.
    let expected = 8.0 * max_geometric_mean(2, P0) * P0 * t0;
    assert!((8.0 * t0..=12.0 * t0).contains(&expected));
    let records = run_trials(&config(4, 0.0, Scheme::Improved), 20_000, 6).unwrap();
    let times: Vec<f64> = records.iter().map(|r| r.wall_time).collect();
    let (mean, err) = mean_and_error(&times);
    assert!(
        (mean - expected).abs() < 3.0 * err,
        "mean {mean}, expected {expected} ± {err}"
    );
}

#[test]
#[ignore = "the exact mean is 11.98 t0, so a sampled mean lands above 12 t0 about half the time; see the decisions ledger"]
fn four_ensembles_sampled_mean_in_window() {
    let t0 = 1.0 / (P0 * FP);
    let records = run_trials(&config(4, 0.0, Scheme::Improved), 20_000, 6).unwrap();
    let mean = records.iter().map(|r| r.wall_time).sum::<f64>() / records.len() as f64;
    assert!((8.0 * t0..=12.0 * t0).contains(&mean), "mean {} t0", mean / t0);
}

#[test]
fn step_frequencies_match_closed_forms() {
    for n in [4usize, 8] {
        for eta in [0.0, 0.2, 1.0 / 3.0] {
            let cfg = config(n, eta, Scheme::Improved);
            let mut steps = BTreeMap::new();
            let mut seed = 10;
            while steps.get("connect_1").is_none_or(|s: &StepCount| s.attempts < 10_000) {
                for (label, s) in totals(&run_trials(&cfg, 2000, seed).unwrap()) {
                    let t: &mut StepCount = steps.entry(label).or_default();
                    t.attempts += s.attempts;
                    t.successes += s.successes;
                }
                seed += 1;
            }
            let depth = crate::analytics::ladder_depth(n).unwrap();
            for level in 1..=depth {
                let s = &steps[&super::engine::connect_label(level)];
                let p = crate::analytics::p_connect(level, eta).unwrap();
                assert!(z(s, p).abs() < 3.0, "n {n} eta {eta} level {level}: z {}", z(s, p));
            }
            let p = crate::analytics::p_close(depth, eta).unwrap();
            assert!(z(&steps[CLOSE_LABEL], p).abs() < 3.0, "n {n} eta {eta} closure");
        }
    }
}

#[test]
fn local_retry_keeps_first_level_statistics() {
    let all = config(8, 0.2, Scheme::Improved);
    let local = all.with_restart(RestartMode::LocalRetry);
    let a = run_trials(&all, 3000, 20).unwrap();
    let b = run_trials(&local, 3000, 20).unwrap();
    let s = &totals(&b)["connect_1"];
    let p = crate::analytics::p_connect(1, 0.2).unwrap();
    assert!(z(s, p).abs() < 3.0);
    assert!(b.iter().all(TrialRecord::success));
    let mean = |r: &[TrialRecord]| r.iter().map(|t| t.wall_time).sum::<f64>() / r.len() as f64;
    assert!(mean(&b) < mean(&a));
}

#[test]
fn abstract_engine_agrees_with_microscopic() {
    let micro = config(8, 0.2, Scheme::Improved);
    let abs = micro.with_engine(Engine::Abstract);
    let a = totals(&run_trials(&micro, 3000, 30).unwrap());
    let b = totals(&run_trials(&abs, 3000, 31).unwrap());
    for (label, s) in &a {
        let t = &b[label];
        let (fa, fb) = (
            s.successes as f64 / s.attempts as f64,
            t.successes as f64 / t.attempts as f64,
        );
        let se = (fa * (1.0 - fa) / s.attempts as f64 + fb * (1.0 - fb) / t.attempts as f64).sqrt();
        assert!((fa - fb).abs() < 4.0 * se, "{label}: {fa} vs {fb}");
    }
}

#[test]
fn random_phases_rotate_the_ghz_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for n in [4usize, 8] {
        for eta in [0.0, 0.2] {
            let mut ledger = PhaseLedger::zero(n);
            for i in 1..=n {
                ledger.set(i, crate::fock::next_ensemble(i, n), rng.random::<f64>() * TAU);
            }
            let ladder = run_ladder_exact(&ledger, NoiseParams::new(eta).unwrap()).unwrap();
            let post = ladder.posterior.unwrap();
            let phi = ledger.total_phase();
            assert!((post.fidelity_to(&ghz_reference(n, phi).unwrap()).unwrap() - 1.0).abs() < 1e-9);
            let aligned = post.fidelity_to(&ghz_reference(n, 0.0).unwrap()).unwrap();
            assert!((aligned - (phi / 2.0).cos().powi(2)).abs() < 1e-9);
        }
    }
}

#[test]
fn mirrored_phases_give_the_aligned_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for n in [4usize, 8] {
        let ledger = super::assign_phases(PhaseMode::Mirrored, n, &mut rng).unwrap();
        let ladder = run_ladder_exact(&ledger, NoiseParams::new(0.2).unwrap()).unwrap();
        let f = ladder
            .posterior
            .unwrap()
            .fidelity_to(&ghz_reference(n, 0.0).unwrap())
            .unwrap();
        assert!(f > 1.0 - 1e-9, "n {n}: {f}");
    }
}

#[test]
fn improved_beats_basic_at_sixteen() {
    let eta = 1.0 / 3.0;
    let imp = config(16, eta, Scheme::Improved).with_engine(Engine::Abstract);
    let imp_mean = run_trials(&imp, 1000, 50)
        .unwrap()
        .iter()
        .map(|r| r.wall_time)
        .sum::<f64>()
        / 1000.0;
    let basic = crate::analytics::basic_time(16, eta, 1.0 / (P0 * FP)).unwrap();
    assert!(imp_mean < basic, "{imp_mean} vs {basic}");
}
