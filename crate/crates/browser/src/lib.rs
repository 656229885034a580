//! Browser bindings: every export takes plain numbers and returns JSON text.
//!
//! Errors come back as strings, which wasm-bindgen turns into thrown JS
//! values.

use ghz_core::analytics::{self, ScalingRow};
use ghz_core::fock::PhaseLedger;
use ghz_core::loss::NoiseParams;
use ghz_core::protocol::exact::run_ladder_exact;
use ghz_core::protocol::{Engine, ProtocolConfig, Scheme};
use ghz_core::report::{simulate, RunConfig};
use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

/// Largest ring drawn by the scaling plot.
pub const MAX_PLOT_ENSEMBLES: usize = 256;
/// Keeps a single simulation call short enough for the UI thread.
pub const MAX_TRIALS: u32 = 20_000;
/// The exact column of the step table is filled up to this size.
pub const MAX_EXACT_ENSEMBLES: usize = 8;

fn text<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct CurvePoint {
    n: usize,
    basic_log10: f64,
    improved_log10: Option<f64>,
    quadratic_log10: f64,
}

/// Mean preparation time of both schemes against ring size, as `log10`
/// seconds, for `n = 2..=max_n`.
#[wasm_bindgen]
pub fn scaling_curve(eta: f64, p0: f64, f_p: f64, max_n: usize) -> Result<String, String> {
    if !(2..=MAX_PLOT_ENSEMBLES).contains(&max_n) {
        return Err(format!("max_n must be between 2 and {MAX_PLOT_ENSEMBLES}"));
    }
    let points = (2..=max_n)
        .map(|n| {
            let row = ScalingRow::new(n, eta, p0, f_p).map_err(|e| e.to_string())?;
            Ok(CurvePoint {
                n,
                basic_log10: row.basic_time_log10,
                improved_log10: row.improved_time.map(f64::log10),
                quadratic_log10: row.quadratic_time.log10(),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    text(&points)
}

#[derive(Serialize)]
struct StepRow {
    step: String,
    ensembles: usize,
    probability: f64,
    vacuum_coeff: f64,
    exact_probability: Option<f64>,
    exact_vacuum_weight: Option<f64>,
}

#[derive(Serialize)]
struct StepTable {
    n: usize,
    eta: f64,
    steps: Vec<StepRow>,
    improved_over_t0: f64,
    basic_over_t0_log10: f64,
    ghz_fidelity: Option<f64>,
}

/// Success probability of each ladder step for `n = 2^{i+1}` ensembles;
/// small rings are also evaluated exactly.
#[wasm_bindgen]
pub fn step_table(n: usize, eta: f64) -> Result<String, String> {
    let depth = analytics::ladder_depth(n).map_err(|e| e.to_string())?;
    let exact = if n <= MAX_EXACT_ENSEMBLES {
        let noise = NoiseParams::new(eta).map_err(|e| e.to_string())?;
        Some(run_ladder_exact(&PhaseLedger::zero(n), noise).map_err(|e| e.to_string())?)
    } else {
        None
    };
    let mut steps = Vec::new();
    for level in 1..=depth {
        let summary = exact.as_ref().map(|l| &l.levels[level as usize - 1]);
        steps.push(StepRow {
            step: format!("connect {level}"),
            ensembles: 2usize << level,
            probability: analytics::p_connect(level, eta).map_err(|e| e.to_string())?,
            vacuum_coeff: analytics::vacuum_coeff(level, eta),
            exact_probability: summary.map(|s| s.acceptance),
            exact_vacuum_weight: summary.map(|s| s.vacuum_weight),
        });
    }
    steps.push(StepRow {
        step: "close".into(),
        ensembles: n,
        probability: analytics::p_close(depth, eta).map_err(|e| e.to_string())?,
        vacuum_coeff: 0.0,
        exact_probability: exact.as_ref().map(|l| l.closure_acceptance),
        exact_vacuum_weight: exact.as_ref().map(|_| 0.0),
    });
    text(&StepTable {
        n,
        eta,
        steps,
        improved_over_t0: analytics::improved_time(n, eta, 1.0).map_err(|e| e.to_string())?,
        basic_over_t0_log10: analytics::basic_time_log10(n, eta, 1.0).map_err(|e| e.to_string())?,
        ghz_fidelity: exact.map(|l| l.ghz_fidelity),
    })
}

/// Runs `trials` seeded trials of the improved scheme and returns the
/// summary report.
#[wasm_bindgen]
pub fn simulate_ladder(n: usize, eta: f64, trials: u32, seed: u32, microscopic: bool) -> Result<String, String> {
    if trials == 0 || trials > MAX_TRIALS {
        return Err(format!("trials must be between 1 and {MAX_TRIALS}"));
    }
    let engine = if microscopic {
        Engine::Microscopic
    } else {
        Engine::Abstract
    };
    let protocol = ProtocolConfig::new(n, eta, 0.01, 1e7, Scheme::Improved)
        .map_err(|e| e.to_string())?
        .with_engine(engine);
    let run = RunConfig {
        protocol,
        trials: u64::from(trials),
        master_seed: u64::from(seed),
    };
    let (report, _) = simulate(run).map_err(|e| e.to_string())?;
    text(&report)
}
