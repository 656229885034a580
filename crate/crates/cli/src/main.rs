mod args;
mod settings;

use std::fs;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use ghz_core::analytics::{human_seconds, ScalingReport, ScalingRow};
use ghz_core::oracle::{run_oracle, Scenario};
use ghz_core::protocol::{ProtocolConfig, ProtocolError, Scheme};
use ghz_core::report::{quoted_estimate_flag, simulate, write_trials_csv, Flag};
use serde::Serialize;

use args::{AnalyticArgs, Cli, Command, Format, OracleArgs, ScalingArgs, SimulateArgs};
use settings::ConfigError;

const EXIT_CONFIG: u8 = 2;
const EXIT_ABORT: u8 = 3;

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display())),
        None => {
            std::io::stdout().write_all(bytes).context("cannot write to stdout")?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn config_error(e: impl std::fmt::Display) -> anyhow::Error {
    ConfigError(e.to_string()).into()
}

#[derive(Serialize)]
struct AnalyticOutput {
    row: ScalingRow,
    basic_human: String,
    improved_human: Option<String>,
    flags: Vec<Flag>,
}

fn cmd_analytic(a: AnalyticArgs) -> Result<u8> {
    let row = ScalingRow::new(a.n, a.eta, a.p0, a.fp).map_err(config_error)?;
    let bytes = match a.output.format.unwrap_or(Format::Json) {
        Format::Csv => ScalingReport { rows: vec![row] }.to_csv_string().into_bytes(),
        Format::Json => {
            let flags = ProtocolConfig::new(a.n, a.eta, a.p0, a.fp, Scheme::Improved)
                .ok()
                .and_then(|c| quoted_estimate_flag(&c))
                .into_iter()
                .collect();
            json_bytes(&AnalyticOutput {
                basic_human: human_seconds(row.basic_time),
                improved_human: row.improved_time.map(human_seconds),
                flags,
                row,
            })?
        }
    };
    emit(a.output.out.as_deref(), &bytes)?;
    Ok(0)
}

fn cmd_simulate(a: SimulateArgs) -> Result<u8> {
    let s = settings::resolve(a)?;
    let (report, records) = simulate(s.run)?;
    let bytes = match s.format {
        Format::Json => json_bytes(&report)?,
        Format::Csv => {
            let mut buf = Vec::new();
            write_trials_csv(&s.run.protocol, &records, &mut buf)?;
            buf
        }
    };
    emit(s.out.as_deref(), &bytes)?;
    if report.safety_caps > 0 {
        eprintln!(
            "{} of {} trials hit the safety cap of {} pair preparations",
            report.safety_caps, report.trials, s.run.protocol.max_pair_preps
        );
        return Ok(EXIT_ABORT);
    }
    Ok(0)
}

fn cmd_oracle(a: OracleArgs) -> Result<u8> {
    let scenario: Scenario = a.scenario.parse().map_err(config_error)?;
    let report = run_oracle(scenario, a.n, a.eta)?;
    emit(a.out.as_deref(), &json_bytes(&report)?)?;
    Ok(0)
}

fn cmd_scaling(a: ScalingArgs) -> Result<u8> {
    let report = ScalingReport::sweep(&a.ns, &a.etas, a.p0, a.fp).map_err(config_error)?;
    let bytes = match a.output.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv_string().into_bytes(),
        Format::Json => json_bytes(&report)?,
    };
    emit(a.output.out.as_deref(), &bytes)?;
    Ok(0)
}

fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<ConfigError>().is_some() {
        return EXIT_CONFIG;
    }
    match e.downcast_ref::<ProtocolError>() {
        Some(ProtocolError::Guard { .. } | ProtocolError::SafetyCap { .. }) => EXIT_ABORT,
        Some(ProtocolError::Config(_) | ProtocolError::Loss(_) | ProtocolError::Analytics(_)) => EXIT_CONFIG,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Analytic(a) => cmd_analytic(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Scaling(a) => cmd_scaling(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
