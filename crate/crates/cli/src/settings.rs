use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use ghz_core::protocol::{
    Engine, PhaseMode, PrepSchedule, ProtocolConfig, RestartMode, Scheme, DEFAULT_MAX_PAIR_PREPS,
};
use ghz_core::report::RunConfig;

use crate::args::{EngineArg, Format, PhasesArg, RestartArg, ScheduleArg, SchemeArg, SimulateArgs};

pub const DEFAULT_TRIALS: u64 = 1000;

/// Bad user input; exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| bad(format!("{key}: cannot parse {value:?}: {e}")))
}

fn parse_enum<T: ValueEnum>(key: &str, value: &str) -> Result<T, ConfigError> {
    T::from_str(value, true).map_err(|e| bad(format!("{key}: {e}")))
}

/// Parses `key=value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<SimulateArgs, ConfigError> {
    let mut a = SimulateArgs::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| bad(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "n" => a.n = Some(parse_num(&key, value)?),
            "eta" => a.eta = Some(parse_num(&key, value)?),
            "p0" => a.p0 = Some(parse_num(&key, value)?),
            "fp" => a.fp = Some(parse_num(&key, value)?),
            "trials" => a.trials = Some(parse_num(&key, value)?),
            "seed" => a.seed = Some(parse_num(&key, value)?),
            "max-pair-preps" => a.max_pair_preps = Some(parse_num(&key, value)?),
            "engine" => a.engine = Some(parse_enum(&key, value)?),
            "scheme" => a.scheme = Some(parse_enum(&key, value)?),
            "phases" => a.phases = Some(parse_enum(&key, value)?),
            "restart" => a.restart = Some(parse_enum(&key, value)?),
            "schedule" => a.schedule = Some(parse_enum(&key, value)?),
            "format" => a.format = Some(parse_enum(&key, value)?),
            "out" => a.out = Some(PathBuf::from(value)),
            other => return Err(bad(format!("line {}: unknown key {other:?}", lineno + 1))),
        }
    }
    Ok(a)
}

fn read_config(path: &Path) -> Result<SimulateArgs, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read config {}: {e}", path.display())))?;
    parse_config_text(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
}

/// Fully resolved `simulate` settings.
#[derive(Debug, Clone)]
pub struct SimulateSettings {
    pub run: RunConfig,
    pub out: Option<PathBuf>,
    pub format: Format,
}

/// Flags first, then the config file, then defaults.
pub fn resolve(flags: SimulateArgs) -> Result<SimulateSettings, ConfigError> {
    let file = match &flags.config {
        Some(p) => read_config(p)?,
        None => SimulateArgs::default(),
    };
    let n = flags
        .n
        .or(file.n)
        .ok_or_else(|| bad("--n is required (flag or config key)"))?;
    let scheme = match flags.scheme.or(file.scheme).unwrap_or(SchemeArg::Improved) {
        SchemeArg::Basic => Scheme::Basic,
        SchemeArg::Improved => Scheme::Improved,
    };
    let protocol = ProtocolConfig::new(
        n,
        flags.eta.or(file.eta).unwrap_or(0.0),
        flags.p0.or(file.p0).unwrap_or(0.01),
        flags.fp.or(file.fp).unwrap_or(1e7),
        scheme,
    )
    .map_err(|e| bad(e.to_string()))?;
    let protocol = protocol
        .with_engine(match flags.engine.or(file.engine).unwrap_or(EngineArg::Micro) {
            EngineArg::Micro => Engine::Microscopic,
            EngineArg::Abstract => Engine::Abstract,
        })
        .with_phases(match flags.phases.or(file.phases).unwrap_or(PhasesArg::Zero) {
            PhasesArg::Zero => PhaseMode::Zero,
            PhasesArg::Random => PhaseMode::Random,
            PhasesArg::Mirrored => PhaseMode::Mirrored,
        })
        .with_restart(match flags.restart.or(file.restart).unwrap_or(RestartArg::All) {
            RestartArg::All => RestartMode::RestartAll,
            RestartArg::Local => RestartMode::LocalRetry,
        })
        .with_schedule(
            match flags.schedule.or(file.schedule).unwrap_or(ScheduleArg::Parallel) {
                ScheduleArg::Parallel => PrepSchedule::Parallel,
                ScheduleArg::Sequential => PrepSchedule::Sequential,
            },
        )
        .with_max_pair_preps(
            flags
                .max_pair_preps
                .or(file.max_pair_preps)
                .unwrap_or(DEFAULT_MAX_PAIR_PREPS),
        );
    Ok(SimulateSettings {
        run: RunConfig {
            protocol,
            trials: flags.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS),
            master_seed: flags.seed.or(file.seed).unwrap_or(0),
        },
        out: flags.out.or(file.out),
        format: flags.format.or(file.format).unwrap_or(Format::Json),
    })
}
