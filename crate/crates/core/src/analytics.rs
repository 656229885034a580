//! Closed-form success probabilities, vacuum coefficients and preparation
//! times for the chain and ladder schemes.
//!
//! Ladder depth `i` means `n = 2^{i+1}` ensembles: `i` connection levels
//! followed by one loop closure.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("p0 must lie in (0, 1), got {0}")]
    InvalidP0(f64),
    #[error("repetition frequency must be positive, got {0}")]
    InvalidFrequency(f64),
    #[error("loss probability must lie in [0, 1), got {0}")]
    InvalidEta(f64),
    #[error("need at least {min} ensembles, got {got}")]
    TooFewEnsembles { min: usize, got: usize },
    #[error("ladder requires n = 2^(i+1) with i ≥ 1, got n = {0}")]
    NotLadderSize(usize),
    #[error("connection level must be ≥ 1, got {0}")]
    InvalidLevel(u32),
    #[error("asymptotic estimate is undefined at eta = 0")]
    ZeroLossEstimate,
}

pub type Result<T> = std::result::Result<T, AnalyticsError>;

fn check_p0(p0: f64) -> Result<()> {
    if p0 > 0.0 && p0 < 1.0 {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidP0(p0))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if (0.0..1.0).contains(&eta) {
        Ok(())
    } else {
        Err(AnalyticsError::InvalidEta(eta))
    }
}

/// Mean pair preparation time `t0 = 1/(p0·f_p)`.
pub fn pair_time(p0: f64, f_p: f64) -> Result<f64> {
    check_p0(p0)?;
    if !(f_p > 0.0 && f_p.is_finite()) {
        return Err(AnalyticsError::InvalidFrequency(f_p));
    }
    Ok(1.0 / (p0 * f_p))
}

/// Fidelity `1 − p0` of a heralded pair.
pub fn pair_fidelity(p0: f64) -> Result<f64> {
    check_p0(p0)?;
    Ok(1.0 - p0)
}

/// Per-attempt success of the chain scheme, `(1−η)^n / 2^{n−1}`.
pub fn basic_acceptance(n: usize, eta: f64) -> Result<f64> {
    basic_acceptance_log10(n, eta)?;
    Ok((1.0 - eta).powi(n as i32) / 2f64.powi(n as i32 - 1))
}

fn basic_acceptance_log10(n: usize, eta: f64) -> Result<f64> {
    if n < 2 {
        return Err(AnalyticsError::TooFewEnsembles { min: 2, got: n });
    }
    check_eta(eta)?;
    Ok(n as f64 * (1.0 - eta).log10() - (n - 1) as f64 * 2f64.log10())
}

/// `T = t0·2^{n−1}/(1−η)^n`.
pub fn basic_time(n: usize, eta: f64, t0: f64) -> Result<f64> {
    Ok(t0 / basic_acceptance(n, eta)?)
}

/// `log10 T`, usable where `T` overflows.
pub fn basic_time_log10(n: usize, eta: f64, t0: f64) -> Result<f64> {
    Ok(t0.log10() - basic_acceptance_log10(n, eta)?)
}

/// Closed form `c_i = 2η(2^i − 1)`.
pub fn vacuum_coeff(i: u32, eta: f64) -> f64 {
    2.0 * eta * (2f64.powi(i as i32) - 1.0)
}

/// `c_i = 2c_{i−1} + 2η` iterated from `c_0 = 0`.
pub fn vacuum_coeff_recursive(i: u32, eta: f64) -> f64 {
    (0..i).fold(0.0, |c, _| 2.0 * c + 2.0 * eta)
}

/// Vacuum coefficients for `η = eta_num/den`, as numerators over `den`.
///
/// Both routes stay in integers so they can be compared exactly.
pub mod scaled {
    pub fn closed(i: u32, eta_num: u128) -> u128 {
        2 * eta_num * ((1u128 << i) - 1)
    }

    pub fn recursive(i: u32, eta_num: u128) -> u128 {
        (0..i).fold(0, |c, _| 2 * c + 2 * eta_num)
    }
}

/// Success probability of the `i`-th connection,
/// `(1−η)²(1+2η+2c_{i−1}) / [4(1+c_{i−1})²]`.
pub fn p_connect(i: u32, eta: f64) -> Result<f64> {
    if i == 0 {
        return Err(AnalyticsError::InvalidLevel(i));
    }
    check_eta(eta)?;
    let c = vacuum_coeff(i - 1, eta);
    Ok((1.0 - eta).powi(2) * (1.0 + 2.0 * eta + 2.0 * c) / (4.0 * (1.0 + c).powi(2)))
}

/// Success probability of closing the loop after `i` levels,
/// `(1−η)² / [2(1+c_i)]`.
pub fn p_close(i: u32, eta: f64) -> Result<f64> {
    if i == 0 {
        return Err(AnalyticsError::InvalidLevel(i));
    }
    check_eta(eta)?;
    Ok((1.0 - eta).powi(2) / (2.0 * (1.0 + vacuum_coeff(i, eta))))
}

/// Depth `i` with `n = 2^{i+1}`, `i ≥ 1`.
pub fn ladder_depth(n: usize) -> Result<u32> {
    if n < 4 || !n.is_power_of_two() {
        return Err(AnalyticsError::NotLadderSize(n));
    }
    Ok(n.trailing_zeros() - 1)
}

/// `T_imp = t0 / [p_l · Π_{j=1}^{i} p_j]`.
pub fn improved_time(n: usize, eta: f64, t0: f64) -> Result<f64> {
    let depth = ladder_depth(n)?;
    let mut denom = p_close(depth, eta)?;
    for j in 1..=depth {
        denom *= p_connect(j, eta)?;
    }
    Ok(t0 / denom)
}

/// Lossless limit `n²·t0/2`.
pub fn quadratic_time(n: usize, t0: f64) -> f64 {
    (n * n) as f64 * t0 / 2.0
}

/// Large-loss estimate `t0·[2ηn/(1−η)²]·(n/2)^{log2[2η√n/(1−η)²]}`.
pub fn asymptotic_time(n: usize, eta: f64, t0: f64) -> Result<f64> {
    ladder_depth(n)?;
    check_eta(eta)?;
    if eta == 0.0 {
        return Err(AnalyticsError::ZeroLossEstimate);
    }
    let nf = n as f64;
    let loss = (1.0 - eta).powi(2);
    let prefactor = 2.0 * eta * nf / loss;
    let exponent = (2.0 * eta * nf.sqrt() / loss).log2();
    Ok(t0 * prefactor * (nf / 2.0).powf(exponent))
}

/// `E[max]` of `n` independent pulse counts, each geometric on `{1, 2, …}`
/// with success `p0`: `Σ_{k≥0} [1 − (1 − (1−p0)^k)^n]`.
pub fn expected_max_pulses(n: usize, p0: f64) -> Result<f64> {
    check_p0(p0)?;
    let q = 1.0 - p0;
    let mut total = 0.0;
    let mut qk = 1.0f64;
    loop {
        let term = 1.0 - (1.0 - qk).powi(n as i32);
        total += term;
        if term < 1e-17 {
            return Ok(total);
        }
        qk *= q;
    }
}

/// Mean time of the basic scheme when the `n` pairs of each attempt are
/// prepared side by side: `E[max pulses]/(f_p·P_acc)`.
pub fn basic_time_parallel(n: usize, eta: f64, p0: f64, f_p: f64) -> Result<f64> {
    pair_time(p0, f_p)?;
    Ok(expected_max_pulses(n, p0)? / f_p / basic_acceptance(n, eta)?)
}

/// A quantity that may overflow `f64`, kept alongside its `log10`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    /// `f64::INFINITY` when out of range.
    pub value: f64,
    pub log10: f64,
}

impl LogValue {
    pub fn from_log10(log10: f64) -> Self {
        Self {
            value: 10f64.powf(log10),
            log10,
        }
    }
}

/// Pulse repeats needed without quantum memory, `p0^{−n}`.
pub fn memoryless_repeats(n: usize, p0: f64) -> Result<LogValue> {
    check_p0(p0)?;
    Ok(LogValue::from_log10(-(n as f64) * p0.log10()))
}

/// Ratio of memoryless repeats to the `n/p0` pulses needed with memory.
pub fn memory_advantage(n: usize, p0: f64) -> Result<LogValue> {
    let without = memoryless_repeats(n, p0)?;
    Ok(LogValue::from_log10(without.log10 - (n as f64 / p0).log10()))
}

/// Smallest ladder size at which the ladder beats the chain, if any up to
/// `max_n`.
pub fn crossover_n(eta: f64, max_n: usize) -> Result<Option<usize>> {
    let mut n = 4;
    while n <= max_n {
        if improved_time(n, eta, 1.0)? < basic_time(n, eta, 1.0)? {
            return Ok(Some(n));
        }
        n *= 2;
    }
    Ok(None)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: usize,
    pub eta: f64,
    pub p0: f64,
    pub f_p: f64,
    pub t0: f64,
    pub basic_time: f64,
    pub basic_time_log10: f64,
    pub improved_time: Option<f64>,
    pub quadratic_time: f64,
    pub asymptotic_time: Option<f64>,
    pub p_steps: Vec<f64>,
    pub c_steps: Vec<f64>,
    pub p_close: Option<f64>,
}

impl ScalingRow {
    pub fn new(n: usize, eta: f64, p0: f64, f_p: f64) -> Result<Self> {
        let t0 = pair_time(p0, f_p)?;
        let basic = basic_time(n, eta, t0)?;
        let basic_log = basic_time_log10(n, eta, t0)?;
        let depth = ladder_depth(n).ok();
        let (improved, p_steps, c_steps, close) = match depth {
            Some(i) => (
                Some(improved_time(n, eta, t0)?),
                (1..=i).map(|j| p_connect(j, eta)).collect::<Result<Vec<_>>>()?,
                (1..=i).map(|j| vacuum_coeff(j, eta)).collect(),
                Some(p_close(i, eta)?),
            ),
            None => (None, Vec::new(), Vec::new(), None),
        };
        let asymptotic = match depth {
            Some(_) if eta > 0.0 => Some(asymptotic_time(n, eta, t0)?),
            _ => None,
        };
        Ok(Self {
            n,
            eta,
            p0,
            f_p,
            t0,
            basic_time: basic,
            basic_time_log10: basic_log,
            improved_time: improved,
            quadratic_time: quadratic_time(n, t0),
            asymptotic_time: asymptotic,
            p_steps,
            c_steps,
            p_close: close,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
}

impl ScalingReport {
    /// One row per `(n, η)`, `η` varying fastest.
    pub fn sweep(ns: &[usize], etas: &[f64], p0: f64, f_p: f64) -> Result<Self> {
        let mut rows = Vec::with_capacity(ns.len() * etas.len());
        for &n in ns {
            for &eta in etas {
                rows.push(ScalingRow::new(n, eta, p0, f_p)?);
            }
        }
        Ok(Self { rows })
    }

    pub fn max_depth(&self) -> usize {
        self.rows.iter().map(|r| r.p_steps.len()).max().unwrap_or(0)
    }

    /// Fixed columns `n, eta, t0_s, basic_s, improved_s, quadratic_s,
    /// asymptotic_s`, then `p1..pI`, `c1..cI`, `p_close`. Missing values are
    /// empty cells.
    pub fn header(&self) -> Vec<String> {
        let depth = self.max_depth();
        let mut h: Vec<String> = [
            "n",
            "eta",
            "t0_s",
            "basic_s",
            "improved_s",
            "quadratic_s",
            "asymptotic_s",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=depth).map(|j| format!("p{j}")));
        h.extend((1..=depth).map(|j| format!("c{j}")));
        h.push("p_close".into());
        h
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let depth = self.max_depth();
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.header())?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![
                r.n.to_string(),
                r.eta.to_string(),
                r.t0.to_string(),
                r.basic_time.to_string(),
                opt(r.improved_time),
                r.quadratic_time.to_string(),
                opt(r.asymptotic_time),
            ];
            rec.extend((0..depth).map(|j| opt(r.p_steps.get(j).copied())));
            rec.extend((0..depth).map(|j| opt(r.c_steps.get(j).copied())));
            rec.push(opt(r.p_close));
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("in-memory CSV write");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Seconds with an SI prefix, e.g. `164.0 ms`.
pub fn human_seconds(s: f64) -> String {
    if !s.is_finite() {
        return format!("{s} s");
    }
    let (scale, unit) = match s.abs() {
        0.0 => (1.0, "s"),
        x if x < 1e-6 => (1e9, "ns"),
        x if x < 1e-3 => (1e6, "µs"),
        x if x < 1.0 => (1e3, "ms"),
        x if x < 1e5 => (1.0, "s"),
        _ => return format!("{s:.3e} s"),
    };
    format!("{:.4} {unit}", s * scale)
}
