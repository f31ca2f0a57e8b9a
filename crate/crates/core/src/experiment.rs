//! Experiment configuration, parameter sweeps and gain reporting.
//!
//! Config files are flat UTF-8 `key = value` lines with `#` comments.
//! Values given later (command-line overrides) replace earlier ones.

use std::fmt;
use std::path::PathBuf;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mdp::{policy_iteration, upper_bound, MdpModel, Rounding};
use crate::montecarlo::{simulate_original, HeuristicPolicy, SimulationConfig};
use crate::relay::{RelayModel, SystemParams};

/// Tolerance of the `p_upper_bound >= p_heuristic_analytic` row check.
pub const DOMINANCE_TOLERANCE: f64 = 1e-9;

/// Column header of the sweep CSV.
pub const SWEEP_HEADER: [&str; 8] = [
    "sweep_param",
    "sweep_value",
    "n_levels",
    "p_heuristic_analytic",
    "p_heuristic_sim",
    "p_heuristic_sim_stderr",
    "p_upper_bound",
    "status",
];

/// Recognized config keys with their defaults and meaning.
pub const CONFIG_KEYS: [(&str, &str, &str); 14] = [
    ("source_power", "1", "source transmit power P_s, mW (fixed axis of battery sweeps)"),
    ("noise_power", "0.001", "noise power, mW"),
    ("block_duration", "1", "block duration T, ms"),
    ("efficiency", "0.5", "energy conversion efficiency, in (0,1)"),
    ("rate", "1.5", "source rate, bits/s/Hz; threshold SNR is 4^rate - 1"),
    ("battery_capacity", "10", "battery capacity B, µJ (fixed axis of power sweeps)"),
    ("n_channel_states", "200", "states of the equiprobable Rayleigh quantization"),
    ("n_levels", "5,9", "battery grid sizes N_b, comma separated"),
    ("sweep", "battery", "sweep axis: battery or power"),
    ("sweep_values", "2,4,...,16 | 0.5,1,2", "sweep points; default depends on the axis"),
    ("blocks", "100000", "Monte Carlo blocks per row"),
    ("seed", "1", "base seed; row i uses seed + i"),
    ("out", "-", "output CSV path, - for stdout"),
    ("round_exact_up", "true", "raise residuals lying exactly on a level to the next level"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Battery,
    Power,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Battery => "battery_capacity",
            SweepAxis::Power => "source_power",
        }
    }

    pub fn default_values(self) -> Vec<f64> {
        match self {
            SweepAxis::Battery => (1..=8).map(|k| 2.0 * k as f64).collect(),
            SweepAxis::Power => vec![0.5, 1.0, 2.0],
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "battery" | "battery_capacity" => Ok(SweepAxis::Battery),
            "power" | "source_power" => Ok(SweepAxis::Power),
            "" => Err(Error::Config("missing sweep axis".into())),
            other => Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: SystemParams,
    pub n_channel_states: usize,
    pub n_levels: Vec<usize>,
    pub sweep: SweepAxis,
    pub sweep_values: Vec<f64>,
    pub blocks: u64,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub rounding: Rounding,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config(None, &[]).expect("defaults are valid")
    }
}

/// Splits config text into `(key, value)` pairs, rejecting unknown keys.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        let key = key.trim();
        check_key(key)?;
        pairs.push((key.to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

fn check_key(key: &str) -> Result<()> {
    if CONFIG_KEYS.iter().any(|(k, _, _)| *k == key) {
        Ok(())
    } else {
        Err(Error::Config(format!("unknown key {key:?}")))
    }
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: malformed number {value:?}")))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    if value.trim().is_empty() {
        return Err(Error::Config(format!("{key}: empty list")));
    }
    value.split(',').map(|v| number(key, v.trim())).collect()
}

/// Builds a config from an optional file body plus overrides; overrides win.
pub fn parse_config(file_text: Option<&str>, overrides: &[(String, String)]) -> Result<ExperimentConfig> {
    let mut pairs = match file_text {
        Some(t) => parse_config_text(t)?,
        None => Vec::new(),
    };
    for (k, _) in overrides {
        check_key(k)?;
    }
    pairs.extend(overrides.iter().cloned());
    let get = |key: &str| pairs.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
    let num = |key: &str, default: f64| -> Result<f64> { get(key).map_or(Ok(default), |v| number(key, v)) };

    let params = SystemParams::new(
        num("source_power", 1.0)?,
        num("noise_power", 1e-3)?,
        num("block_duration", 1.0)?,
        num("efficiency", 0.5)?,
        num("rate", 1.5)?,
        num("battery_capacity", 10.0)?,
    )
    .map_err(|e| Error::Config(e.to_string()))?;

    let n_channel_states = get("n_channel_states").map_or(Ok(200), |v| number("n_channel_states", v))?;
    if n_channel_states == 0 {
        return Err(Error::Config("n_channel_states must be positive".into()));
    }
    let n_levels: Vec<usize> = get("n_levels").map_or(Ok(vec![5, 9]), |v| list("n_levels", v))?;
    if let Some(bad) = n_levels.iter().find(|&&n| n < 2) {
        return Err(Error::Config(format!("n_levels entries must be >= 2, got {bad}")));
    }
    let sweep: SweepAxis = get("sweep").unwrap_or("battery").parse()?;
    let sweep_values: Vec<f64> = match get("sweep_values") {
        Some(v) => list("sweep_values", v)?,
        None => sweep.default_values(),
    };
    if let Some(bad) = sweep_values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::Config(format!("sweep values must be positive, got {bad}")));
    }
    let blocks: u64 = get("blocks").map_or(Ok(100_000), |v| number("blocks", v))?;
    if blocks == 0 {
        return Err(Error::Config("blocks must be positive".into()));
    }
    let seed = get("seed").map_or(Ok(1), |v| number("seed", v))?;
    let out = match get("out") {
        None | Some("-") | Some("") => None,
        Some(p) => Some(PathBuf::from(p)),
    };
    let rounding = match get("round_exact_up").unwrap_or("true") {
        "true" => Rounding::ExactUp,
        "false" => Rounding::ExactStay,
        other => return Err(Error::Config(format!("round_exact_up: expected true or false, got {other:?}"))),
    };
    Ok(ExperimentConfig {
        params,
        n_channel_states,
        n_levels,
        sweep,
        sweep_values,
        blocks,
        seed,
        out,
        rounding,
    })
}

impl ExperimentConfig {
    /// System parameters at one sweep point.
    pub fn params_at(&self, sweep_value: f64) -> Result<SystemParams> {
        match self.sweep {
            SweepAxis::Battery => self.params.with_battery_capacity(sweep_value),
            SweepAxis::Power => self.params.with_source_power(sweep_value),
        }
    }

    pub fn relay_at(&self, sweep_value: f64) -> Result<RelayModel> {
        RelayModel::rayleigh(self.params_at(sweep_value)?, self.n_channel_states)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowValues {
    pub p_heuristic_analytic: f64,
    pub p_heuristic_sim: f64,
    pub p_heuristic_sim_stderr: f64,
    pub p_upper_bound: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub n_levels: usize,
    pub outcome: std::result::Result<RowValues, String>,
}

impl SweepRow {
    pub fn is_ok(&self) -> bool {
        self.outcome.is_ok()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

/// Bound, closed-form heuristic and heuristic simulation at one point.
pub fn evaluate_point(relay: &RelayModel, n_levels: usize, rounding: Rounding, sim: &SimulationConfig) -> Result<RowValues> {
    let p_heuristic_analytic = relay.heuristic_average_success();
    let model = MdpModel::build(relay, n_levels, rounding)?;
    let result = policy_iteration(&model, &model.default_rule())?;
    let p_upper_bound = upper_bound(&model, &result)?;
    let simulated = simulate_original(relay, &HeuristicPolicy, sim)?;
    Ok(RowValues {
        p_heuristic_analytic,
        p_heuristic_sim: simulated.mean,
        p_heuristic_sim_stderr: simulated.stderr,
        p_upper_bound,
        iterations: result.iterations,
    })
}

/// Runs every `(sweep value, N_b)` cell. Cells are computed in parallel
/// and returned in sweep order; a failing cell is recorded, not fatal.
pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepTable> {
    if config.sweep_values.is_empty() || config.n_levels.is_empty() {
        return Err(Error::Config("empty sweep list".into()));
    }
    let cells: Vec<(f64, usize)> = config
        .sweep_values
        .iter()
        .flat_map(|&v| config.n_levels.iter().map(move |&n| (v, n)))
        .collect();
    let rows = cells
        .par_iter()
        .enumerate()
        .map(|(i, &(sweep_value, n_levels))| {
            let sim = SimulationConfig::new(config.blocks, config.seed.wrapping_add(i as u64));
            let outcome = config
                .relay_at(sweep_value)
                .and_then(|relay| evaluate_point(&relay, n_levels, config.rounding, &sim))
                .map_err(|e| format!("{} = {sweep_value}, n_levels = {n_levels}: {e}", config.sweep.name()))
                .and_then(|v| {
                    if v.p_upper_bound >= v.p_heuristic_analytic - DOMINANCE_TOLERANCE {
                        Ok(v)
                    } else {
                        Err(format!(
                            "bound {} below heuristic {}",
                            v.p_upper_bound, v.p_heuristic_analytic
                        ))
                    }
                });
            SweepRow {
                sweep_value,
                n_levels,
                outcome,
            }
        })
        .collect();
    Ok(SweepTable {
        axis: config.sweep,
        rows,
    })
}

/// Formats a float with 12 significant digits.
pub fn format_float(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exponent) {
        let decimals = (11 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

impl SweepTable {
    pub fn all_ok(&self) -> bool {
        self.rows.iter().all(SweepRow::is_ok)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(SWEEP_HEADER)?;
        for row in &self.rows {
            let mut rec = vec![
                self.axis.name().to_string(),
                format!("{}", row.sweep_value),
                row.n_levels.to_string(),
            ];
            match &row.outcome {
                Ok(v) => {
                    rec.extend(
                        [
                            v.p_heuristic_analytic,
                            v.p_heuristic_sim,
                            v.p_heuristic_sim_stderr,
                            v.p_upper_bound,
                        ]
                        .map(format_float),
                    );
                    rec.push("ok".into());
                }
                Err(msg) => {
                    rec.extend(std::iter::repeat_n(String::new(), 4));
                    rec.push(format!("failed: {msg}"));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

/// `100 (new - base) / base`, undefined when `base` is zero.
pub fn percent_gain(new: f64, base: f64) -> Option<f64> {
    if base == 0.0 {
        None
    } else {
        Some(100.0 * (new - base) / base)
    }
}

/// Bound gain between two consecutive sweep points at the same `N_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsecutiveGain {
    pub n_levels: usize,
    pub from_value: f64,
    pub to_value: f64,
    pub percent: Option<f64>,
}

/// Bound over heuristic, `100 (P_u - P_h) / P_h`, for one row.
#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicGap {
    pub sweep_value: f64,
    pub n_levels: usize,
    pub percent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub axis: SweepAxis,
    pub consecutive: Vec<ConsecutiveGain>,
    pub gaps: Vec<HeuristicGap>,
}

/// Consecutive-point bound gains per `N_b` and heuristic gaps per row.
/// Failed rows are skipped.
pub fn report_gains(table: &SweepTable) -> Result<GainReport> {
    let mut values: Vec<f64> = Vec::new();
    for r in &table.rows {
        if !values.contains(&r.sweep_value) {
            values.push(r.sweep_value);
        }
    }
    if values.len() < 2 {
        return Err(Error::InvalidArgument("gain report needs at least two sweep points".into()));
    }
    let mut levels: Vec<usize> = table.rows.iter().map(|r| r.n_levels).collect();
    levels.sort_unstable();
    levels.dedup();

    let mut consecutive = Vec::new();
    for &n in &levels {
        let series: Vec<(f64, f64)> = table
            .rows
            .iter()
            .filter(|r| r.n_levels == n)
            .filter_map(|r| r.outcome.as_ref().ok().map(|v| (r.sweep_value, v.p_upper_bound)))
            .collect();
        for pair in series.windows(2) {
            consecutive.push(ConsecutiveGain {
                n_levels: n,
                from_value: pair[0].0,
                to_value: pair[1].0,
                percent: percent_gain(pair[1].1, pair[0].1),
            });
        }
    }
    let gaps = table
        .rows
        .iter()
        .filter_map(|r| {
            r.outcome.as_ref().ok().map(|v| HeuristicGap {
                sweep_value: r.sweep_value,
                n_levels: r.n_levels,
                percent: percent_gain(v.p_upper_bound, v.p_heuristic_analytic),
            })
        })
        .collect();
    Ok(GainReport {
        axis: table.axis,
        consecutive,
        gaps,
    })
}

impl GainReport {
    /// Consecutive gains at `n_levels` that rise compared with the previous
    /// step, ignoring the first step. Returned as `(from, to)` of the
    /// offending step.
    pub fn diminishing_returns_violations(&self, n_levels: usize) -> Vec<(f64, f64)> {
        let steps: Vec<&ConsecutiveGain> = self.consecutive.iter().filter(|g| g.n_levels == n_levels).collect();
        let mut out = Vec::new();
        for pair in steps.windows(2).skip(1) {
            if let (Some(prev), Some(cur)) = (pair[0].percent, pair[1].percent) {
                if cur > prev + 1e-9 {
                    out.push((pair[1].from_value, pair[1].to_value));
                }
            }
        }
        out
    }
}

fn fmt_percent(p: Option<f64>) -> String {
    match p {
        Some(v) => format!("{v:.2}%"),
        None => "undefined".into(),
    }
}

impl fmt::Display for GainReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "upper-bound gain between consecutive {} values:", self.axis.name())?;
        for g in &self.consecutive {
            writeln!(
                f,
                "  N_b={:<3} {} -> {}: {}",
                g.n_levels,
                g.from_value,
                g.to_value,
                fmt_percent(g.percent)
            )?;
        }
        writeln!(f, "upper bound over heuristic:")?;
        for g in &self.gaps {
            writeln!(
                f,
                "  {}={} N_b={:<3} {}",
                self.axis.name(),
                g.sweep_value,
                g.n_levels,
                fmt_percent(g.percent)
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(items: &[(&str, &str)]) -> Vec<(String, String)> {
        items.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config(Some(""), &[]).unwrap();
        assert_eq!(c.n_channel_states, 200);
        assert_eq!(c.n_levels, vec![5, 9]);
        assert_eq!(c.sweep, SweepAxis::Battery);
        assert_eq!(c.sweep_values, vec![2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0]);
        assert_eq!(c.params.threshold_snr(), 7.0);
        assert_eq!(c.rounding, Rounding::ExactUp);
        assert_eq!(c.out, None);
    }

    #[test]
    fn file_parsing_and_overrides() {
        let text = "# scenario\nsource_power = 2  # mW\n\nsweep = power\nn_levels = 3, 4\nseed=7\n";
        let c = parse_config(Some(text), &[]).unwrap();
        assert_eq!(c.params.source_power(), 2.0);
        assert_eq!(c.sweep, SweepAxis::Power);
        assert_eq!(c.sweep_values, vec![0.5, 1.0, 2.0]);
        assert_eq!(c.n_levels, vec![3, 4]);
        assert_eq!(c.seed, 7);

        let c = parse_config(Some(text), &pairs(&[("seed", "11"), ("sweep_values", "1,3")])).unwrap();
        assert_eq!(c.seed, 11);
        assert_eq!(c.sweep_values, vec![1.0, 3.0]);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse_config(Some("n_levels = 0"), &[]), Err(Error::Config(_))));
        assert!(parse_config(Some("bogus = 1"), &[]).is_err());
        assert!(parse_config(None, &pairs(&[("bogus", "1")])).is_err());
        assert!(parse_config(Some("blocks = many"), &[]).is_err());
        assert!(parse_config(Some("sweep ="), &[]).is_err());
        assert!(parse_config(Some("sweep_values ="), &[]).is_err());
        assert!(parse_config(Some("just a line"), &[]).is_err());
        assert!(parse_config(Some("efficiency = 1.5"), &[]).is_err());
        assert!(parse_config(Some("round_exact_up = maybe"), &[]).is_err());
    }

    #[test]
    fn float_format_has_twelve_digits() {
        assert_eq!(format_float(0.5), "0.500000000000");
        assert_eq!(format_float(0.826150000000001), "0.826150000000");
        assert_eq!(format_float(12.5), "12.5000000000");
        assert_eq!(format_float(0.0), "0");
        assert_eq!(format_float(1.25e-7), "1.25000000000e-7");
    }

    fn synthetic(bounds: &[(f64, f64, f64)]) -> SweepTable {
        SweepTable {
            axis: SweepAxis::Battery,
            rows: bounds
                .iter()
                .map(|&(v, pu, ph)| SweepRow {
                    sweep_value: v,
                    n_levels: 5,
                    outcome: Ok(RowValues {
                        p_heuristic_analytic: ph,
                        p_heuristic_sim: ph,
                        p_heuristic_sim_stderr: 0.0,
                        p_upper_bound: pu,
                        iterations: 1,
                    }),
                })
                .collect(),
        }
    }

    #[test]
    fn gain_arithmetic() {
        let r = report_gains(&synthetic(&[(4.0, 0.2, 0.1), (10.0, 0.26, 0.0)])).unwrap();
        assert!((r.consecutive[0].percent.unwrap() - 30.0).abs() < 1e-9);
        assert!((r.gaps[0].percent.unwrap() - 100.0).abs() < 1e-9);
        assert_eq!(r.gaps[1].percent, None);
        assert!(r.to_string().contains("undefined"));

        let r = report_gains(&synthetic(&[(4.0, 0.3, 0.1), (10.0, 0.3, 0.1)])).unwrap();
        assert_eq!(r.consecutive[0].percent, Some(0.0));

        assert!(report_gains(&synthetic(&[(4.0, 0.3, 0.1)])).is_err());
    }

    #[test]
    fn diminishing_returns_check() {
        let r = report_gains(&synthetic(&[(2.0, 0.1, 0.1), (4.0, 0.2, 0.1), (6.0, 0.3, 0.1), (8.0, 0.36, 0.1), (10.0, 0.5, 0.1)]))
            .unwrap();
        // gains: 100, 50, 20, 38.9 -> only the last step rises
        assert_eq!(r.diminishing_returns_violations(5), vec![(8.0, 10.0)]);
    }

    #[test]
    fn empty_sweep_rejected() {
        let mut c = ExperimentConfig::default();
        c.sweep_values.clear();
        assert!(run_sweep(&c).is_err());
    }

    #[test]
    fn small_sweep_rows_and_csv() {
        let c = parse_config(
            Some("n_channel_states = 8\nsweep_values = 4, 10, 16\nn_levels = 3, 5\nblocks = 2000\n"),
            &[],
        )
        .unwrap();
        let t = run_sweep(&c).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert!(t.all_ok());
        let csv = t.to_csv_string().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), SWEEP_HEADER.join(","));
        assert_eq!(lines.count(), 6);
        assert_eq!(csv, run_sweep(&c).unwrap().to_csv_string().unwrap());
    }

    #[test]
    fn failed_rows_are_marked() {
        let table = SweepTable {
            axis: SweepAxis::Power,
            rows: vec![SweepRow { sweep_value: 1.0, n_levels: 5, outcome: Err("boom, badly".into()) }],
        };
        let csv = table.to_csv_string().unwrap();
        assert!(csv.contains("source_power,1,5,,,,,\"failed: boom, badly\""));
        assert!(!table.all_ok());
    }
}
