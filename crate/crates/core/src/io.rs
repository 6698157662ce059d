//! Configuration text, run manifest and CSV output.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scenario::{Grid, Point, ScenarioConfig, SeRecord};

pub const CSV_HEADER: &str = "experiment,sweep_value,method,mean_se_bits_per_symbol,trials,ci95_half_width";

/// Every recognised configuration key, in manifest order.
pub const KEYS: &[&str] = &[
    "N_t",
    "N_r",
    "N_c",
    "N_s",
    "S",
    "L",
    "f_c_GHz",
    "antenna_spacing",
    "P_t_dBm",
    "P_r_dBm",
    "noise_power_dBm",
    "t_p",
    "t_c",
    "blocks_per_window",
    "speed_mps",
    "bs_position",
    "ue_start",
    "N_cl",
    "has_los",
    "nlos_relative_power",
    "tap_decay",
    "cluster_margin_m",
    "pilot_noise",
    "trials",
    "seed",
    "duration_s",
    "time_points",
    "snr_time_s",
    "snr_grid_dB",
];

fn parse_usize(v: &str) -> std::result::Result<usize, String> {
    v.parse().map_err(|_| format!("expected a nonnegative integer, got '{v}'"))
}

fn parse_f64(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("expected a finite number, got '{v}'")),
    }
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("expected true or false, got '{v}'")),
    }
}

fn parse_point(v: &str) -> std::result::Result<Point, String> {
    let inner = v.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => Ok(Point::new(parse_f64(x)?, parse_f64(y)?)),
        _ => Err(format!("expected 'x, y', got '{v}'")),
    }
}

/// Parses `start:stop:step`.
pub fn parse_grid(v: &str) -> std::result::Result<Grid, String> {
    let parts: Vec<&str> = v.split(':').map(str::trim).collect();
    match parts.as_slice() {
        [a, b, c] => Ok(Grid { start: parse_f64(a)?, stop: parse_f64(b)?, step: parse_f64(c)? }),
        _ => Err(format!("expected 'start:stop:step', got '{v}'")),
    }
}

fn set_key(cfg: &mut ScenarioConfig, key: &str, v: &str) -> std::result::Result<(), String> {
    match key {
        "N_t" => cfg.num_tx = parse_usize(v)?,
        "N_r" => cfg.num_rx = parse_usize(v)?,
        "N_c" => cfg.num_compressed = parse_usize(v)?,
        "N_s" => cfg.num_streams = parse_usize(v)?,
        "S" => cfg.num_subcarriers = parse_usize(v)?,
        "L" => cfg.num_taps = parse_usize(v)?,
        "f_c_GHz" => cfg.carrier_ghz = parse_f64(v)?,
        "antenna_spacing" => cfg.antenna_spacing = parse_f64(v)?,
        "P_t_dBm" => cfg.tx_power_dbm = parse_f64(v)?,
        "P_r_dBm" => cfg.ue_power_dbm = parse_f64(v)?,
        "noise_power_dBm" => cfg.noise_power_dbm = parse_f64(v)?,
        "t_p" => cfg.pilot_length = parse_usize(v)?,
        "t_c" => cfg.coherence_symbols = parse_usize(v)?,
        "blocks_per_window" => cfg.blocks_per_window = parse_usize(v)?,
        "speed_mps" => cfg.speed_mps = parse_f64(v)?,
        "bs_position" => cfg.bs_position = parse_point(v)?,
        "ue_start" => cfg.ue_start = parse_point(v)?,
        "N_cl" => cfg.num_clusters = parse_usize(v)?,
        "has_los" => cfg.has_los = parse_bool(v)?,
        "nlos_relative_power" => cfg.nlos_relative_power = parse_f64(v)?,
        "tap_decay" => cfg.tap_decay = parse_f64(v)?,
        "cluster_margin_m" => cfg.cluster_margin_m = parse_f64(v)?,
        "pilot_noise" => cfg.pilot_noise = parse_bool(v)?,
        "trials" => cfg.trials = parse_usize(v)?,
        "seed" => cfg.seed = v.parse().map_err(|_| format!("expected an unsigned 64-bit seed, got '{v}'"))?,
        "duration_s" => cfg.duration_s = parse_f64(v)?,
        "time_points" => cfg.time_points = parse_usize(v)?,
        "snr_time_s" => cfg.snr_time_s = parse_f64(v)?,
        "snr_grid_dB" => cfg.snr_grid_db = parse_grid(v)?,
        _ => return Err(format!("unknown key '{key}'")),
    }
    Ok(())
}

/// Builds a configuration from `key = value` text on top of `base`.
///
/// Lines are numbered from 1; `#` starts a comment. `t_p` follows `N_r`
/// unless set explicitly.
pub fn parse_config_text(text: &str, base: ScenarioConfig) -> Result<ScenarioConfig> {
    let mut builder = ConfigBuilder::new(base);
    builder.apply_text(text, "")?;
    builder.finish()
}

pub fn parse_config_file(path: &Path, base: ScenarioConfig) -> Result<ScenarioConfig> {
    parse_config_text(&fs::read_to_string(path)?, base)
}

/// Incremental parser: a config file followed by `key=value` overrides.
#[derive(Debug, Clone)]
pub struct ConfigBuilder {
    cfg: ScenarioConfig,
    pilot_length_follows_rx: bool,
    lines: HashMap<&'static str, usize>,
}

impl ConfigBuilder {
    pub fn new(base: ScenarioConfig) -> Self {
        let follows = base.pilot_length == base.num_rx;
        Self { cfg: base, pilot_length_follows_rx: follows, lines: HashMap::new() }
    }

    /// Applies one source. `label` prefixes error messages.
    pub fn apply_text(&mut self, text: &str, label: &str) -> Result<()> {
        let mut seen: HashMap<&'static str, usize> = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| Error::Parse { line, message: format!("{label}{message}") };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| err(format!("expected 'key = value', got '{content}'")))?;
            let (k, v) = (k.trim(), v.trim());
            let key = *KEYS.iter().find(|&&name| name == k).ok_or_else(|| err(format!("unknown key '{k}'")))?;
            if let Some(prev) = seen.insert(key, line) {
                return Err(err(format!("key '{key}' already set on line {prev}")));
            }
            set_key(&mut self.cfg, key, v).map_err(err)?;
            if key == "t_p" {
                self.pilot_length_follows_rx = false;
            }
            self.lines.insert(key, line);
        }
        Ok(())
    }

    /// Applies `key=value` strings, numbered from 1 in the order given.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        self.apply_text(&overrides.join("\n"), "override: ")
    }

    pub fn finish(mut self) -> Result<ScenarioConfig> {
        if self.pilot_length_follows_rx {
            self.cfg.pilot_length = self.cfg.num_rx;
        }
        match self.cfg.check_invariants() {
            Ok(()) => Ok(self.cfg),
            Err(v) => {
                let line = v.keys.iter().filter_map(|k| self.lines.get(k)).copied().max().unwrap_or(0);
                Err(Error::Parse { line, message: v.message })
            }
        }
    }
}

fn fmt_point(p: Point) -> String {
    format!("{}, {}", p.x, p.y)
}

/// `key = value` lines for every key, parseable by [`parse_config_text`].
pub fn config_echo(cfg: &ScenarioConfig) -> String {
    let values: Vec<String> = vec![
        cfg.num_tx.to_string(),
        cfg.num_rx.to_string(),
        cfg.num_compressed.to_string(),
        cfg.num_streams.to_string(),
        cfg.num_subcarriers.to_string(),
        cfg.num_taps.to_string(),
        cfg.carrier_ghz.to_string(),
        cfg.antenna_spacing.to_string(),
        cfg.tx_power_dbm.to_string(),
        cfg.ue_power_dbm.to_string(),
        cfg.noise_power_dbm.to_string(),
        cfg.pilot_length.to_string(),
        cfg.coherence_symbols.to_string(),
        cfg.blocks_per_window.to_string(),
        cfg.speed_mps.to_string(),
        fmt_point(cfg.bs_position),
        fmt_point(cfg.ue_start),
        cfg.num_clusters.to_string(),
        cfg.has_los.to_string(),
        cfg.nlos_relative_power.to_string(),
        cfg.tap_decay.to_string(),
        cfg.cluster_margin_m.to_string(),
        cfg.pilot_noise.to_string(),
        cfg.trials.to_string(),
        cfg.seed.to_string(),
        cfg.duration_s.to_string(),
        cfg.time_points.to_string(),
        cfg.snr_time_s.to_string(),
        format!("{}:{}:{}", cfg.snr_grid_db.start, cfg.snr_grid_db.stop, cfg.snr_grid_db.step),
    ];
    let mut out = String::new();
    for (k, v) in KEYS.iter().zip(values) {
        let _ = writeln!(out, "{k} = {v}");
    }
    out
}

/// Run metadata written next to the results.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_echo: ScenarioConfig,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time_s: f64,
    pub experiment: String,
    pub config_source: String,
    pub notes: Vec<String>,
}

impl RunManifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# tool_version: {}", self.tool_version);
        let _ = writeln!(out, "# experiment: {}", self.experiment);
        let _ = writeln!(out, "# config_source: {}", self.config_source);
        let _ = writeln!(out, "# seed: {}", self.seed);
        let _ = writeln!(out, "# wall_time_s: {:.3}", self.wall_time_s);
        for n in &self.notes {
            let _ = writeln!(out, "# {n}");
        }
        out.push_str(&config_echo(&self.config_echo));
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// `x` with 9 significant digits, in the style of C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..9).contains(&exp) {
        let mant = trim_fraction(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (8 - exp).max(0) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// CSV text, rows sorted by experiment, sweep value and method.
pub fn render_results(records: &[SeRecord]) -> String {
    let mut rows: Vec<&SeRecord> = records.iter().collect();
    rows.sort_by(|a, b| {
        a.experiment
            .label()
            .cmp(b.experiment.label())
            .then(a.sweep_value.total_cmp(&b.sweep_value))
            .then(a.method.label().cmp(b.method.label()))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.experiment.label(),
            format_sig9(r.sweep_value),
            r.method.label(),
            format_sig9(r.mean_se),
            r.trials,
            format_sig9(r.ci95_half_width)
        );
    }
    out
}

pub fn write_results(records: &[SeRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(Error::Config("no records to write".into()));
    }
    fs::write(path, render_results(records))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Experiment, Method};

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config_text("", ScenarioConfig::default()).unwrap(), ScenarioConfig::default());
        let cfg = parse_config_text("# nothing\n\n", ScenarioConfig::default()).unwrap();
        assert_eq!(cfg.pilot_length, 16);
    }

    #[test]
    fn pilot_length_follows_rx() {
        let cfg = parse_config_text("N_r = 8\nN_c = 4", ScenarioConfig::default()).unwrap();
        assert_eq!(cfg.pilot_length, 8);
        let cfg = parse_config_text("N_r = 8\nt_p = 12", ScenarioConfig::default()).unwrap();
        assert_eq!(cfg.pilot_length, 12);
    }

    #[test]
    fn invariant_error_has_line() {
        let e = parse_config_text("# header\nN_c = 20\n", ScenarioConfig::default()).unwrap_err();
        match e {
            Error::Parse { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("N_s ≤ N_c ≤ N_r"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_and_bad_values() {
        let e = parse_config_text("N_t = 8\nfoo = 1", ScenarioConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let e = parse_config_text("speed_mps = fast", ScenarioConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }));
        let e = parse_config_text("N_t = 8\nN_t = 9", ScenarioConfig::default()).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        assert!(parse_config_text("N_t 8", ScenarioConfig::default()).is_err());
    }

    #[test]
    fn echo_roundtrips() {
        let cfg = parse_config_text("speed_mps = 5\nue_start = (20, 0.5)\nsnr_grid_dB = -10:20:2.5", ScenarioConfig::desk())
            .unwrap();
        let echo = config_echo(&cfg);
        assert!(echo.contains("speed_mps = 5\n"));
        let back = parse_config_text(&echo, ScenarioConfig::default()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn overrides_win_over_file() {
        let mut b = ConfigBuilder::new(ScenarioConfig::default());
        b.apply_text("trials = 10", "").unwrap();
        b.apply_overrides(&["trials=20".into()]).unwrap();
        assert_eq!(b.finish().unwrap().trials, 20);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-10.0), "-10");
        assert_eq!(format_sig9(3.14159265358979), "3.14159265");
        assert_eq!(format_sig9(123456789.4), "123456789");
        assert_eq!(format_sig9(1234567890.0), "1.23456789e+09");
        assert_eq!(format_sig9(0.000123456789123), "0.000123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-07");
        assert_eq!(format_sig9(0.5), "0.5");
    }

    fn rec(exp: Experiment, x: f64, m: Method) -> SeRecord {
        SeRecord {
            experiment: exp,
            sweep_value: x,
            method: m,
            mean_se: 1.0,
            trials: 3,
            ci95_half_width: 0.1,
            samples: vec![1.0; 3],
        }
    }

    #[test]
    fn csv_sorted_regardless_of_input_order() {
        let a = vec![
            rec(Experiment::SeVsTime, 0.5, Method::IdealDbf),
            rec(Experiment::SeVsSnr, 10.0, Method::HbfProxy),
            rec(Experiment::SeVsSnr, -5.0, Method::ProposedFixedQ),
            rec(Experiment::SeVsTime, 0.0, Method::FixedQAndW),
        ];
        let mut b = a.clone();
        b.reverse();
        let text = render_results(&a);
        assert_eq!(text, render_results(&b));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[1].starts_with("se_vs_snr,-5,"));
        assert!(lines[4].starts_with("se_vs_time,0.5,ideal_dbf"));
    }

    #[test]
    fn single_record_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_results(&[rec(Experiment::SeVsSnr, 0.0, Method::IdealDbf)], &p).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().lines().count(), 2);
        assert!(write_results(&[], &p).is_err());
    }
}
