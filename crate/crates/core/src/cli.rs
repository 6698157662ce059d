//! Command-line entry point.

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::io::{parse_grid, write_results, ConfigBuilder, RunManifest};
use crate::scenario::{experiment_se_vs_snr, experiment_se_vs_time, ExperimentOutcome, ScenarioConfig};
use crate::selftest;

#[derive(Debug, Parser)]
#[command(name = "twostage-sim", version, about = "Two-stage digital beamforming Monte Carlo simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// `key = value` configuration file; missing keys take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Base parameter set the file and overrides are applied to.
    #[arg(long, global = true, value_enum, default_value_t = Preset::Full)]
    pub preset: Preset,

    /// Extra `key=value` setting, applied after the file. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory for results.csv and manifest.txt.
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,

    #[arg(long, global = true)]
    pub trials: Option<usize>,

    /// SNR sweep in dB as `start:stop:step`.
    #[arg(long = "snr-grid", global = true, allow_hyphen_values = true)]
    pub snr_grid: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 64 x 16 antennas, 512 subcarriers.
    Full,
    /// 16 x 8 antennas, 32 subcarriers.
    Desk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Spectral efficiency along the UE trajectory.
    SeVsTime,
    /// Spectral efficiency against line-of-sight SNR at a fixed position.
    SeVsSnr,
    /// Runs the built-in oracle checks.
    Selftest,
}

/// Resolves the configuration from preset, file and command-line flags.
pub fn resolve_config(cli: &Cli) -> Result<(ScenarioConfig, String)> {
    let base = match cli.preset {
        Preset::Full => ScenarioConfig::default(),
        Preset::Desk => ScenarioConfig::desk(),
    };
    let mut builder = ConfigBuilder::new(base);
    let mut source = "defaults".to_string();
    if let Some(path) = &cli.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        builder.apply_text(&text, "")?;
        source = path.display().to_string();
    }
    let mut extra = cli.overrides.clone();
    if let Some(seed) = cli.seed {
        extra.push(format!("seed={seed}"));
    }
    if let Some(trials) = cli.trials {
        extra.push(format!("trials={trials}"));
    }
    if let Some(grid) = &cli.snr_grid {
        parse_grid(grid).map_err(Error::Config)?;
        extra.push(format!("snr_grid_dB={grid}"));
    }
    builder.apply_overrides(&extra)?;
    if cli.preset == Preset::Desk {
        source.push_str(" (desk preset)");
    }
    Ok((builder.finish()?, source))
}

fn run(cli: &Cli) -> Result<()> {
    if cli.command == Command::Selftest {
        let outcomes = selftest::run_all();
        let mut failed = 0;
        for o in &outcomes {
            match &o.result {
                Ok(()) => println!("PASS  {}", o.name),
                Err(e) => {
                    failed += 1;
                    println!("FAIL  {}: {e}", o.name);
                }
            }
        }
        println!("{} of {} checks passed", outcomes.len() - failed, outcomes.len());
        return if failed == 0 { Ok(()) } else { Err(Error::Config(format!("{failed} selftest checks failed"))) };
    }

    let (cfg, source) = resolve_config(cli)?;
    fs::create_dir_all(&cli.out)
        .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    let start = Instant::now();
    let outcome: ExperimentOutcome = match cli.command {
        Command::SeVsTime => experiment_se_vs_time(&cfg)?,
        Command::SeVsSnr => experiment_se_vs_snr(&cfg, &cfg.snr_grid_db.values())?,
        Command::Selftest => unreachable!("handled above"),
    };
    let wall = start.elapsed().as_secs_f64();
    write_results(&outcome.records, &cli.out.join("results.csv"))?;
    let manifest = RunManifest {
        seed: cfg.seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_s: wall,
        experiment: outcome.experiment.label().to_string(),
        config_source: source,
        notes: vec![
            "snr_definition: line-of-sight received SNR = P_t - pathloss(BS-UE distance) - noise power, in dB; \
             swept by scaling P_t"
                .into(),
            format!(
                "overhead_factor: {} = 1 - (t_p + N_s)/t_c, applied to every method including ideal_dbf",
                outcome.overhead
            ),
            format!("data_symbols_per_block: {}", cfg.data_symbols()),
            "ideal_dbf reports the perfect-CSI rate; other methods report the use-and-then-forget rate".into(),
            format!(
                "ci95: genie curves use per-trial values; UatF curves use delete-a-group jackknife over {} trial groups",
                outcome.jackknife_groups
            ),
        ],
        config_echo: cfg,
    };
    manifest.write(&cli.out.join("manifest.txt"))?;
    Ok(())
}

/// Parses `args` (including the program name) and runs; returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
