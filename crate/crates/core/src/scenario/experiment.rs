use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{db_to_linear, Point, ScenarioConfig};
use super::engine::{Method, Simulator, TrialState};
use super::geometry::{pathloss_db, place_clusters, ue_position, WindowGeometry};
use super::streams::{Purpose, StreamKey};
use crate::error::{config_err, Error, Result};
use crate::rate::{se_uatf_subcarrier, UatfAccumulator};

/// Upper bound on the number of trial groups used for jackknife intervals.
pub const MAX_JACKKNIFE_GROUPS: usize = 20;

const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Experiment {
    SeVsTime,
    SeVsSnr,
}

impl Experiment {
    pub fn label(self) -> &'static str {
        match self {
            Experiment::SeVsTime => "se_vs_time",
            Experiment::SeVsSnr => "se_vs_snr",
        }
    }

    fn code(self) -> u16 {
        match self {
            Experiment::SeVsTime => 1,
            Experiment::SeVsSnr => 2,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "se_vs_time" | "se-vs-time" => Ok(Experiment::SeVsTime),
            "se_vs_snr" | "se-vs-snr" => Ok(Experiment::SeVsSnr),
            _ => Err(Error::Config(format!("unknown experiment '{s}'"))),
        }
    }
}

/// Order in which trial groups are executed. Results do not depend on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExecutionOrder {
    #[default]
    Forward,
    Reverse,
    Shuffled(u64),
}

impl ExecutionOrder {
    fn permutation(self, n: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..n).collect();
        match self {
            ExecutionOrder::Forward => {}
            ExecutionOrder::Reverse => idx.reverse(),
            ExecutionOrder::Shuffled(seed) => idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed)),
        }
        idx
    }
}

/// One point of one curve.
///
/// `samples` are the values the interval is computed from: per-trial SE for
/// genie curves, jackknife pseudo-values for UatF curves. In both cases
/// `ci95_half_width = 1.96 * sd(samples) / sqrt(samples.len())`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeRecord {
    pub experiment: Experiment,
    pub sweep_value: f64,
    pub method: Method,
    pub mean_se: f64,
    pub trials: usize,
    pub ci95_half_width: f64,
    pub samples: Vec<f64>,
}

/// SE of one block index at one sweep point, overhead factor applied.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockSe {
    pub sweep_index: usize,
    pub method: Method,
    pub tau: usize,
    pub uatf: f64,
    pub genie: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub experiment: Experiment,
    /// The curves as reported: genie SE for `ideal_dbf`, UatF SE otherwise.
    pub records: Vec<SeRecord>,
    /// UatF SE of every method.
    pub uatf: Vec<SeRecord>,
    /// Genie SE of every method's own designs.
    pub genie: Vec<SeRecord>,
    pub blocks: Vec<BlockSe>,
    pub overhead: f64,
    pub jackknife_groups: usize,
}

impl ExperimentOutcome {
    pub fn find<'a>(records: &'a [SeRecord], method: Method, sweep_index: usize) -> &'a SeRecord {
        records.iter().filter(|r| r.method == method).nth(sweep_index).expect("record exists")
    }
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); zero for one sample.
pub fn sample_sd(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

pub fn ci95_half_width(x: &[f64]) -> f64 {
    Z95 * sample_sd(x) / (x.len() as f64).sqrt()
}

/// Contiguous trial ranges, `groups` of them, sizes differing by at most one.
pub fn trial_groups(trials: usize, groups: usize) -> Vec<std::ops::Range<usize>> {
    (0..groups).map(|g| (g * trials / groups)..((g + 1) * trials / groups)).collect()
}

struct SweepPoint {
    value: f64,
    window: u32,
    key_sweep: u32,
    ue: Point,
    tx_power: f64,
}

struct Plan {
    experiment: Experiment,
    methods: Vec<Method>,
    points: Vec<SweepPoint>,
    ue_path: Vec<Point>,
    first_ue: Point,
}

/// Sums from one trial group at one sweep point.
struct GroupSums {
    /// `[method][tau][nu]`.
    uatf: Vec<UatfAccumulator>,
    /// `[trial][method]`, window-averaged genie SE before the overhead factor.
    genie: Vec<f64>,
    /// `[method][tau]`, block genie SE summed over trials.
    block_genie: Vec<f64>,
}

pub fn experiment_se_vs_time(cfg: &ScenarioConfig) -> Result<ExperimentOutcome> {
    experiment_se_vs_time_ordered(cfg, ExecutionOrder::Forward)
}

pub fn experiment_se_vs_time_ordered(cfg: &ScenarioConfig, order: ExecutionOrder) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let times = cfg.time_grid();
    let ue_path: Vec<Point> = times.iter().map(|&t| ue_position(t, cfg)).collect();
    let points = times
        .iter()
        .zip(&ue_path)
        .enumerate()
        .map(|(k, (&t, &ue))| SweepPoint { value: t, window: k as u32, key_sweep: k as u32, ue, tx_power: cfg.tx_power() })
        .collect();
    let plan = Plan {
        experiment: Experiment::SeVsTime,
        methods: Method::ALL.to_vec(),
        points,
        first_ue: ue_path[0],
        ue_path,
    };
    run_plan(cfg, &plan, order)
}

/// BS power that puts the received line-of-sight SNR at `snr_db`.
pub fn tx_power_for_snr(snr_db: f64, cfg: &ScenarioConfig, ue: Point) -> Result<f64> {
    let pl = pathloss_db(cfg.bs_position.distance(&ue), cfg.carrier_ghz)?;
    Ok(db_to_linear(snr_db + pl))
}

pub fn experiment_se_vs_snr(cfg: &ScenarioConfig, snr_grid_db: &[f64]) -> Result<ExperimentOutcome> {
    experiment_se_vs_snr_ordered(cfg, snr_grid_db, ExecutionOrder::Forward)
}

pub fn experiment_se_vs_snr_ordered(
    cfg: &ScenarioConfig,
    snr_grid_db: &[f64],
    order: ExecutionOrder,
) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if snr_grid_db.is_empty() {
        return config_err("SNR grid is empty");
    }
    let ue = ue_position(cfg.snr_time_s, cfg);
    let points = snr_grid_db
        .iter()
        .map(|&snr| Ok(SweepPoint { value: snr, window: 0, key_sweep: 0, ue, tx_power: tx_power_for_snr(snr, cfg, ue)? }))
        .collect::<Result<Vec<_>>>()?;
    let plan = Plan {
        experiment: Experiment::SeVsSnr,
        methods: vec![Method::IdealDbf, Method::ProposedFixedQ, Method::HbfProxy],
        points,
        ue_path: vec![ue],
        first_ue: ue,
    };
    run_plan(cfg, &plan, order)
}

fn run_plan(cfg: &ScenarioConfig, plan: &Plan, order: ExecutionOrder) -> Result<ExperimentOutcome> {
    if cfg.trials < 3 {
        return config_err(format!("UatF intervals need at least 3 trials, got {}", cfg.trials));
    }
    let rho = cfg.overhead()?;
    let groups = trial_groups(cfg.trials, cfg.trials.min(MAX_JACKKNIFE_GROUPS));
    let base = Simulator::new(cfg)?;
    let nm = plan.methods.len();
    let nb = cfg.blocks_per_window;
    let ns = cfg.num_subcarriers;
    let needs_frozen = plan.methods.contains(&Method::FixedQAndW);

    let mut uatf = Vec::new();
    let mut genie = Vec::new();
    let mut blocks = Vec::new();

    for (si, point) in plan.points.iter().enumerate() {
        let sim = base.clone().with_tx_power(point.tx_power);
        let run_group = |range: &std::ops::Range<usize>| -> Result<GroupSums> {
            let mut sums = GroupSums {
                uatf: vec![UatfAccumulator::new(cfg.num_streams); nm * nb * ns],
                genie: Vec::with_capacity(range.len() * nm),
                block_genie: vec![0.0; nm * nb],
            };
            for trial in range.clone() {
                let trial_key = StreamKey::new(cfg.seed, plan.experiment.code(), trial as u64);
                let scatterers = place_clusters(
                    &mut trial_key.rng(Purpose::Clusters),
                    cfg.bs_position,
                    &plan.ue_path,
                    cfg.num_clusters,
                    cfg.cluster_margin_m,
                )?;
                let mut state = if needs_frozen && si > 0 {
                    let g0 = WindowGeometry::build(cfg, 0, plan.first_ue, &scatterers)?;
                    sim.initial_state(&g0, trial_key)?
                } else {
                    TrialState::default()
                };
                let geometry = WindowGeometry::build(cfg, point.window as usize, point.ue, &scatterers)?;
                let key = trial_key.at(point.key_sweep, point.window);
                let windows = sim.run_window_methods(&geometry, &plan.methods, key, &mut state)?;
                for (mi, w) in windows.iter().enumerate() {
                    sums.genie.push(w.mean_genie());
                    for (tau, b) in w.per_block.iter().enumerate() {
                        sums.block_genie[mi * nb + tau] += b.mean_genie();
                        for (nu, sample) in b.uatf.iter().enumerate() {
                            sums.uatf[(mi * nb + tau) * ns + nu].push(sample);
                        }
                    }
                }
            }
            Ok(sums)
        };

        let perm = order.permutation(groups.len());
        let mut done: Vec<(usize, Result<GroupSums>)> =
            perm.par_iter().map(|&g| (g, run_group(&groups[g]))).collect();
        done.sort_by_key(|(g, _)| *g);
        let parts = done.into_iter().map(|(_, r)| r).collect::<Result<Vec<_>>>()?;

        let mut total = vec![UatfAccumulator::new(cfg.num_streams); nm * nb * ns];
        let mut block_genie = vec![0.0; nm * nb];
        for part in &parts {
            for (t, p) in total.iter_mut().zip(&part.uatf) {
                t.merge(p);
            }
            for (t, p) in block_genie.iter_mut().zip(&part.block_genie) {
                *t += p;
            }
        }

        for (mi, &method) in plan.methods.iter().enumerate() {
            let cells = mi * nb * ns..(mi + 1) * nb * ns;
            let per_block = uatf_per_block(&total[cells.clone()], nb, ns, rho)?;
            for (tau, &u) in per_block.iter().enumerate() {
                blocks.push(BlockSe {
                    sweep_index: si,
                    method,
                    tau,
                    uatf: u,
                    genie: rho * block_genie[mi * nb + tau] / cfg.trials as f64,
                });
            }
            let theta = mean(&per_block);
            let pseudo = if parts.len() < 2 {
                vec![theta]
            } else {
                let g = parts.len() as f64;
                parts
                    .iter()
                    .map(|part| {
                        let rest: Vec<UatfAccumulator> =
                            total[cells.clone()].iter().zip(&part.uatf[cells.clone()]).map(|(t, p)| t.without(p)).collect();
                        let loo = mean(&uatf_per_block(&rest, nb, ns, rho)?);
                        Ok(g * theta - (g - 1.0) * loo)
                    })
                    .collect::<Result<Vec<_>>>()?
            };
            uatf.push(SeRecord {
                experiment: plan.experiment,
                sweep_value: point.value,
                method,
                mean_se: theta,
                trials: cfg.trials,
                ci95_half_width: ci95_half_width(&pseudo),
                samples: pseudo,
            });

            let per_trial: Vec<f64> =
                parts.iter().flat_map(|p| p.genie.chunks(nm).map(move |row| rho * row[mi])).collect();
            genie.push(SeRecord {
                experiment: plan.experiment,
                sweep_value: point.value,
                method,
                mean_se: mean(&per_trial),
                trials: cfg.trials,
                ci95_half_width: ci95_half_width(&per_trial),
                samples: per_trial,
            });
        }
    }

    let records = uatf
        .iter()
        .zip(&genie)
        .map(|(u, g)| if u.method == Method::IdealDbf { g.clone() } else { u.clone() })
        .collect();
    Ok(ExperimentOutcome {
        experiment: plan.experiment,
        records,
        uatf,
        genie,
        blocks,
        overhead: rho,
        jackknife_groups: groups.len(),
    })
}

/// UatF SE of each block, averaged over subcarriers, overhead applied.
fn uatf_per_block(acc: &[UatfAccumulator], blocks: usize, subcarriers: usize, rho: f64) -> Result<Vec<f64>> {
    (0..blocks)
        .map(|tau| {
            let mut sum = 0.0;
            for a in &acc[tau * subcarriers..(tau + 1) * subcarriers] {
                sum += se_uatf_subcarrier(&a.statistics()?)?;
            }
            Ok(rho * sum / subcarriers as f64)
        })
        .collect()
}
