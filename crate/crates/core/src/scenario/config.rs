use crate::error::{config_err, Result};
use crate::rate::overhead_factor;

/// A position in the horizontal plane, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Inclusive `start:stop:step` grid, e.g. an SNR sweep in dB.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as i64;
        (0..=n.max(0)).map(|k| self.start + k as f64 * self.step).collect()
    }
}

/// Every physical and simulation parameter of a run.
///
/// Powers are given in dBm and converted to noise-normalised linear values
/// with [`ScenarioConfig::tx_power`] and [`ScenarioConfig::ue_power`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_tx: usize,
    pub num_rx: usize,
    pub num_compressed: usize,
    pub num_streams: usize,
    pub num_subcarriers: usize,
    pub num_taps: usize,
    pub carrier_ghz: f64,
    pub antenna_spacing: f64,
    pub tx_power_dbm: f64,
    pub ue_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub pilot_length: usize,
    pub coherence_symbols: usize,
    pub blocks_per_window: usize,
    pub speed_mps: f64,
    pub bs_position: Point,
    pub ue_start: Point,
    pub num_clusters: usize,
    pub has_los: bool,
    pub nlos_relative_power: f64,
    pub tap_decay: f64,
    pub cluster_margin_m: f64,
    pub pilot_noise: bool,
    pub trials: usize,
    pub seed: u64,
    pub duration_s: f64,
    pub time_points: usize,
    pub snr_time_s: f64,
    pub snr_grid_db: Grid,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            num_tx: 64,
            num_rx: 16,
            num_compressed: 4,
            num_streams: 3,
            num_subcarriers: 512,
            num_taps: 6,
            carrier_ghz: 28.0,
            antenna_spacing: 0.5,
            tx_power_dbm: 30.0,
            ue_power_dbm: 23.0,
            noise_power_dbm: -87.0,
            pilot_length: 16,
            coherence_symbols: 190,
            blocks_per_window: 10,
            speed_mps: 5.0,
            bs_position: Point::new(0.0, 0.0),
            ue_start: Point::new(20.0, 0.0),
            num_clusters: 3,
            has_los: true,
            nlos_relative_power: 0.1,
            tap_decay: 2.0,
            cluster_margin_m: 10.0,
            pilot_noise: true,
            trials: 200,
            seed: 1,
            duration_s: 4.0,
            time_points: 9,
            snr_time_s: 3.0,
            snr_grid_db: Grid { start: -10.0, stop: 20.0, step: 5.0 },
        }
    }
}

impl ScenarioConfig {
    /// Reduced dimensions that run in seconds rather than hours.
    pub fn desk() -> Self {
        Self {
            num_tx: 16,
            num_rx: 8,
            num_compressed: 4,
            num_streams: 2,
            num_subcarriers: 32,
            num_taps: 4,
            pilot_length: 8,
            blocks_per_window: 5,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.check_invariants() {
            Ok(()) => Ok(()),
            Err(v) => config_err(v.message),
        }
    }

    /// Like [`ScenarioConfig::validate`], but reports which keys are involved.
    pub fn check_invariants(&self) -> std::result::Result<(), Violation> {
        let fail = |keys: &'static [&'static str], message: String| Err(Violation { keys, message });
        if self.num_streams == 0 || self.num_streams > self.num_compressed || self.num_compressed > self.num_rx {
            return fail(
                &["N_s", "N_c", "N_r"],
                format!(
                    "N_s ≤ N_c ≤ N_r violated (N_s = {}, N_c = {}, N_r = {})",
                    self.num_streams, self.num_compressed, self.num_rx
                ),
            );
        }
        if self.num_streams > self.num_tx {
            return fail(&["N_s", "N_t"], format!("N_s = {} exceeds N_t = {}", self.num_streams, self.num_tx));
        }
        if self.num_taps == 0 || self.num_taps > self.num_subcarriers {
            return fail(&["L", "S"], format!("need 1 ≤ L ≤ S, got L = {}, S = {}", self.num_taps, self.num_subcarriers));
        }
        if self.pilot_length < self.num_rx {
            return fail(&["t_p", "N_r"], format!("t_p = {} is shorter than N_r = {}", self.pilot_length, self.num_rx));
        }
        if let Err(e) = overhead_factor(self.pilot_length, self.num_streams, self.coherence_symbols) {
            return fail(&["t_c", "t_p", "N_s"], e.to_string());
        }
        if self.blocks_per_window == 0 {
            return fail(&["blocks_per_window"], "blocks_per_window must be at least 1".into());
        }
        if self.trials == 0 {
            return fail(&["trials"], "trials must be at least 1".into());
        }
        if self.time_points == 0 {
            return fail(&["time_points"], "time_points must be at least 1".into());
        }
        if !(self.antenna_spacing > 0.0) {
            return fail(&["antenna_spacing"], "antenna spacing must be positive".into());
        }
        if !(self.carrier_ghz > 0.0) {
            return fail(&["f_c_GHz"], "carrier frequency must be positive".into());
        }
        if !(self.tap_decay > 0.0) {
            return fail(&["tap_decay"], "tap decay must be positive".into());
        }
        if !(self.nlos_relative_power >= 0.0) {
            return fail(&["nlos_relative_power"], "NLoS relative power must be nonnegative".into());
        }
        if !(self.cluster_margin_m >= 0.0) {
            return fail(&["cluster_margin_m"], "cluster margin must be nonnegative".into());
        }
        if !(self.speed_mps >= 0.0) || !(self.duration_s >= 0.0) || !(self.snr_time_s >= 0.0) {
            return fail(&["speed_mps", "duration_s", "snr_time_s"], "speed and times must be nonnegative".into());
        }
        if !(self.snr_grid_db.step > 0.0) || self.snr_grid_db.stop < self.snr_grid_db.start {
            return fail(&["snr_grid_dB"], "SNR grid needs a positive step and stop ≥ start".into());
        }
        if !self.has_los && self.num_clusters == 0 {
            return fail(&["has_los", "N_cl"], "scenario has no propagation paths".into());
        }
        Ok(())
    }

    /// `P_t` normalised by the noise power.
    pub fn tx_power(&self) -> f64 {
        db_to_linear(self.tx_power_dbm - self.noise_power_dbm)
    }

    /// `P_r` normalised by the noise power.
    pub fn ue_power(&self) -> f64 {
        db_to_linear(self.ue_power_dbm - self.noise_power_dbm)
    }

    pub fn overhead(&self) -> Result<f64> {
        overhead_factor(self.pilot_length, self.num_streams, self.coherence_symbols)
    }

    /// Data symbols per block left after pilots.
    pub fn data_symbols(&self) -> usize {
        self.coherence_symbols.saturating_sub(self.pilot_length + self.num_streams)
    }

    /// Start times of the windows swept along the trajectory.
    pub fn time_grid(&self) -> Vec<f64> {
        if self.time_points == 1 {
            return vec![0.0];
        }
        let step = self.duration_s / (self.time_points - 1) as f64;
        (0..self.time_points).map(|k| k as f64 * step).collect()
    }
}

/// A broken invariant and the configuration keys it involves.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub keys: &'static [&'static str],
    pub message: String,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}
