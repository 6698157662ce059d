//! Orthonormal pilots and maximum-likelihood channel estimation.
//!
//! Every pilot phase has the same shape: the receiver observes
//! `Y = sqrt(p) * M * Phi + N` and estimates `M_hat = Y * Phi^+ / sqrt(p)`.
//! The four phases differ only in what `M` is, which pilot matrix is used and
//! the power scale `p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{config_err, Result};
use crate::linalg::CMat;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PilotPhase {
    /// UE -> BS on all `N_r` antennas; target `H^T`.
    UplinkFull,
    /// BS -> UE through the precoder; target `B = H F`.
    DownlinkPrecoded,
    /// UE -> BS through the first-stage combiner; target `G^T = (Q^H H)^T`.
    UplinkEffective,
    /// BS -> UE after first-stage combining; target `D = Q^H H F`.
    DownlinkEffective,
}

/// Pilot matrix with orthonormal rows (`Phi * Phi^H = I`).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    entries: CMat,
    role: PilotPhase,
}

impl PilotMatrix {
    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn role(&self) -> PilotPhase {
        self.role
    }

    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn length(&self) -> usize {
        self.entries.ncols()
    }
}

/// First `rows` rows of the unitary `length`-point DFT matrix.
pub fn make_pilot_matrix(rows: usize, length: usize, role: PilotPhase) -> Result<PilotMatrix> {
    if rows == 0 || rows > length {
        return config_err(format!("pilot matrix needs 1 <= rows <= length, got {rows} x {length}"));
    }
    let scale = 1.0 / (length as f64).sqrt();
    let entries = CMat::from_fn(rows, length, |r, c| {
        let k = (r * c) % length;
        Complex64::from_polar(scale, -2.0 * PI * k as f64 / length as f64)
    });
    Ok(PilotMatrix { entries, role })
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub estimate: CMat,
    pub phase: PilotPhase,
    pub pilot_power: f64,
    pub pilot_length: usize,
}

/// Receiver noise added to a pilot observation.
#[derive(Debug, Clone, Copy)]
pub enum PilotNoise<'a> {
    Off,
    /// i.i.d. `CN(0, 1)` entries.
    White,
    /// `Q^H n` with `n` i.i.d. `CN(0, 1)` of dimension `Q.nrows()`.
    Shaped(&'a CMat),
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(re * s, im * s)
    })
}

/// `Y = sqrt(power_scale) * M * Phi + N`.
pub fn simulate_pilot_rx<R: Rng + ?Sized>(
    m: &CMat,
    pilots: &PilotMatrix,
    power_scale: f64,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<CMat> {
    if m.ncols() != pilots.rows() {
        return config_err(format!(
            "target has {} columns but the pilot matrix has {} rows",
            m.ncols(),
            pilots.rows()
        ));
    }
    if !(power_scale > 0.0) {
        return config_err(format!("pilot power scale must be positive, got {power_scale}"));
    }
    let mut y = m * &pilots.entries * Complex64::new(power_scale.sqrt(), 0.0);
    match noise {
        PilotNoise::Off => {}
        PilotNoise::White => y += complex_gaussian(rng, m.nrows(), pilots.length()),
        PilotNoise::Shaped(q) => {
            if q.ncols() != m.nrows() {
                return config_err("noise shaping matrix does not match the target rows");
            }
            y += q.adjoint() * complex_gaussian(rng, q.nrows(), pilots.length());
        }
    }
    Ok(y)
}

/// `M_hat = Y * Phi^H / sqrt(power_scale)`; `Phi^H` is the pseudo-inverse of
/// a pilot matrix with orthonormal rows.
pub fn ml_estimate(y: &CMat, pilots: &PilotMatrix, power_scale: f64) -> Result<EstimationResult> {
    if y.ncols() != pilots.length() {
        return config_err(format!(
            "observation has {} columns, pilot length is {}",
            y.ncols(),
            pilots.length()
        ));
    }
    if !(power_scale > 0.0) {
        return config_err(format!("pilot power scale must be positive, got {power_scale}"));
    }
    let estimate = y * pilots.entries.adjoint() * Complex64::new(1.0 / power_scale.sqrt(), 0.0);
    Ok(EstimationResult { estimate, phase: pilots.role, pilot_power: power_scale, pilot_length: pilots.length() })
}

fn check_role(pilots: &PilotMatrix, want: PilotPhase) -> Result<()> {
    if pilots.role != want {
        return config_err(format!("expected {want:?} pilots, got {:?}", pilots.role));
    }
    Ok(())
}

/// Estimates `H` (`N_r x N_t`) from uplink pilots sent on all UE antennas.
/// `uplink_power` is `P_r` normalised by the noise power.
pub fn estimate_uplink_full<R: Rng + ?Sized>(
    h: &CMat,
    pilots: &PilotMatrix,
    uplink_power: f64,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<EstimationResult> {
    check_role(pilots, PilotPhase::UplinkFull)?;
    transposed_uplink(h, pilots, uplink_power, noise, rng)
}

/// Estimates the precoded channel `B = H F` (`N_r x N_s`).
pub fn estimate_downlink_precoded<R: Rng + ?Sized>(
    b: &CMat,
    pilots: &PilotMatrix,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<EstimationResult> {
    check_role(pilots, PilotPhase::DownlinkPrecoded)?;
    let p = b.ncols() as f64;
    let y = simulate_pilot_rx(b, pilots, p, noise, rng)?;
    ml_estimate(&y, pilots, p)
}

/// Estimates the effective channel `G = Q^H H` (`N_c x N_t`).
pub fn estimate_uplink_effective<R: Rng + ?Sized>(
    g: &CMat,
    pilots: &PilotMatrix,
    uplink_power: f64,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<EstimationResult> {
    check_role(pilots, PilotPhase::UplinkEffective)?;
    transposed_uplink(g, pilots, uplink_power, noise, rng)
}

/// Estimates the precoded effective channel `D = Q^H H F` (`N_c x N_s`).
/// Pass `PilotNoise::Shaped(Q)` to colour the noise by the combiner; for a
/// `Q` with orthonormal columns this is distributed as `PilotNoise::White`.
pub fn estimate_downlink_effective<R: Rng + ?Sized>(
    d: &CMat,
    pilots: &PilotMatrix,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<EstimationResult> {
    check_role(pilots, PilotPhase::DownlinkEffective)?;
    let p = d.ncols() as f64;
    let y = simulate_pilot_rx(d, pilots, p, noise, rng)?;
    ml_estimate(&y, pilots, p)
}

fn transposed_uplink<R: Rng + ?Sized>(
    target: &CMat,
    pilots: &PilotMatrix,
    uplink_power: f64,
    noise: PilotNoise<'_>,
    rng: &mut R,
) -> Result<EstimationResult> {
    let p = uplink_power * pilots.length() as f64;
    let y = simulate_pilot_rx(&target.transpose(), pilots, p, noise, rng)?;
    let mut est = ml_estimate(&y, pilots, p)?;
    est.estimate = est.estimate.transpose();
    Ok(est)
}

/// The four pilot matrices used by one link, shared by all subcarriers.
#[derive(Debug, Clone)]
pub struct PilotBook {
    pub uplink_full: PilotMatrix,
    pub downlink_precoded: PilotMatrix,
    pub uplink_effective: PilotMatrix,
    pub downlink_effective: PilotMatrix,
}

impl PilotBook {
    pub fn new(num_rx: usize, num_compressed: usize, num_streams: usize, pilot_length: usize) -> Result<Self> {
        Ok(Self {
            uplink_full: make_pilot_matrix(num_rx, pilot_length, PilotPhase::UplinkFull)?,
            downlink_precoded: make_pilot_matrix(num_streams, num_streams, PilotPhase::DownlinkPrecoded)?,
            uplink_effective: make_pilot_matrix(num_compressed, pilot_length, PilotPhase::UplinkEffective)?,
            downlink_effective: make_pilot_matrix(num_streams, num_streams, PilotPhase::DownlinkEffective)?,
        })
    }
}
