//! Wideband clustered mmWave channel.
//!
//! A block's channel on subcarrier `nu` is a sum over propagation paths of
//! `gain_i[nu] * a_r(aoa_i) * a_t(aod_i)^T`, where `gain_i[nu]` is the
//! `S`-point DFT of the path's tap-domain fading. Path 0 is the
//! line-of-sight path when present; its tap profile is deterministic.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;

use crate::error::{config_err, Error, Result};
use crate::linalg::{CMat, CVec, ZERO};

/// Uniform linear array, spacing given in carrier wavelengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArrayGeometry {
    num_antennas: usize,
    spacing_over_wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, spacing_over_wavelength: f64) -> Result<Self> {
        if num_antennas == 0 {
            return config_err("array needs at least one antenna");
        }
        if !(spacing_over_wavelength > 0.0 && spacing_over_wavelength.is_finite()) {
            return config_err(format!("antenna spacing must be positive, got {spacing_over_wavelength}"));
        }
        Ok(Self { num_antennas, spacing_over_wavelength })
    }

    /// Half-wavelength spaced ULA.
    pub fn half_wavelength(num_antennas: usize) -> Result<Self> {
        Self::new(num_antennas, 0.5)
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn spacing_over_wavelength(&self) -> f64 {
        self.spacing_over_wavelength
    }
}

/// Angles and tap powers of every propagation path in one block.
///
/// Row `i` of `tap_power` holds `E|alpha_i[l]|^2` for `l = 0..L`. When
/// `has_los` is set, row 0 is the line-of-sight path and carries power only
/// at tap 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    aoa_rad: Vec<f64>,
    aod_rad: Vec<f64>,
    tap_power: Vec<Vec<f64>>,
    has_los: bool,
}

/// A scattering cluster before its power is spread over the taps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathSpec {
    pub aoa_rad: f64,
    pub aod_rad: f64,
    pub power: f64,
}

fn check_angle(angle: f64) -> Result<()> {
    if angle.is_finite() && angle.abs() < PI / 2.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("angle {angle} rad is outside (-pi/2, pi/2)")))
    }
}

impl ClusterSet {
    pub fn new(aoa_rad: Vec<f64>, aod_rad: Vec<f64>, tap_power: Vec<Vec<f64>>, has_los: bool) -> Result<Self> {
        let paths = aoa_rad.len();
        if aod_rad.len() != paths || tap_power.len() != paths {
            return config_err("cluster angle and power arrays differ in length");
        }
        if has_los && paths == 0 {
            return config_err("line-of-sight flag set but no paths given");
        }
        let taps = tap_power.first().map_or(1, Vec::len);
        if taps == 0 || tap_power.iter().any(|row| row.len() != taps) {
            return config_err("every path needs the same nonzero number of taps");
        }
        for (&a, &d) in aoa_rad.iter().zip(&aod_rad) {
            check_angle(a)?;
            check_angle(d)?;
        }
        if tap_power.iter().flatten().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return config_err("tap powers must be finite and nonnegative");
        }
        if has_los && tap_power[0][1..].iter().any(|&p| p != 0.0) {
            return config_err("line-of-sight path may only have power at tap 0");
        }
        Ok(Self { aoa_rad, aod_rad, tap_power, has_los })
    }

    /// Builds the path table from a line-of-sight path (power `beta_0`) and
    /// NLoS clusters whose total power is spread with an exponential profile.
    pub fn from_paths(los: Option<PathSpec>, nlos: &[PathSpec], num_taps: usize, tap_decay: f64) -> Result<Self> {
        if num_taps == 0 {
            return config_err("need at least one tap");
        }
        let mut aoa = Vec::with_capacity(nlos.len() + 1);
        let mut aod = Vec::with_capacity(nlos.len() + 1);
        let mut power = Vec::with_capacity(nlos.len() + 1);
        if let Some(p) = los {
            aoa.push(p.aoa_rad);
            aod.push(p.aod_rad);
            let mut row = vec![0.0; num_taps];
            row[0] = p.power;
            power.push(row);
        }
        for p in nlos {
            aoa.push(p.aoa_rad);
            aod.push(p.aod_rad);
            power.push(exponential_tap_profile(p.power, num_taps, tap_decay)?);
        }
        Self::new(aoa, aod, power, los.is_some())
    }

    pub fn has_los(&self) -> bool {
        self.has_los
    }

    /// Number of NLoS clusters, `N_cl`.
    pub fn num_clusters(&self) -> usize {
        self.aoa_rad.len() - usize::from(self.has_los)
    }

    /// Paths including the line-of-sight row.
    pub fn num_paths(&self) -> usize {
        self.aoa_rad.len()
    }

    pub fn num_taps(&self) -> usize {
        self.tap_power.first().map_or(0, Vec::len)
    }

    pub fn aoa_rad(&self) -> &[f64] {
        &self.aoa_rad
    }

    pub fn aod_rad(&self) -> &[f64] {
        &self.aod_rad
    }

    pub fn tap_power(&self) -> &[Vec<f64>] {
        &self.tap_power
    }

    pub fn los_power(&self) -> f64 {
        if self.has_los {
            self.tap_power[0][0]
        } else {
            0.0
        }
    }
}

/// Splits `total` over `num_taps` taps proportionally to `exp(-l / decay)`.
pub fn exponential_tap_profile(total: f64, num_taps: usize, decay: f64) -> Result<Vec<f64>> {
    if !(decay > 0.0) {
        return config_err(format!("tap decay must be positive, got {decay}"));
    }
    let shape: Vec<f64> = (0..num_taps).map(|l| (-(l as f64) / decay).exp()).collect();
    let norm: f64 = shape.iter().sum();
    Ok(shape.into_iter().map(|w| total * w / norm).collect())
}

/// Tap-domain small-scale fading, `taps[i][l] = alpha_i[l]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingRealization {
    pub taps: Vec<Vec<Complex64>>,
}

#[derive(Debug, Clone)]
pub struct ChannelBlock {
    pub block_index: usize,
    /// `H[nu]`, one `N_r x N_t` matrix per subcarrier.
    pub per_subcarrier: Vec<CMat>,
    pub clusters: ClusterSet,
    pub fading: FadingRealization,
}

impl ChannelBlock {
    pub fn num_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }
}

/// ULA response `[1, e^{j 2 pi d sin(phi)}, ..., e^{j 2 pi d (N-1) sin(phi)}]`.
pub fn array_response(geom: &ArrayGeometry, angle_rad: f64) -> Result<CVec> {
    check_angle(angle_rad)?;
    let step = 2.0 * PI * geom.spacing_over_wavelength * angle_rad.sin();
    Ok(CVec::from_iterator(
        geom.num_antennas,
        (0..geom.num_antennas).map(|n| Complex64::from_polar(1.0, step * n as f64)),
    ))
}

/// `out[nu] = sum_l taps[l] * exp(-j 2 pi l nu / S)`.
pub fn taps_to_subcarrier_gains(taps: &[Complex64], num_subcarriers: usize) -> Result<Vec<Complex64>> {
    if num_subcarriers == 0 {
        return config_err("need at least one subcarrier");
    }
    if taps.len() > num_subcarriers {
        return config_err(format!("{} taps exceed {} subcarriers", taps.len(), num_subcarriers));
    }
    let mut buf = vec![ZERO; num_subcarriers];
    buf[..taps.len()].copy_from_slice(taps);
    FftPlanner::new().plan_fft_forward(num_subcarriers).process(&mut buf);
    Ok(buf)
}

/// Draws `alpha_i[l] ~ CN(0, beta_i[l])` for NLoS paths; the line-of-sight
/// path gets `sqrt(beta_0)` at tap 0.
pub fn draw_fading<R: Rng + ?Sized>(rng: &mut R, clusters: &ClusterSet) -> FadingRealization {
    let taps = clusters
        .tap_power
        .iter()
        .enumerate()
        .map(|(i, row)| {
            if i == 0 && clusters.has_los {
                let mut out = vec![ZERO; row.len()];
                out[0] = Complex64::new(row[0].sqrt(), 0.0);
                out
            } else {
                row.iter()
                    .map(|&beta| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = rng.sample(StandardNormal);
                        Complex64::new(re, im) * (beta / 2.0).sqrt()
                    })
                    .collect()
            }
        })
        .collect();
    FadingRealization { taps }
}

/// `A_r` (`N_r x P`) and `A_t` (`N_t x P`), one steering column per path.
pub fn steering_matrices(rx: &ArrayGeometry, tx: &ArrayGeometry, clusters: &ClusterSet) -> Result<(CMat, CMat)> {
    let p = clusters.num_paths();
    let mut a_r = CMat::zeros(rx.num_antennas, p);
    let mut a_t = CMat::zeros(tx.num_antennas, p);
    for i in 0..p {
        a_r.set_column(i, &array_response(rx, clusters.aoa_rad[i])?);
        a_t.set_column(i, &array_response(tx, clusters.aod_rad[i])?);
    }
    Ok((a_r, a_t))
}

/// Per-subcarrier channel matrices from the sum of path outer products.
pub fn assemble_channel(
    rx: &ArrayGeometry,
    tx: &ArrayGeometry,
    clusters: &ClusterSet,
    fading: FadingRealization,
    num_subcarriers: usize,
    block_index: usize,
) -> Result<ChannelBlock> {
    if fading.taps.len() != clusters.num_paths() {
        return config_err(format!(
            "fading has {} paths, cluster set has {}",
            fading.taps.len(),
            clusters.num_paths()
        ));
    }
    if fading.taps.iter().any(|t| t.len() != clusters.num_taps()) {
        return config_err("fading tap count differs from the cluster set");
    }
    let mut outer = Vec::with_capacity(clusters.num_paths());
    let mut gains = Vec::with_capacity(clusters.num_paths());
    for (i, taps) in fading.taps.iter().enumerate() {
        let a_r = array_response(rx, clusters.aoa_rad[i])?;
        let a_t = array_response(tx, clusters.aod_rad[i])?;
        outer.push(&a_r * a_t.transpose());
        gains.push(taps_to_subcarrier_gains(taps, num_subcarriers)?);
    }
    let per_subcarrier = (0..num_subcarriers)
        .map(|nu| {
            let mut h = CMat::zeros(rx.num_antennas, tx.num_antennas);
            for (o, g) in outer.iter().zip(&gains) {
                h.zip_apply(o, |acc, x| *acc += g[nu] * x);
            }
            h
        })
        .collect();
    Ok(ChannelBlock { block_index, per_subcarrier, clusters: clusters.clone(), fading })
}
