//! Spectral-efficiency evaluation.
//!
//! Two per-subcarrier rates are provided. The genie rate assumes the UE knows
//! the true channel. The use-and-then-forget (UatF) rate treats the mean of
//! the effective channel `E = W^H Q^H H F` as known and everything else,
//! including its fluctuation around the mean, as coloured noise.

use num_complex::Complex64;

use crate::error::{config_err, Error, Result};
use crate::linalg::{hermitian_eigenvalues, hermitian_part, log2det_hpd, log2det_whitened, pinv_full_column_rank, CMat};

/// Shapes: `H` is `N_r x N_t`, `F` is `N_t x N_s`, `Q` is `N_r x N_c`,
/// `W` is `N_c x N_s`.
#[derive(Debug, Clone, Copy)]
pub struct SePerfectInput<'a> {
    pub channel: &'a CMat,
    pub precoder: &'a CMat,
    pub first_stage: &'a CMat,
    pub second_stage: &'a CMat,
}

/// `log2 det(I + (QW)^+ H F F^H H^H ((QW)^+)^H)` for one realisation.
pub fn se_perfect_csi_subcarrier(input: SePerfectInput<'_>) -> Result<f64> {
    let SePerfectInput { channel: h, precoder: f, first_stage: q, second_stage: w } = input;
    if h.ncols() != f.nrows() || h.nrows() != q.nrows() || q.ncols() != w.nrows() || f.ncols() != w.ncols() {
        return config_err(format!(
            "inconsistent shapes H {:?}, F {:?}, Q {:?}, W {:?}",
            h.shape(),
            f.shape(),
            q.shape(),
            w.shape()
        ));
    }
    let qw = q * w;
    let combiner = pinv_full_column_rank(&qw)
        .map_err(|_| Error::Degenerate("combined receiver QW is rank deficient".into()))?;
    let a = combiner * h * f;
    let k = a.nrows();
    log2det_hpd(&hermitian_part(&(CMat::identity(k, k) + &a * a.adjoint())))
}

/// Genie rate for a combiner `(QW)^H` whose columns need not be orthonormal:
/// `log2 det(I + A^H C^{-1} A)` with `A = W^H Q^H H F` and combined noise
/// covariance `C = W^H Q^H Q W`. Equals [`se_perfect_csi_subcarrier`] when
/// `QW` has orthonormal columns.
pub fn se_perfect_csi_colored(input: SePerfectInput<'_>) -> Result<f64> {
    let SePerfectInput { channel: h, precoder: f, first_stage: q, second_stage: w } = input;
    if h.ncols() != f.nrows() || h.nrows() != q.nrows() || q.ncols() != w.nrows() || f.ncols() != w.ncols() {
        return config_err(format!(
            "inconsistent shapes H {:?}, F {:?}, Q {:?}, W {:?}",
            h.shape(),
            f.shape(),
            q.shape(),
            w.shape()
        ));
    }
    let qw = q * w;
    let a = qw.adjoint() * h * f;
    let noise = hermitian_part(&(qw.adjoint() * &qw));
    log2det_whitened(&a.adjoint(), &noise)
        .map_err(|_| Error::Degenerate("combined receiver QW is rank deficient".into()))
}

/// `rho = 1 - (t_p + N_s) / t_c`.
pub fn overhead_factor(pilot_length: usize, num_streams: usize, coherence_symbols: usize) -> Result<f64> {
    if pilot_length + num_streams >= coherence_symbols {
        return config_err(format!(
            "t_p + N_s = {} leaves no data symbols in a block of t_c = {coherence_symbols}",
            pilot_length + num_streams
        ));
    }
    Ok(1.0 - (pilot_length + num_streams) as f64 / coherence_symbols as f64)
}

/// `(rho / S) * sum_nu R[nu]`.
pub fn average_se(per_subcarrier: &[f64], rho: f64) -> f64 {
    assert!(!per_subcarrier.is_empty(), "average over zero subcarriers");
    rho * per_subcarrier.iter().sum::<f64>() / per_subcarrier.len() as f64
}

/// `E = W^H D`.
pub fn collect_effective_channel(w: &CMat, d: &CMat) -> Result<CMat> {
    if w.nrows() != d.nrows() || w.ncols() != d.ncols() {
        return config_err(format!("W {:?} and D {:?} must both be N_c x N_s", w.shape(), d.shape()));
    }
    Ok(w.adjoint() * d)
}

/// One fading realisation's contribution to the UatF statistics.
#[derive(Debug, Clone)]
pub struct UatfSample {
    /// `E = W^H D`.
    pub effective: CMat,
    /// Covariance of the combined receiver noise, `W^H Q^H Q W`.
    pub noise: CMat,
}

impl UatfSample {
    /// Sample for a first-stage combiner with orthonormal columns, where the
    /// combined noise covariance reduces to `W^H W`.
    pub fn orthonormal(w: &CMat, d: &CMat) -> Result<Self> {
        Ok(Self { effective: collect_effective_channel(w, d)?, noise: w.adjoint() * w })
    }

    /// Sample for an arbitrary first-stage combiner `Q`.
    pub fn with_first_stage(q: &CMat, w: &CMat, d: &CMat) -> Result<Self> {
        if q.ncols() != w.nrows() {
            return config_err("first-stage combiner width differs from N_c");
        }
        let qw = q * w;
        Ok(Self { effective: collect_effective_channel(w, d)?, noise: qw.adjoint() * qw })
    }
}

#[derive(Debug, Clone)]
pub struct UatfStatistics {
    /// `E_bar`, the sample mean of `E`.
    pub mean_effective: CMat,
    /// `C`, the covariance of fluctuation plus combined noise.
    pub noise_cov: CMat,
    pub num_samples: usize,
}

/// Plug-in `E_bar` and `C = mean[(E - E_bar)(E - E_bar)^H + W^H Q^H Q W]`.
pub fn estimate_uatf_statistics(samples: &[UatfSample]) -> Result<UatfStatistics> {
    if samples.len() < 2 {
        return Err(Error::Config(format!("UatF statistics need at least 2 samples, got {}", samples.len())));
    }
    let n = samples.len() as f64;
    let (rows, cols) = samples[0].effective.shape();
    if samples.iter().any(|s| s.effective.shape() != (rows, cols) || s.noise.shape() != (rows, rows)) {
        return config_err("UatF samples differ in shape");
    }
    let mut mean = CMat::zeros(rows, cols);
    for s in samples {
        mean += &s.effective;
    }
    mean /= Complex64::new(n, 0.0);
    let mut cov = CMat::zeros(rows, rows);
    for s in samples {
        let dev = &s.effective - &mean;
        cov += &dev * dev.adjoint() + &s.noise;
    }
    cov /= Complex64::new(n, 0.0);
    Ok(UatfStatistics { mean_effective: mean, noise_cov: hermitian_part(&cov), num_samples: samples.len() })
}

/// Running sums from which UatF statistics can be formed; partial
/// accumulators merge by addition, and subtracting one accumulator from
/// another gives leave-some-out statistics.
#[derive(Debug, Clone)]
pub struct UatfAccumulator {
    count: usize,
    sum_effective: CMat,
    sum_second: CMat,
}

impl UatfAccumulator {
    pub fn new(num_streams: usize) -> Self {
        Self {
            count: 0,
            sum_effective: CMat::zeros(num_streams, num_streams),
            sum_second: CMat::zeros(num_streams, num_streams),
        }
    }

    /// Rebuilds an accumulator from `count` samples with `sum_effective =
    /// sum E` and `sum_second = sum (E E^H + W^H Q^H Q W)`.
    pub fn from_sums(count: usize, sum_effective: CMat, sum_second: CMat) -> Self {
        Self { count, sum_effective, sum_second }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn push(&mut self, sample: &UatfSample) {
        self.count += 1;
        self.sum_effective += &sample.effective;
        self.sum_second += &sample.effective * sample.effective.adjoint() + &sample.noise;
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum_effective += &other.sum_effective;
        self.sum_second += &other.sum_second;
    }

    pub fn without(&self, other: &Self) -> Self {
        Self {
            count: self.count - other.count,
            sum_effective: &self.sum_effective - &other.sum_effective,
            sum_second: &self.sum_second - &other.sum_second,
        }
    }

    pub fn statistics(&self) -> Result<UatfStatistics> {
        if self.count < 2 {
            return Err(Error::Config(format!("UatF statistics need at least 2 samples, got {}", self.count)));
        }
        let n = Complex64::new(self.count as f64, 0.0);
        let mean = &self.sum_effective / n;
        let cov = &self.sum_second / n - &mean * mean.adjoint();
        Ok(UatfStatistics { mean_effective: mean, noise_cov: hermitian_part(&cov), num_samples: self.count })
    }
}

/// `log2 det(I + E_bar^H C^{-1} E_bar)`.
///
/// When the smallest eigenvalue of `C` is below `1e-10 * tr(C) / N_s`, that
/// amount is added to the diagonal before factorising.
pub fn se_uatf_subcarrier(stats: &UatfStatistics) -> Result<f64> {
    let c = hermitian_part(&stats.noise_cov);
    let k = c.nrows();
    let trace: f64 = (0..k).map(|i| c[(i, i)].re).sum();
    let eps = 1e-10 * trace / k as f64;
    if !(eps > 0.0) {
        return Err(Error::Degenerate("UatF noise covariance is zero".into()));
    }
    let min_eig = hermitian_eigenvalues(&c).first().copied().unwrap_or(0.0);
    let c = if min_eig < eps { c + CMat::identity(k, k) * Complex64::new(eps, 0.0) } else { c };
    log2det_whitened(&stats.mean_effective, &c)
}
