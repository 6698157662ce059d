//! Precoder and two-stage combiner design.
//!
//! The BS precodes along the dominant right singular vectors of its channel
//! estimate with water-filling power. The UE's first-stage combiner `Q[nu]`
//! keeps the `N_c` leading left singular vectors of the estimated precoded
//! channel and is held for a whole beam-coherence window; the second-stage
//! combiner `W[tau, nu]` is re-derived every block from the compressed
//! precoded channel.

use num_complex::Complex64;

use crate::error::{config_err, Error, Result};
use crate::linalg::{identity_like, leading_left_basis, svd, CMat, Svd};

/// Relative threshold below which a singular value counts as zero.
const NULL_SINGULAR_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct Precoder {
    pub matrix: CMat,
    pub power_budget: f64,
    pub allocation: PowerAllocation,
}

#[derive(Debug, Clone)]
pub struct FirstStageCombiner {
    pub matrix: CMat,
    pub window_index: usize,
}

#[derive(Debug, Clone)]
pub struct SecondStageCombiner {
    pub matrix: CMat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub per_stream: Vec<f64>,
    pub water_level: f64,
}

impl PowerAllocation {
    pub fn total(&self) -> f64 {
        self.per_stream.iter().sum()
    }
}

/// Leading `k` singular triplets of `m`.
pub fn truncated_svd(m: &CMat, k: usize) -> Result<Svd> {
    let full = m.nrows().min(m.ncols());
    if k == 0 || k > full {
        return config_err(format!("rank-{k} truncation of a {}x{} matrix", m.nrows(), m.ncols()));
    }
    let d = svd(m);
    Ok(Svd { u: d.u.columns(0, k).into_owned(), s: d.s[..k].to_vec(), v: d.v.columns(0, k).into_owned() })
}

/// Water-filling over parallel channels with gains `g_i` and unit noise:
/// `P_i = max(mu - 1/g_i, 0)` with `sum P_i = budget`.
///
/// The active set is found in closed form by scanning the inverse gains in
/// ascending order.
pub fn water_fill(gains: &[f64], budget: f64) -> Result<PowerAllocation> {
    if gains.is_empty() {
        return config_err("water-filling needs at least one channel");
    }
    if let Some(g) = gains.iter().find(|&&g| !(g > 0.0 && g.is_finite())) {
        return config_err(format!("water-filling gains must be positive and finite, got {g}"));
    }
    if !(budget > 0.0 && budget.is_finite()) {
        return config_err(format!("power budget must be positive, got {budget}"));
    }
    let mut inv: Vec<f64> = gains.iter().map(|g| 1.0 / g).collect();
    inv.sort_by(f64::total_cmp);

    let mut prefix = 0.0;
    let mut level = budget + inv[0];
    for (k, &floor) in inv.iter().enumerate() {
        let candidate = (budget + prefix + floor) / (k + 1) as f64;
        if candidate <= floor {
            break;
        }
        prefix += floor;
        level = candidate;
    }
    let per_stream = gains.iter().map(|g| (level - 1.0 / g).max(0.0)).collect();
    Ok(PowerAllocation { per_stream, water_level: level })
}

/// `F = V_(:, N_s) diag(sqrt(P_1), ..., sqrt(P_Ns))` from a channel estimate.
///
/// Streams on numerically zero singular values get no power.
pub fn design_precoder(estimate: &CMat, num_streams: usize, power_budget: f64) -> Result<Precoder> {
    let dec = truncated_svd(estimate, num_streams)?;
    let top = dec.s[0];
    if !(top > 0.0) {
        return Err(Error::Degenerate("channel estimate has no nonzero singular value".into()));
    }
    let active: Vec<f64> = dec.s.iter().take_while(|&&s| s > NULL_SINGULAR_TOL * top).map(|s| s * s).collect();
    let mut alloc = water_fill(&active, power_budget)?;
    alloc.per_stream.resize(num_streams, 0.0);
    let mut matrix = dec.v;
    for (j, p) in alloc.per_stream.iter().enumerate() {
        matrix.column_mut(j).scale_mut(p.sqrt());
    }
    Ok(Precoder { matrix, power_budget, allocation: alloc })
}

/// `Q[nu]`: the `N_c` leading left singular vectors of each `B_hat[nu]`,
/// completed with an orthonormal basis when `N_c > N_s`.
pub fn design_first_stage(
    precoded_estimates: &[CMat],
    num_compressed: usize,
    window_index: usize,
) -> Result<Vec<FirstStageCombiner>> {
    precoded_estimates
        .iter()
        .map(|b| {
            if num_compressed > b.nrows() {
                return config_err(format!("N_c = {num_compressed} exceeds N_r = {}", b.nrows()));
            }
            if num_compressed == 0 {
                return config_err("N_c must be at least 1");
            }
            Ok(FirstStageCombiner { matrix: leading_left_basis(b, num_compressed)?, window_index })
        })
        .collect()
}

/// `W[1, nu] = I_{N_c x N_s}`.
pub fn design_second_stage_first_block(num_compressed: usize, num_streams: usize) -> Result<SecondStageCombiner> {
    if num_streams == 0 || num_streams > num_compressed {
        return config_err(format!("need 1 <= N_s <= N_c, got N_s = {num_streams}, N_c = {num_compressed}"));
    }
    Ok(SecondStageCombiner { matrix: identity_like(num_compressed, num_streams) })
}

/// `W[tau, nu]`: the `N_s` leading left singular vectors of `D_hat[tau, nu]`.
pub fn design_second_stage(effective_precoded: &CMat, num_streams: usize) -> Result<SecondStageCombiner> {
    if num_streams == 0 || num_streams > effective_precoded.nrows() {
        return config_err(format!(
            "need 1 <= N_s <= N_c, got N_s = {num_streams}, N_c = {}",
            effective_precoded.nrows()
        ));
    }
    Ok(SecondStageCombiner { matrix: leading_left_basis(effective_precoded, num_streams)? })
}

/// Frequency-common, constant-modulus stand-in for an analog combiner.
///
/// Averages the digital `Q[nu]` over subcarriers and keeps only the phase of
/// each entry, scaled to magnitude `1/sqrt(N_r)`. Columns are not
/// re-orthonormalised.
pub fn hbf_phase_proxy(
    precoded_estimates: &[CMat],
    num_compressed: usize,
    window_index: usize,
) -> Result<FirstStageCombiner> {
    if precoded_estimates.is_empty() {
        return config_err("phase proxy needs at least one subcarrier");
    }
    let digital = design_first_stage(precoded_estimates, num_compressed, window_index)?;
    let num_rx = precoded_estimates[0].nrows();
    let mut avg = CMat::zeros(num_rx, num_compressed);
    for q in &digital {
        avg += &q.matrix;
    }
    let matrix = constant_modulus(&avg, 1.0 / (num_rx as f64).sqrt());
    Ok(FirstStageCombiner { matrix, window_index })
}

/// Keeps the phase of every entry at magnitude `amp`; zero entries get phase 0.
fn constant_modulus(m: &CMat, amp: f64) -> CMat {
    m.map(|z| {
        if z.norm() == 0.0 {
            Complex64::new(amp, 0.0)
        } else {
            Complex64::from_polar(amp, z.arg())
        }
    })
}
