//! Quick oracle-equivalence checks runnable from the command line.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::beamforming::water_fill;
use crate::channel::{
    assemble_channel, draw_fading, steering_matrices, taps_to_subcarrier_gains, ArrayGeometry, ClusterSet, PathSpec,
};
use crate::estimation::{
    complex_gaussian, estimate_downlink_effective, estimate_downlink_precoded, estimate_uplink_effective,
    estimate_uplink_full, PilotBook, PilotNoise,
};
use crate::linalg::{svd, CMat, CVec};
use crate::rate::{estimate_uatf_statistics, se_uatf_subcarrier, UatfAccumulator, UatfSample};
use crate::scenario::{pathloss_db, Point, ScenarioConfig, Simulator, StreamKey, WindowGeometry};

pub struct CheckOutcome {
    pub name: &'static str,
    pub result: Result<(), String>,
}

type Check = fn() -> Result<(), String>;

const CHECKS: &[(&str, Check)] = &[
    ("subcarrier gains match a direct DFT", check_fft),
    ("channel equals its steering-matrix factorisation", check_compact_form),
    ("noiseless pilots recover every target exactly", check_noiseless_estimation),
    ("water-filling matches a bisection on the water level", check_water_fill),
    ("streaming UatF statistics match the two-pass estimate", check_uatf_streaming),
    ("lossless compression keeps the uncompressed rate", check_lossless_window),
    ("pathloss matches its closed form", check_pathloss),
];

pub fn run_all() -> Vec<CheckOutcome> {
    CHECKS.iter().map(|&(name, f)| CheckOutcome { name, result: f() }).collect()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_clusters(rng: &mut ChaCha8Rng, paths: usize, taps: usize) -> ClusterSet {
    let nlos: Vec<PathSpec> = (0..paths)
        .map(|_| PathSpec {
            aoa_rad: (rng.random::<f64>() - 0.5) * 3.0,
            aod_rad: (rng.random::<f64>() - 0.5) * 3.0,
            power: 0.1 + rng.random::<f64>(),
        })
        .collect();
    ClusterSet::from_paths(None, &nlos, taps, 2.0).expect("valid random clusters")
}

fn check_fft() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let taps: Vec<Complex64> = (0..5).map(|_| Complex64::new(rng.random(), rng.random())).collect();
    let s = 16;
    let got = taps_to_subcarrier_gains(&taps, s).map_err(|e| e.to_string())?;
    for (nu, g) in got.iter().enumerate() {
        let want: Complex64 = taps
            .iter()
            .enumerate()
            .map(|(l, a)| a * Complex64::from_polar(1.0, -2.0 * PI * (l * nu) as f64 / s as f64))
            .sum();
        ensure((g - want).norm() < 1e-12, || format!("subcarrier {nu}: {g} vs {want}"))?;
    }
    Ok(())
}

fn check_compact_form() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rx = ArrayGeometry::half_wavelength(4).map_err(|e| e.to_string())?;
    let tx = ArrayGeometry::half_wavelength(8).map_err(|e| e.to_string())?;
    let clusters = random_clusters(&mut rng, 3, 4);
    let fading = draw_fading(&mut rng, &clusters);
    let block = assemble_channel(&rx, &tx, &clusters, fading.clone(), 16, 0).map_err(|e| e.to_string())?;
    let (a_r, a_t) = steering_matrices(&rx, &tx, &clusters).map_err(|e| e.to_string())?;
    let gains: Vec<Vec<Complex64>> =
        fading.taps.iter().map(|t| taps_to_subcarrier_gains(t, 16)).collect::<Result<_, _>>().map_err(|e| e.to_string())?;
    for (nu, h) in block.per_subcarrier.iter().enumerate() {
        let diag = CMat::from_diagonal(&CVec::from_iterator(gains.len(), gains.iter().map(|g| g[nu])));
        let compact = &a_r * diag * a_t.transpose();
        let err = (h - &compact).norm() / compact.norm();
        ensure(err < 1e-10, || format!("subcarrier {nu}: relative error {err:e}"))?;
    }
    Ok(())
}

fn check_noiseless_estimation() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let book = PilotBook::new(4, 2, 2, 6).map_err(|e| e.to_string())?;
    let h = complex_gaussian(&mut rng, 4, 8);
    let b = complex_gaussian(&mut rng, 4, 2);
    let g = complex_gaussian(&mut rng, 2, 8);
    let d = complex_gaussian(&mut rng, 2, 2);
    let e = |x: crate::Result<crate::estimation::EstimationResult>| x.map(|r| r.estimate).map_err(|e| e.to_string());
    let pairs = [
        (h.clone(), e(estimate_uplink_full(&h, &book.uplink_full, 3.0, PilotNoise::Off, &mut rng))?),
        (b.clone(), e(estimate_downlink_precoded(&b, &book.downlink_precoded, PilotNoise::Off, &mut rng))?),
        (g.clone(), e(estimate_uplink_effective(&g, &book.uplink_effective, 3.0, PilotNoise::Off, &mut rng))?),
        (d.clone(), e(estimate_downlink_effective(&d, &book.downlink_effective, PilotNoise::Off, &mut rng))?),
    ];
    for (i, (truth, est)) in pairs.iter().enumerate() {
        let err = (truth - est).norm();
        ensure(err < 1e-10, || format!("phase {i}: error {err:e}"))?;
    }
    Ok(())
}

fn check_water_fill() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let n = rng.random_range(1..=8);
        let gains: Vec<f64> = (0..n).map(|_| 0.01 + 10.0 * rng.random::<f64>()).collect();
        let budget = 0.1 + 20.0 * rng.random::<f64>();
        let got = water_fill(&gains, budget).map_err(|e| e.to_string())?;
        let used = |mu: f64| gains.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
        let (mut lo, mut hi) = (0.0, budget + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max));
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if used(mid) > budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let mu = 0.5 * (lo + hi);
        for (g, p) in gains.iter().zip(&got.per_stream) {
            let want = (mu - 1.0 / g).max(0.0);
            ensure((p - want).abs() < 1e-8, || format!("gains {gains:?}: {p} vs {want}"))?;
        }
    }
    Ok(())
}

fn check_uatf_streaming() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples: Vec<UatfSample> = (0..50)
        .map(|_| {
            let w = svd(&complex_gaussian(&mut rng, 3, 2)).u;
            let d = complex_gaussian(&mut rng, 3, 2);
            UatfSample::orthonormal(&w, &d)
        })
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut acc = UatfAccumulator::new(2);
    for s in &samples {
        acc.push(s);
    }
    let a = se_uatf_subcarrier(&acc.statistics().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let b = se_uatf_subcarrier(&estimate_uatf_statistics(&samples).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure((a - b).abs() < 1e-10 * b.abs().max(1.0), || format!("{a} vs {b}"))
}

fn check_lossless_window() -> Result<(), String> {
    let cfg = ScenarioConfig {
        num_tx: 8,
        num_rx: 4,
        num_compressed: 4,
        num_streams: 2,
        num_subcarriers: 4,
        num_taps: 2,
        pilot_length: 4,
        blocks_per_window: 2,
        pilot_noise: false,
        ..ScenarioConfig::default()
    };
    let sim = Simulator::new(&cfg).map_err(|e| e.to_string())?;
    let geom = WindowGeometry::build(&cfg, 0, Point::new(20.0, 0.0), &[Point::new(9.0, 4.0), Point::new(11.0, -6.0)])
        .map_err(|e| e.to_string())?;
    let key = StreamKey::new(11, 0, 0);
    let result = sim.run_window(&geom, key).map_err(|e| e.to_string())?;
    for (tau, block) in result.per_block.iter().enumerate() {
        let h = sim.draw_channel(&geom, key, tau).map_err(|e| e.to_string())?;
        for (nu, hn) in h.iter().enumerate() {
            let gains: Vec<f64> = svd(hn).s.iter().take(cfg.num_streams).map(|s| s * s).collect();
            let alloc = water_fill(&gains, cfg.tx_power()).map_err(|e| e.to_string())?;
            let want: f64 = gains.iter().zip(&alloc.per_stream).map(|(g, p)| (1.0 + g * p).log2()).sum();
            let got = block.genie[nu];
            ensure((got - want).abs() < 1e-6 * want, || format!("block {tau}, subcarrier {nu}: {got} vs {want}"))?;
        }
    }
    Ok(())
}

fn check_pathloss() -> Result<(), String> {
    let pl = pathloss_db(20.0, 28.0).map_err(|e| e.to_string())?;
    let want = 28.0 + 22.0 * 20f64.log10() + 20.0 * 28f64.log10();
    ensure((pl - want).abs() < 1e-12, || format!("{pl} vs {want}"))
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_all() {
            assert!(c.result.is_ok(), "{}: {:?}", c.name, c.result);
        }
    }
}
