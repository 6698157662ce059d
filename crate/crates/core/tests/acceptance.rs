//! End-to-end acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twostage_mimo::beamforming::water_fill;
use twostage_mimo::channel::{assemble_channel, draw_fading, ArrayGeometry, ClusterSet, PathSpec};
use twostage_mimo::estimation::{
    complex_gaussian, estimate_downlink_effective, estimate_downlink_precoded, estimate_uplink_effective,
    estimate_uplink_full, make_pilot_matrix, ml_estimate, simulate_pilot_rx, PilotBook, PilotNoise, PilotPhase,
};
use twostage_mimo::io::render_results;
use twostage_mimo::linalg::{svd, CMat};
use twostage_mimo::scenario::{
    experiment_se_vs_snr, experiment_se_vs_snr_ordered, experiment_se_vs_time, ExecutionOrder, ExperimentOutcome,
    Method, Point, ScenarioConfig, SeRecord, Simulator, StreamKey, WindowGeometry,
};

type Verdict = Result<String, String>;

fn within_time(start: Instant, limit: Duration, detail: String) -> Verdict {
    let took = start.elapsed();
    if took <= limit {
        Ok(format!("{detail}; {:.1} s", took.as_secs_f64()))
    } else {
        Err(format!("{detail}; took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs()))
    }
}

fn steering(n: usize, angle: f64) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, PI * k as f64 * angle.sin())).collect()
}

fn random_clusters(rng: &mut ChaCha8Rng, n_cl: usize, taps: usize, los: bool) -> ClusterSet {
    let mut angle = || (rng.random::<f64>() - 0.5) * 0.98 * PI;
    let los = los.then(|| PathSpec { aoa_rad: angle(), aod_rad: angle(), power: 1.0 });
    let nlos: Vec<PathSpec> =
        (0..n_cl).map(|_| PathSpec { aoa_rad: angle(), aod_rad: angle(), power: 0.3 }).collect();
    ClusterSet::from_paths(los, &nlos, taps, 2.0).unwrap()
}

fn compact_form() -> Verdict {
    let start = Instant::now();
    let (nt, nr, s, l) = (8, 4, 16, 4);
    let rx = ArrayGeometry::half_wavelength(nr).unwrap();
    let tx = ArrayGeometry::half_wavelength(nt).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let clusters = random_clusters(&mut rng, 3, l, false);
        let fading = draw_fading(&mut rng, &clusters);
        let block = assemble_channel(&rx, &tx, &clusters, fading.clone(), s, 0).unwrap();
        let p = clusters.num_paths();
        let a_r = CMat::from_fn(nr, p, |r, i| steering(nr, clusters.aoa_rad()[i])[r]);
        let a_t = CMat::from_fn(nt, p, |r, i| steering(nt, clusters.aod_rad()[i])[r]);
        for nu in 0..s {
            let mut diag = CMat::zeros(p, p);
            for i in 0..p {
                diag[(i, i)] = (0..l)
                    .map(|t| fading.taps[i][t] * Complex64::from_polar(1.0, -2.0 * PI * (t * nu) as f64 / s as f64))
                    .sum();
            }
            let want = &a_r * diag * a_t.transpose();
            worst = worst.max((&block.per_subcarrier[nu] - &want).norm() / want.norm());
        }
    }
    if worst >= 1e-10 {
        return Err(format!("max relative error {worst:.2e}"));
    }
    within_time(start, Duration::from_secs(5), format!("max relative error {worst:.2e} over 100 instances"))
}

fn mean_sq_error(trials: usize, mut draw: impl FnMut() -> (CMat, CMat)) -> f64 {
    (0..trials)
        .map(|_| {
            let (truth, est) = draw();
            (truth - est).norm_squared()
        })
        .sum::<f64>()
        / trials as f64
}

fn estimator_scaling() -> Verdict {
    let start = Instant::now();
    let (nt, nr, nc, ns, tp) = (8, 4, 2, 2, 6);
    let book = PilotBook::new(nr, nc, ns, tp).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let pr = 2.0;
    let h = complex_gaussian(&mut rng, nr, nt);
    let b = complex_gaussian(&mut rng, nr, ns);
    let g = complex_gaussian(&mut rng, nc, nt);
    let d = complex_gaussian(&mut rng, nc, ns);
    let q = svd(&complex_gaussian(&mut rng, nr, nc)).u;

    let exact = [
        (&h, estimate_uplink_full(&h, &book.uplink_full, pr, PilotNoise::Off, &mut rng).unwrap().estimate),
        (&b, estimate_downlink_precoded(&b, &book.downlink_precoded, PilotNoise::Off, &mut rng).unwrap().estimate),
        (&g, estimate_uplink_effective(&g, &book.uplink_effective, pr, PilotNoise::Off, &mut rng).unwrap().estimate),
        (&d, estimate_downlink_effective(&d, &book.downlink_effective, PilotNoise::Off, &mut rng).unwrap().estimate),
    ];
    for (i, (truth, est)) in exact.iter().enumerate() {
        let err = (*truth - est).norm() / truth.norm();
        if err >= 1e-10 {
            return Err(format!("noiseless phase {i}: relative error {err:.2e}"));
        }
    }

    let n = 10_000;
    let up = pr * tp as f64;
    let cases: Vec<(&str, f64, f64)> = vec![
        (
            "uplink_full",
            mean_sq_error(n, || {
                (h.clone(), estimate_uplink_full(&h, &book.uplink_full, pr, PilotNoise::White, &mut rng).unwrap().estimate)
            }),
            (nt * nr) as f64 / up,
        ),
        (
            "downlink_precoded",
            mean_sq_error(n, || {
                let e = estimate_downlink_precoded(&b, &book.downlink_precoded, PilotNoise::White, &mut rng).unwrap();
                (b.clone(), e.estimate)
            }),
            (nr * ns) as f64 / ns as f64,
        ),
        (
            "uplink_effective",
            mean_sq_error(n, || {
                let e = estimate_uplink_effective(&g, &book.uplink_effective, pr, PilotNoise::White, &mut rng).unwrap();
                (g.clone(), e.estimate)
            }),
            (nt * nc) as f64 / up,
        ),
        (
            "downlink_effective",
            mean_sq_error(n, || {
                let e = estimate_downlink_effective(&d, &book.downlink_effective, PilotNoise::Shaped(&q), &mut rng)
                    .unwrap();
                (d.clone(), e.estimate)
            }),
            (nc * ns) as f64 / ns as f64,
        ),
    ];
    let mut detail = Vec::new();
    for (name, got, want) in &cases {
        let rel = (got / want - 1.0).abs();
        if rel > 0.05 {
            return Err(format!("{name}: MSE {got:.4} vs {want:.4}"));
        }
        detail.push(format!("{name} {:.1}%", 100.0 * rel));
    }

    for role in [PilotPhase::UplinkFull, PilotPhase::DownlinkPrecoded, PilotPhase::UplinkEffective, PilotPhase::DownlinkEffective]
    {
        let pilots = make_pilot_matrix(3, tp, role).unwrap();
        let m = complex_gaussian(&mut rng, 5, 3);
        let mut at = |p: f64| {
            mean_sq_error(n, || {
                let y = simulate_pilot_rx(&m, &pilots, p, PilotNoise::White, &mut rng).unwrap();
                (m.clone(), ml_estimate(&y, &pilots, p).unwrap().estimate)
            })
        };
        let ratio = at(8.0) / at(4.0);
        if (ratio - 0.5).abs() > 0.025 {
            return Err(format!("{role:?}: doubling power changed MSE by factor {ratio:.4}"));
        }
    }
    within_time(start, Duration::from_secs(30), format!("MSE deviation {}; power doubling halves MSE", detail.join(", ")))
}

fn grid_water_level(gains: &[f64], budget: f64) -> f64 {
    let used = |mu: f64| gains.iter().map(|g| (mu - 1.0 / g).max(0.0)).sum::<f64>();
    let hi0 = budget + gains.iter().map(|g| 1.0 / g).fold(0.0, f64::max);
    let steps = 1000;
    let mut lo = 0.0;
    let mut hi = hi0;
    for k in 0..=steps {
        let mu = hi0 * k as f64 / steps as f64;
        if used(mu) >= budget {
            hi = mu;
            lo = hi0 * (k.max(1) - 1) as f64 / steps as f64;
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (used(mid) - budget).abs() <= 1e-9 * budget.max(1.0) {
            return mid;
        }
        if used(mid) > budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn water_filling() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=8);
        let gains: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..2.0))).collect();
        let budget = 10f64.powf(rng.random_range(-1.0..2.0));
        let alloc = water_fill(&gains, budget).map_err(|e| e.to_string())?;
        let mu = grid_water_level(&gains, budget);
        for (g, p) in gains.iter().zip(&alloc.per_stream) {
            worst = worst.max((p - (mu - 1.0 / g).max(0.0)).abs());
        }
        let total: f64 = alloc.per_stream.iter().sum();
        if (total - budget).abs() > 1e-12 * budget.max(1.0) * n as f64 {
            return Err(format!("budget {budget} not met: {total}"));
        }
        for (g, p) in gains.iter().zip(&alloc.per_stream) {
            let floor = 1.0 / g;
            let kkt = if *p > 0.0 {
                (floor + p - alloc.water_level).abs() <= 1e-12 * alloc.water_level.max(1.0)
            } else {
                floor >= alloc.water_level
            };
            if !kkt {
                return Err(format!("KKT violated: gains {gains:?}, budget {budget}, gain {g}, power {p}"));
            }
        }
    }
    if worst >= 1e-6 {
        return Err(format!("max per-stream deviation {worst:.2e}"));
    }
    within_time(start, Duration::from_secs(5), format!("max per-stream deviation {worst:.2e} over 1000 vectors"))
}

fn lossless_compression() -> Verdict {
    let start = Instant::now();
    let base = ScenarioConfig {
        num_tx: 16,
        num_rx: 8,
        num_compressed: 8,
        num_streams: 3,
        num_subcarriers: 8,
        num_taps: 4,
        pilot_length: 8,
        blocks_per_window: 2,
        pilot_noise: false,
        ..ScenarioConfig::default()
    };
    let sim = Simulator::new(&base).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 50 {
        let scatterers: Vec<Point> = (0..3)
            .map(|_| Point::new(rng.random_range(1.0..19.0), rng.random_range(-15.0..15.0)))
            .collect();
        let geom = WindowGeometry::build(&base, 0, Point::new(20.0, rng.random_range(0.0..20.0)), &scatterers).unwrap();
        let key = StreamKey::new(404, 9, checked as u64);
        let result = sim.run_window(&geom, key).map_err(|e| e.to_string())?;
        for (tau, block) in result.per_block.iter().enumerate() {
            let h = sim.draw_channel(&geom, key, tau).unwrap();
            for (nu, hn) in h.iter().enumerate() {
                let mut s: Vec<f64> = hn.clone().svd(false, false).singular_values.iter().copied().collect();
                s.sort_by(|a, b| b.total_cmp(a));
                let gains: Vec<f64> = s.iter().take(3).map(|x| x * x).collect();
                let mu = grid_water_level(&gains, base.tx_power());
                let want: f64 = gains.iter().map(|g| (1.0 + g * (mu - 1.0 / g).max(0.0)).log2()).sum();
                worst = worst.max((block.genie[nu] - want).abs() / want);
            }
        }
        checked += 1;
    }
    if worst >= 1e-6 {
        return Err(format!("max relative deviation {worst:.2e}"));
    }
    within_time(start, Duration::from_secs(30), format!("max relative deviation {worst:.2e} over 50 channels"))
}

fn combined_se(a: &SeRecord, b: &SeRecord) -> f64 {
    ((a.ci95_half_width / 1.96).powi(2) + (b.ci95_half_width / 1.96).powi(2)).sqrt()
}

fn combined_ci(a: &SeRecord, b: &SeRecord) -> f64 {
    (a.ci95_half_width.powi(2) + b.ci95_half_width.powi(2)).sqrt()
}

fn uatf_bound(outcomes: &[&ExperimentOutcome]) -> Verdict {
    let mut worst = f64::NEG_INFINITY;
    for out in outcomes {
        for (u, g) in out.uatf.iter().zip(&out.genie) {
            assert_eq!((u.method, u.sweep_value), (g.method, g.sweep_value));
            let excess = u.mean_se - g.mean_se - 3.0 * combined_se(u, g);
            worst = worst.max(excess);
            if excess > 0.0 {
                return Err(format!(
                    "{} {} at {}: UatF {:.4} exceeds genie {:.4} beyond 3 SE",
                    out.experiment, u.method, u.sweep_value, u.mean_se, g.mean_se
                ));
            }
        }
    }
    Ok(format!("largest UatF - genie - 3 SE = {worst:.3} bits"))
}

fn curve<'a>(out: &'a ExperimentOutcome, m: Method) -> Vec<&'a SeRecord> {
    out.records.iter().filter(|r| r.method == m).collect()
}

fn fig_time(out: &ExperimentOutcome, took: Duration) -> Verdict {
    let order = [Method::IdealDbf, Method::ProposedUpdatedQ, Method::ProposedFixedQ, Method::FixedQAndW];
    for pair in order.windows(2) {
        for (a, b) in curve(out, pair[0]).into_iter().zip(curve(out, pair[1])) {
            if a.mean_se < b.mean_se - 3.0 * combined_ci(a, b) {
                return Err(format!("t = {}: {} {:.3} below {} {:.3}", a.sweep_value, a.method, a.mean_se, b.method, b.mean_se));
            }
        }
    }
    let mut gap: f64 = 0.0;
    for (u, f) in curve(out, Method::ProposedUpdatedQ).into_iter().zip(curve(out, Method::ProposedFixedQ)) {
        let rel = (u.mean_se - f.mean_se).abs() / u.mean_se;
        gap = gap.max(rel);
        if rel > 0.2 {
            return Err(format!("t = {}: fixed-Q gap {:.1}%", u.sweep_value, 100.0 * rel));
        }
    }
    let frozen = curve(out, Method::FixedQAndW);
    let (first, last) = (frozen[0].mean_se, frozen[frozen.len() - 1].mean_se);
    if !(last < first) {
        return Err(format!("fixed Q and W does not degrade: {first:.4} -> {last:.4}"));
    }
    let detail = format!("ordering holds; max fixed-Q gap {:.1}%; frozen combiners {first:.3} -> {last:.3}", 100.0 * gap);
    if took > Duration::from_secs(180) {
        return Err(format!("{detail}; took {:.1} s", took.as_secs_f64()));
    }
    Ok(format!("{detail}; {:.1} s", took.as_secs_f64()))
}

fn fig_snr(out: &ExperimentOutcome, took: Duration) -> Verdict {
    for (p, h) in curve(out, Method::ProposedFixedQ).into_iter().zip(curve(out, Method::HbfProxy)) {
        if p.mean_se < h.mean_se - 3.0 * combined_ci(p, h) {
            return Err(format!("SNR {}: proposed {:.3} below proxy {:.3}", p.sweep_value, p.mean_se, h.mean_se));
        }
    }
    for m in [Method::IdealDbf, Method::ProposedFixedQ, Method::HbfProxy] {
        let c = curve(out, m);
        for w in c.windows(2) {
            if w[1].mean_se < w[0].mean_se - 3.0 * combined_ci(w[0], w[1]) {
                return Err(format!("{m} decreases from {} to {} dB", w[0].sweep_value, w[1].sweep_value));
            }
        }
    }
    if took > Duration::from_secs(180) {
        return Err(format!("took {:.1} s", took.as_secs_f64()));
    }
    Ok(format!("proposed above proxy and all curves nondecreasing; {:.1} s", took.as_secs_f64()))
}

fn determinism(cfg: &ScenarioConfig, reference: &ExperimentOutcome) -> Verdict {
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let out = dir.path().to_str().unwrap().to_string();
        let code = twostage_mimo::cli::run_cli(["twostage-sim", "se-vs-snr", "--preset", "desk", "--seed", "7", "--out", &out]);
        if code != 0 {
            return Err(format!("CLI exited with {code}"));
        }
        files.push(std::fs::read(dir.path().join("results.csv")).map_err(|e| e.to_string())?);
    }
    if files[0] != files[1] {
        return Err("two CLI runs differ".into());
    }
    if files[0] != render_results(&reference.records).into_bytes() {
        return Err("CLI output differs from the library run".into());
    }
    let shuffled =
        experiment_se_vs_snr_ordered(cfg, &cfg.snr_grid_db.values(), ExecutionOrder::Shuffled(99)).map_err(|e| e.to_string())?;
    if render_results(&shuffled.records) != render_results(&reference.records) || shuffled.uatf != reference.uatf {
        return Err("shuffled trial-group order changed the results".into());
    }
    Ok("byte-identical across runs and execution orders".into())
}

fn main() {
    let mut failures = 0;
    let mut report = |name: &str, v: Verdict| match v {
        Ok(d) => println!("PASS  {name}: {d}"),
        Err(d) => {
            failures += 1;
            println!("FAIL  {name}: {d}");
        }
    };

    report("AC1 compact-form oracle", compact_form());
    report("AC2 estimator exactness and scaling", estimator_scaling());
    report("AC3 water-filling", water_filling());
    report("AC4 lossless-compression equivalence", lossless_compression());

    let desk = ScenarioConfig { seed: 7, ..ScenarioConfig::desk() };
    let t0 = Instant::now();
    let time = experiment_se_vs_time(&desk);
    let time_took = t0.elapsed();
    let t0 = Instant::now();
    let snr = experiment_se_vs_snr(&desk, &desk.snr_grid_db.values());
    let snr_took = t0.elapsed();

    match (&time, &snr) {
        (Ok(t), Ok(s)) => {
            report("AC5 UatF bound", uatf_bound(&[t, s]));
            report("AC6 SE-versus-time shape", fig_time(t, time_took));
            report("AC7 SE-versus-SNR shape", fig_snr(s, snr_took));
            report("AC8 determinism", determinism(&desk, s));
        }
        _ => {
            let msg = format!("experiment failed: {:?} / {:?}", time.as_ref().err(), snr.as_ref().err());
            for name in ["AC5 UatF bound", "AC6 SE-versus-time shape", "AC7 SE-versus-SNR shape", "AC8 determinism"] {
                report(name, Err(msg.clone()));
            }
        }
    }

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
