use rand::Rng;

use super::config::{Point, ScenarioConfig};
use crate::channel::{ClusterSet, PathSpec};
use crate::error::{Error, Result};

const MAX_PLACEMENT_ATTEMPTS: usize = 100_000;

/// UE position after `t_seconds` of straight-line motion along `+y`.
pub fn ue_position(t_seconds: f64, cfg: &ScenarioConfig) -> Point {
    Point::new(cfg.ue_start.x, cfg.ue_start.y + cfg.speed_mps * t_seconds)
}

/// Line-of-sight urban macro pathloss in dB, without shadowing.
pub fn pathloss_db(distance_m: f64, carrier_ghz: f64) -> Result<f64> {
    if !(distance_m >= 1.0) {
        return Err(Error::Domain(format!("pathloss needs distance >= 1 m, got {distance_m}")));
    }
    if !(carrier_ghz > 0.0) {
        return Err(Error::Domain(format!("carrier frequency must be positive, got {carrier_ghz}")));
    }
    Ok(28.0 + 22.0 * distance_m.log10() + 20.0 * carrier_ghz.log10())
}

/// Departure angle at the BS. The BS array lies along `y` and faces `+x`.
pub fn departure_angle(bs: Point, target: Point) -> Result<f64> {
    let (dx, dy) = (target.x - bs.x, target.y - bs.y);
    front_angle(dx, dy)
}

/// Arrival angle at the UE. The UE array lies along `y` and faces `-x`.
pub fn arrival_angle(ue: Point, source: Point) -> Result<f64> {
    let (dx, dy) = (source.x - ue.x, source.y - ue.y);
    front_angle(-dx, dy)
}

fn front_angle(forward: f64, lateral: f64) -> Result<f64> {
    if forward == 0.0 && lateral == 0.0 {
        return Err(Error::Domain("coincident points have no angle".into()));
    }
    if !(forward > 0.0) {
        return Err(Error::Domain("point lies behind the array".into()));
    }
    Ok(lateral.atan2(forward))
}

/// `(departure, arrival)` for a path. `via = None` is the direct path.
pub fn angles_from_geometry(bs: Point, ue: Point, via: Option<Point>) -> Result<(f64, f64)> {
    match via {
        None => Ok((departure_angle(bs, ue)?, arrival_angle(ue, bs)?)),
        Some(c) => Ok((departure_angle(bs, c)?, arrival_angle(ue, c)?)),
    }
}

/// Rectangle spanned by the BS and every UE position, grown by `margin`.
pub fn placement_region(bs: Point, ue_path: &[Point], margin: f64) -> (Point, Point) {
    let xs = ue_path.iter().map(|p| p.x).chain([bs.x]);
    let ys = ue_path.iter().map(|p| p.y).chain([bs.y]);
    let (lo_x, hi_x) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (lo_y, hi_y) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    (Point::new(lo_x - margin, lo_y - margin), Point::new(hi_x + margin, hi_y + margin))
}

/// Draws `num_clusters` scatterers uniformly in [`placement_region`],
/// redrawing any that would sit behind either array at some UE position.
pub fn place_clusters<R: Rng + ?Sized>(
    rng: &mut R,
    bs: Point,
    ue_path: &[Point],
    num_clusters: usize,
    margin: f64,
) -> Result<Vec<Point>> {
    let (lo, hi) = placement_region(bs, ue_path, margin);
    let mut out = Vec::with_capacity(num_clusters);
    let mut attempts = 0;
    while out.len() < num_clusters {
        attempts += 1;
        if attempts > MAX_PLACEMENT_ATTEMPTS {
            return Err(Error::Domain("no scatterer position is visible from both arrays".into()));
        }
        let p = Point::new(lo.x + (hi.x - lo.x) * rng.random::<f64>(), lo.y + (hi.y - lo.y) * rng.random::<f64>());
        if ue_path.iter().all(|&ue| angles_from_geometry(bs, ue, Some(p)).is_ok()) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Everything about the propagation environment that stays fixed for a window.
#[derive(Debug, Clone)]
pub struct WindowGeometry {
    pub window_index: usize,
    pub ue: Point,
    pub pathloss_db: f64,
    pub clusters: ClusterSet,
}

impl WindowGeometry {
    /// Path table for a UE at `ue` given scatterer positions.
    ///
    /// The direct path carries `beta_0` from the pathloss at the BS-UE
    /// distance; each scatterer carries `kappa * beta_0` spread over the taps.
    pub fn build(cfg: &ScenarioConfig, window_index: usize, ue: Point, scatterers: &[Point]) -> Result<Self> {
        let pl = pathloss_db(cfg.bs_position.distance(&ue), cfg.carrier_ghz)?;
        let beta0 = 10f64.powf(-pl / 10.0);
        let los = if cfg.has_los {
            let (aod, aoa) = angles_from_geometry(cfg.bs_position, ue, None)?;
            Some(PathSpec { aoa_rad: aoa, aod_rad: aod, power: beta0 })
        } else {
            None
        };
        let nlos = scatterers
            .iter()
            .map(|&c| {
                let (aod, aoa) = angles_from_geometry(cfg.bs_position, ue, Some(c))?;
                Ok(PathSpec { aoa_rad: aoa, aod_rad: aod, power: cfg.nlos_relative_power * beta0 })
            })
            .collect::<Result<Vec<_>>>()?;
        let clusters = ClusterSet::from_paths(los, &nlos, cfg.num_taps, cfg.tap_decay)?;
        Ok(Self { window_index, ue, pathloss_db: pl, clusters })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn trajectory() {
        let cfg = ScenarioConfig::default();
        assert_eq!(ue_position(0.0, &cfg), Point::new(20.0, 0.0));
        assert_eq!(ue_position(3.0, &cfg), Point::new(20.0, 15.0));
        assert_eq!(ue_position(1.0, &cfg), Point::new(20.0, 5.0));
    }

    #[test]
    fn pathloss_values() {
        assert!((pathloss_db(20.0, 28.0).unwrap() - 85.5659).abs() < 1e-3);
        assert!(pathloss_db(40.0, 28.0).unwrap() > pathloss_db(20.0, 28.0).unwrap());
        assert!(matches!(pathloss_db(0.5, 28.0), Err(Error::Domain(_))));
    }

    #[test]
    fn broadside_and_mirror() {
        let bs = Point::new(0.0, 0.0);
        let ue = Point::new(20.0, 0.0);
        let (aod, aoa) = angles_from_geometry(bs, ue, None).unwrap();
        assert_eq!(aod, 0.0);
        assert_eq!(aoa, 0.0);
        let (a, b) = angles_from_geometry(bs, ue, Some(Point::new(10.0, 4.0))).unwrap();
        let (c, d) = angles_from_geometry(bs, ue, Some(Point::new(10.0, -4.0))).unwrap();
        assert_eq!(a, -c);
        assert_eq!(b, -d);
        assert!(angles_from_geometry(bs, bs, None).is_err());
        assert!(angles_from_geometry(bs, ue, Some(Point::new(-1.0, 0.0))).is_err());
    }

    #[test]
    fn no_clusters_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = place_clusters(&mut rng, Point::new(0.0, 0.0), &[Point::new(20.0, 0.0)], 0, 10.0).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn clusters_inside_region_and_visible() {
        let bs = Point::new(0.0, 0.0);
        let path = [Point::new(20.0, 0.0), Point::new(20.0, 20.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = place_clusters(&mut rng, bs, &path, 50, 10.0).unwrap();
        for p in pts {
            assert!(p.x >= -10.0 && p.x <= 30.0 && p.y >= -10.0 && p.y <= 30.0);
            assert!(p.x > 0.0 && p.x < 20.0);
        }
    }

    #[test]
    fn window_geometry_powers() {
        let cfg = ScenarioConfig::desk();
        let g = WindowGeometry::build(&cfg, 0, Point::new(20.0, 0.0), &[Point::new(10.0, 5.0)]).unwrap();
        let beta0 = 10f64.powf(-g.pathloss_db / 10.0);
        assert!((g.clusters.los_power() - beta0).abs() < 1e-12 * beta0);
        let nlos: f64 = g.clusters.tap_power()[1].iter().sum();
        assert!((nlos - 0.1 * beta0).abs() < 1e-9 * beta0);
    }
}
