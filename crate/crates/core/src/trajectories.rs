//! Displacements, radius of gyration and time-of-day commuting profiles.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{validation, Result};
use crate::ingest::{AntennaRegistry, EventLog, Trajectory, Xy};

const MINUTES_PER_DAY: u32 = 1440;
const SECONDS_PER_DAY: i64 = 86_400;

/// Movement between the antennas of two consecutive calls of one user.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Displacement {
    pub user_id: String,
    pub t_start: i64,
    pub t_end: i64,
    /// Registry index of the first call's antenna.
    pub origin: usize,
    /// Registry index of the second call's antenna.
    pub destination: usize,
    pub distance_km: f64,
}

/// One displacement per consecutive pair with differing antennas and a
/// strictly positive time gap.
pub fn extract_displacements(traj: &Trajectory, reg: &AntennaRegistry) -> Vec<Displacement> {
    traj.pairs()
        .filter(|(a, b)| a.antenna != b.antenna && b.timestamp > a.timestamp)
        .map(|(a, b)| Displacement {
            user_id: traj.user_id.clone(),
            t_start: a.timestamp,
            t_end: b.timestamp,
            origin: a.antenna,
            destination: b.antenna,
            distance_km: reg.distance_km(a.antenna, b.antenna),
        })
        .collect()
}

pub fn all_displacements(log: &EventLog, reg: &AntennaRegistry) -> Vec<Displacement> {
    log.trajectories
        .par_iter()
        .map(|t| extract_displacements(t, reg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GyrationSample {
    pub user_id: String,
    pub r_g: f64,
    pub n_events: usize,
}

/// Root-mean-square projected distance of every event location (repeats
/// included) from their centre of mass. `None` for an empty trajectory.
pub fn radius_of_gyration(traj: &Trajectory, reg: &AntennaRegistry) -> Option<GyrationSample> {
    let n = traj.visits.len();
    if n == 0 {
        return None;
    }
    let pts: Vec<Xy> = traj.visits.iter().map(|v| reg.projected(v.antenna)).collect();
    let nf = n as f64;
    let cm = Xy::new(
        pts.iter().map(|p| p.x).sum::<f64>() / nf,
        pts.iter().map(|p| p.y).sum::<f64>() / nf,
    );
    let msd = pts.iter().map(|p| p.dist2(cm)).sum::<f64>() / nf;
    Some(GyrationSample {
        user_id: traj.user_id.clone(),
        r_g: msd.sqrt(),
        n_events: n,
    })
}

pub fn gyration_samples(log: &EventLog, reg: &AntennaRegistry) -> Vec<GyrationSample> {
    log.trajectories
        .iter()
        .filter_map(|t| radius_of_gyration(t, reg))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    DisplacementProbability,
    MeanDistanceKm,
}

impl StatisticKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StatisticKind::DisplacementProbability => "displacement_probability",
            StatisticKind::MeanDistanceKm => "mean_distance_km",
        }
    }
}

/// How per-day window counts are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DayPooling {
    /// Sum numerators and denominators over days, divide once.
    #[default]
    SumCounts,
    /// Average the per-day statistics over days where they are defined.
    MeanOfDailyRatios,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileConfig {
    pub window_min: u32,
    pub step_min: u32,
    pub weekdays_only: bool,
    /// Offset added to UTC timestamps before taking day and minute of day.
    pub utc_offset_s: i64,
    /// Pairs with a longer gap between calls are ignored.
    pub max_gap_s: i64,
    pub pooling: DayPooling,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            window_min: 40,
            step_min: 10,
            weekdays_only: true,
            utc_offset_s: 0,
            max_gap_s: SECONDS_PER_DAY,
            pooling: DayPooling::SumCounts,
        }
    }
}

impl ProfileConfig {
    fn validate(&self) -> Result<()> {
        if self.window_min == 0 || self.window_min > MINUTES_PER_DAY {
            return Err(validation!("window must be within 1..=1440 minutes"));
        }
        if self.step_min == 0 || !MINUTES_PER_DAY.is_multiple_of(self.step_min) {
            return Err(validation!("step must be a positive divisor of 1440 minutes"));
        }
        Ok(())
    }

    fn n_windows(&self) -> usize {
        (MINUTES_PER_DAY / self.step_min) as usize
    }

    /// Window indices whose `[start, start + window)` span (wrapping at
    /// midnight) contains `minute`.
    fn windows_containing(&self, minute: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_windows()).filter(move |&k| {
            let start = k as u32 * self.step_min;
            (minute + MINUTES_PER_DAY - start) % MINUTES_PER_DAY < self.window_min
        })
    }
}

/// Half-open distance interval `[lo, hi)` in km.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceBin {
    pub lo: f64,
    pub hi: f64,
}

impl DistanceBin {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.lo && d < self.hi
    }
}

pub const DEFAULT_BINS_KM: [DistanceBin; 5] = [
    DistanceBin::new(0.0, 1.0),
    DistanceBin::new(1.0, 5.0),
    DistanceBin::new(5.0, 10.0),
    DistanceBin::new(10.0, 20.0),
    DistanceBin::new(20.0, 50.0),
];

fn validate_bins(bins: &[DistanceBin]) -> Result<()> {
    for b in bins {
        if !(b.lo < b.hi) || b.lo < 0.0 {
            return Err(validation!("invalid distance bin [{}, {})", b.lo, b.hi));
        }
    }
    for w in bins.windows(2) {
        if w[1].lo < w[0].hi {
            return Err(validation!(
                "distance bins [{}, {}) and [{}, {}) overlap or are not ascending",
                w[0].lo,
                w[0].hi,
                w[1].lo,
                w[1].hi
            ));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub window_start_min: u32,
    /// `None` when the window holds no qualifying pair.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalProfile {
    pub window_minutes: u32,
    pub step_minutes: u32,
    pub kind: StatisticKind,
    pub bin: Option<DistanceBin>,
    pub values: Vec<ProfilePoint>,
}

impl TemporalProfile {
    pub fn get(&self, k: usize) -> Option<f64> {
        self.values[k].value
    }
}

#[derive(Debug, Clone, Default)]
struct WindowCounts {
    pairs: Vec<u64>,
    displaced: Vec<u64>,
    distance_sum: Vec<f64>,
    /// `binned[b][k]`: displaced pairs in window `k` whose distance is in bin `b`.
    binned: Vec<Vec<u64>>,
}

impl WindowCounts {
    fn new(n: usize, n_bins: usize) -> Self {
        Self {
            pairs: vec![0; n],
            displaced: vec![0; n],
            distance_sum: vec![0.0; n],
            binned: vec![vec![0; n]; n_bins],
        }
    }

    fn merge(&mut self, o: &WindowCounts) {
        for k in 0..self.pairs.len() {
            self.pairs[k] += o.pairs[k];
            self.displaced[k] += o.displaced[k];
            self.distance_sum[k] += o.distance_sum[k];
        }
        for (a, b) in self.binned.iter_mut().zip(&o.binned) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
}

type DayCounts = BTreeMap<i64, WindowCounts>;

fn count_user(
    traj: &Trajectory,
    reg: &AntennaRegistry,
    cfg: &ProfileConfig,
    bins: &[DistanceBin],
) -> DayCounts {
    let mut days = DayCounts::new();
    for (a, b) in traj.pairs() {
        let gap = b.timestamp - a.timestamp;
        if gap <= 0 || gap > cfg.max_gap_s {
            continue;
        }
        let local = a.timestamp + cfg.utc_offset_s;
        let day = local.div_euclid(SECONDS_PER_DAY);
        // 1970-01-01 was a Thursday; Monday = 0
        let weekday = (day + 3).rem_euclid(7);
        if cfg.weekdays_only && weekday >= 5 {
            continue;
        }
        let minute = (local.rem_euclid(SECONDS_PER_DAY) / 60) as u32;
        let counts = days
            .entry(day)
            .or_insert_with(|| WindowCounts::new(cfg.n_windows(), bins.len()));
        let moved = a.antenna != b.antenna;
        let d = if moved { reg.distance_km(a.antenna, b.antenna) } else { 0.0 };
        let in_bins: Vec<usize> = if moved {
            (0..bins.len()).filter(|&i| bins[i].contains(d)).collect()
        } else {
            Vec::new()
        };
        for k in cfg.windows_containing(minute) {
            counts.pairs[k] += 1;
            if moved {
                counts.displaced[k] += 1;
                counts.distance_sum[k] += d;
                for &bi in &in_bins {
                    counts.binned[bi][k] += 1;
                }
            }
        }
    }
    days
}

fn count_all(
    log: &EventLog,
    reg: &AntennaRegistry,
    cfg: &ProfileConfig,
    bins: &[DistanceBin],
) -> DayCounts {
    // per-user counts are merged in user order so float sums do not depend on
    // the worker count
    let per_user: Vec<DayCounts> = log
        .trajectories
        .par_iter()
        .map(|t| count_user(t, reg, cfg, bins))
        .collect();
    let mut all = DayCounts::new();
    for user in &per_user {
        for (day, c) in user {
            all.entry(*day)
                .or_insert_with(|| WindowCounts::new(cfg.n_windows(), bins.len()))
                .merge(c);
        }
    }
    all
}

fn pool(
    days: &DayCounts,
    cfg: &ProfileConfig,
    num: impl Fn(&WindowCounts, usize) -> f64,
    den: impl Fn(&WindowCounts, usize) -> u64,
) -> Vec<Option<f64>> {
    (0..cfg.n_windows())
        .map(|k| match cfg.pooling {
            DayPooling::SumCounts => {
                let d: u64 = days.values().map(|c| den(c, k)).sum();
                (d > 0).then(|| days.values().map(|c| num(c, k)).sum::<f64>() / d as f64)
            }
            DayPooling::MeanOfDailyRatios => {
                let ratios: Vec<f64> = days
                    .values()
                    .filter(|c| den(c, k) > 0)
                    .map(|c| num(c, k) / den(c, k) as f64)
                    .collect();
                (!ratios.is_empty()).then(|| ratios.iter().sum::<f64>() / ratios.len() as f64)
            }
        })
        .collect()
}

fn profile(
    cfg: &ProfileConfig,
    kind: StatisticKind,
    bin: Option<DistanceBin>,
    values: Vec<Option<f64>>,
) -> TemporalProfile {
    TemporalProfile {
        window_minutes: cfg.window_min,
        step_minutes: cfg.step_min,
        kind,
        bin,
        values: values
            .into_iter()
            .enumerate()
            .map(|(k, value)| ProfilePoint {
                window_start_min: k as u32 * cfg.step_min,
                value,
            })
            .collect(),
    }
}

/// Fraction of consecutive-call pairs starting in each window whose antennas
/// differ.
pub fn displacement_probability_profile(
    log: &EventLog,
    reg: &AntennaRegistry,
    cfg: &ProfileConfig,
) -> Result<TemporalProfile> {
    cfg.validate()?;
    let days = count_all(log, reg, cfg, &[]);
    let values = pool(&days, cfg, |c, k| c.displaced[k] as f64, |c, k| c.pairs[k]);
    Ok(profile(cfg, StatisticKind::DisplacementProbability, None, values))
}

/// Mean distance of the displaced pairs starting in each window.
pub fn mean_distance_profile(
    log: &EventLog,
    reg: &AntennaRegistry,
    cfg: &ProfileConfig,
) -> Result<TemporalProfile> {
    cfg.validate()?;
    let days = count_all(log, reg, cfg, &[]);
    let values = pool(&days, cfg, |c, k| c.distance_sum[k], |c, k| c.displaced[k]);
    Ok(profile(cfg, StatisticKind::MeanDistanceKm, None, values))
}

/// One displacement-probability profile per distance bin. A pair counts for
/// a bin when it moved and its distance lies in `[lo, hi)`; the denominator
/// is every pair in the window.
pub fn distance_binned_profiles(
    log: &EventLog,
    reg: &AntennaRegistry,
    bins: &[DistanceBin],
    cfg: &ProfileConfig,
) -> Result<Vec<TemporalProfile>> {
    cfg.validate()?;
    validate_bins(bins)?;
    let days = count_all(log, reg, cfg, bins);
    Ok(bins
        .iter()
        .enumerate()
        .map(|(b, &bin)| {
            let values = pool(&days, cfg, |c, k| c.binned[b][k] as f64, |c, k| c.pairs[k]);
            profile(cfg, StatisticKind::DisplacementProbability, Some(bin), values)
        })
        .collect())
}

/// `window_start_min,statistic,kind,bin_lo_km,bin_hi_km`; missing statistics
/// and unbinned bin columns are left empty.
pub fn profiles_to_csv(profiles: &[TemporalProfile]) -> String {
    let mut out = String::from("window_start_min,statistic,kind,bin_lo_km,bin_hi_km\n");
    for p in profiles {
        let (lo, hi) = match p.bin {
            Some(b) => (b.lo.to_string(), b.hi.to_string()),
            None => (String::new(), String::new()),
        };
        for v in &p.values {
            let stat = v.value.map(|x| x.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                v.window_start_min,
                stat,
                p.kind.as_str(),
                lo,
                hi
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{AntennaSite, Visit};

    fn registry(km_apart: f64) -> AntennaRegistry {
        // along the equator 1° of longitude is 111.19 km
        let dlon = km_apart / (crate::ingest::EARTH_RADIUS_KM * std::f64::consts::PI / 180.0);
        AntennaRegistry::with_padded_bounds(vec![
            AntennaSite::new("A", 0.0, 0.0),
            AntennaSite::new("B", dlon, 0.0),
            AntennaSite::new("C", 0.0, dlon),
        ])
        .unwrap()
    }

    fn traj(visits: &[(i64, usize)]) -> Trajectory {
        Trajectory {
            user_id: "u".into(),
            visits: visits
                .iter()
                .map(|&(timestamp, antenna)| Visit { timestamp, antenna })
                .collect(),
        }
    }

    // Monday 2013-12-02 00:00 UTC
    const MONDAY: i64 = 1_385_942_400;

    #[test]
    fn stationary_trajectory_has_no_displacements() {
        let reg = registry(3.2);
        assert!(extract_displacements(&traj(&[(0, 0), (10, 0), (20, 0)]), &reg).is_empty());
    }

    #[test]
    fn single_pair_displacement_distance() {
        let reg = registry(3.2);
        let d = extract_displacements(&traj(&[(0, 0), (60, 1)]), &reg);
        assert_eq!(d.len(), 1);
        assert!((d[0].distance_km - 3.2).abs() < 1e-9, "{}", d[0].distance_km);
    }

    #[test]
    fn gyration_of_two_points_is_half_the_separation() {
        let reg = registry(10.0);
        let g = radius_of_gyration(&traj(&[(0, 0), (1, 1)]), &reg).unwrap();
        assert!((g.r_g - 5.0).abs() < 1e-6, "{}", g.r_g);
        let still = radius_of_gyration(&traj(&[(0, 2), (1, 2), (5, 2)]), &reg).unwrap();
        assert_eq!(still.r_g, 0.0);
    }

    #[test]
    fn profile_extremes() {
        let reg = registry(3.0);
        let cfg = ProfileConfig::default();
        let moving = EventLog {
            trajectories: vec![traj(&[(MONDAY + 3600, 0), (MONDAY + 7200, 1), (MONDAY + 9000, 0)])],
            ..Default::default()
        };
        let p = displacement_probability_profile(&moving, &reg, &cfg).unwrap();
        assert!(p.values.iter().all(|v| v.value.is_none() || v.value == Some(1.0)));
        assert_eq!(p.get(6), Some(1.0)); // 01:00 window
        assert_eq!(p.get(100), None);
        let still = EventLog {
            trajectories: vec![traj(&[(MONDAY + 3600, 0), (MONDAY + 7200, 0)])],
            ..Default::default()
        };
        let p = displacement_probability_profile(&still, &reg, &cfg).unwrap();
        assert!(p.values.iter().all(|v| v.value.is_none() || v.value == Some(0.0)));
    }

    #[test]
    fn mean_distance_singleton_and_missing() {
        let reg = registry(7.0);
        let cfg = ProfileConfig::default();
        let log = EventLog {
            trajectories: vec![traj(&[(MONDAY + 600, 0), (MONDAY + 1200, 1)])],
            ..Default::default()
        };
        let p = mean_distance_profile(&log, &reg, &cfg).unwrap();
        assert!((p.get(0).unwrap() - 7.0).abs() < 1e-9);
        assert_eq!(p.get(50), None);
    }

    #[test]
    fn weekend_pairs_are_excluded() {
        let reg = registry(3.0);
        let saturday = MONDAY + 5 * SECONDS_PER_DAY;
        let log = EventLog {
            trajectories: vec![traj(&[(saturday + 600, 0), (saturday + 1200, 1)])],
            ..Default::default()
        };
        let cfg = ProfileConfig::default();
        let p = displacement_probability_profile(&log, &reg, &cfg).unwrap();
        assert!(p.values.iter().all(|v| v.value.is_none()));
        let all_days = ProfileConfig { weekdays_only: false, ..cfg };
        let p = displacement_probability_profile(&log, &reg, &all_days).unwrap();
        assert_eq!(p.get(0), Some(1.0));
    }

    #[test]
    fn bin_edges_are_half_open() {
        let reg = registry(1.0);
        let log = EventLog {
            trajectories: vec![traj(&[(MONDAY + 600, 0), (MONDAY + 1200, 1)])],
            ..Default::default()
        };
        let d = reg.distance_km(0, 1);
        assert!((d - 1.0).abs() < 1e-9);
        let bins = [DistanceBin::new(0.0, d), DistanceBin::new(d, 5.0)];
        let ps = distance_binned_profiles(&log, &reg, &bins, &ProfileConfig::default()).unwrap();
        assert_eq!(ps[0].get(0), Some(0.0));
        assert_eq!(ps[1].get(0), Some(1.0));
    }

    #[test]
    fn overlapping_bins_rejected() {
        let reg = registry(1.0);
        let bins = [DistanceBin::new(0.0, 2.0), DistanceBin::new(1.0, 5.0)];
        assert!(distance_binned_profiles(&EventLog::default(), &reg, &bins, &ProfileConfig::default()).is_err());
    }

    #[test]
    fn windows_wrap_midnight() {
        let cfg = ProfileConfig::default();
        let ks: Vec<usize> = cfg.windows_containing(5).collect();
        // windows starting 23:30, 23:40, 23:50, 00:00
        assert_eq!(ks, vec![0, 141, 142, 143]);
    }
}
