//! Per-user homes, workplaces and daily call streams.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use serde::Serialize;

use super::geography::Geography;
use super::SocietySpec;
use crate::distributions::TruncatedPowerLaw;
use crate::error::{validation, Result};
use crate::ingest::{AntennaRegistry, Xy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TripKind {
    Commute,
    CommuteReturn,
    Midday,
    MiddayReturn,
    Leisure,
    LeisureReturn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedTrip {
    pub day: usize,
    pub kind: TripKind,
    pub origin: String,
    pub destination: String,
    /// Timestamp of the origin call.
    pub depart: i64,
    /// Timestamp of the destination call.
    pub arrive: i64,
    pub distance_km: f64,
    /// Destination lies outside the user's home level-1 region.
    pub inter_region: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantedUser {
    pub user_id: String,
    pub home: String,
    pub home_region: String,
    /// Takes short midday trips on days whose destination allows them.
    pub midday_cohort: bool,
    pub n_events: usize,
    pub trips: Vec<PlantedTrip>,
}

const SECONDS_PER_DAY: i64 = 86_400;
/// Relative tolerance on a drawn jump length when picking an antenna.
const JUMP_LOG_TOL: f64 = 0.223_143_551_314_209_7; // ln 1.25

pub(crate) struct World<'a> {
    spec: &'a SocietySpec,
    law: TruncatedPowerLaw,
    ids: Vec<String>,
    /// Haversine distances between antennas.
    dist: Vec<Vec<f64>>,
    pop: Vec<f64>,
    region: Vec<(usize, usize)>,
    /// Population-weighted centroid and population of each sub-community,
    /// indexed by `tribe * n_sub + sub`.
    sub_center: Vec<Xy>,
    sub_pop: Vec<f64>,
    sub_members: Vec<Vec<usize>>,
    home_choice: WeightedIndex<f64>,
    capital_antenna: usize,
    /// Same-tribe antennas within the midday radius.
    midday_nbrs: Vec<Vec<usize>>,
}

struct Trip {
    kind: TripKind,
    depart: i64,
    from: usize,
    to: usize,
}

impl<'a> World<'a> {
    pub fn new(spec: &'a SocietySpec, reg: &AntennaRegistry, geo: &Geography) -> Result<Self> {
        let n = reg.len();
        let n_sub = spec.n_subcommunities_per_region;
        let n_regions = spec.n_level1_regions * n_sub;
        let pop: Vec<f64> = reg.sites().iter().map(|s| s.population).collect();
        let dist: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| reg.distance_km(a, b)).collect()).collect();
        let region = geo.antenna_region.clone();
        let mut sub_members = vec![Vec::new(); n_regions];
        for (k, &(t, s)) in region.iter().enumerate() {
            sub_members[t * n_sub + s].push(k);
        }
        let xy: Vec<Xy> = (0..n).map(|k| reg.projected(k)).collect();
        let mut sub_center = Vec::with_capacity(n_regions);
        let mut sub_pop = Vec::with_capacity(n_regions);
        for members in &sub_members {
            if members.is_empty() {
                return Err(validation!("a planted sub-community received no antennas"));
            }
            let m: f64 = members.iter().map(|&k| pop[k]).sum();
            let (w, total) = if m > 0.0 {
                (members.iter().map(|&k| pop[k]).collect::<Vec<_>>(), m)
            } else {
                (vec![1.0; members.len()], members.len() as f64)
            };
            let cx = members.iter().zip(&w).map(|(&k, w)| xy[k].x * w).sum::<f64>() / total;
            let cy = members.iter().zip(&w).map(|(&k, w)| xy[k].y * w).sum::<f64>() / total;
            sub_center.push(Xy::new(cx, cy));
            sub_pop.push(m);
        }
        let home_choice = WeightedIndex::new(pop.iter().map(|&p| p.max(0.0)))
            .or_else(|_| WeightedIndex::new(vec![1.0; n]))
            .map_err(|e| validation!("cannot weight homes: {e}"))?;
        let capital_antenna = (0..n)
            .filter(|&k| region[k] == (0, 0))
            .min_by(|&a, &b| geo.antennas[a].dist2(geo.capital).total_cmp(&geo.antennas[b].dist2(geo.capital)))
            .expect("capital region holds antennas");
        let r = spec.schedule.midday_radius_km;
        let midday_nbrs = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&b| b != a && region[b].0 == region[a].0 && dist[a][b] <= r && dist[a][b] > 0.0)
                    .collect()
            })
            .collect();
        Ok(Self {
            spec,
            law: spec.law(),
            ids: reg.ids().map(str::to_owned).collect(),

            dist,
            pop,
            region,
            sub_center,
            sub_pop,
            sub_members,
            home_choice,
            capital_antenna,
            midday_nbrs,
        })
    }

    pub fn capital_antenna(&self) -> usize {
        self.capital_antenna
    }

    /// Draws a destination for a trip leaving home.
    fn destination(&self, from: usize, rng: &mut ChaCha8Rng) -> usize {
        let tribe = self.region[from].0;
        if self.spec.n_level1_regions < 2 || rng.random::<f64>() < self.spec.rho {
            self.intra_destination(from, tribe, rng)
        } else {
            self.inter_destination(from, tribe, rng)
        }
    }

    /// A jump length from the law; among in-region antennas whose distance is
    /// within 25% of it, one is picked with probability proportional to its
    /// population. Failing that, the antenna whose distance is closest in log.
    fn intra_destination(&self, from: usize, tribe: usize, rng: &mut ChaCha8Rng) -> usize {
        let ln_len = self.law.sample(rng).ln();
        let candidates: Vec<usize> = (0..self.ids.len())
            .filter(|&k| k != from && self.region[k].0 == tribe && self.dist[from][k] > 0.0)
            .collect();
        let near: Vec<usize> = candidates
            .iter()
            .copied()
            .filter(|&k| (self.dist[from][k].ln() - ln_len).abs() <= JUMP_LOG_TOL)
            .collect();
        if !near.is_empty() {
            let w: Vec<f64> = near.iter().map(|&k| self.pop[k]).collect();
            return near[pick(&w, rng)];
        }
        candidates
            .into_iter()
            .min_by(|&a, &b| {
                let da = (self.dist[from][a].ln() - ln_len).abs();
                let db = (self.dist[from][b].ln() - ln_len).abs();
                da.total_cmp(&db)
            })
            .unwrap_or(from)
    }

    /// A sub-community outside the home tribe weighted by the gravity
    /// kernel, then an antenna in it weighted by population times the jump
    /// density at its distance.
    fn inter_destination(&self, from: usize, tribe: usize, rng: &mut ChaCha8Rng) -> usize {
        let n_sub = self.spec.n_subcommunities_per_region;
        let (t0, s0) = self.region[from];
        let origin = t0 * n_sub + s0;
        let m = self.sub_pop[origin].max(f64::MIN_POSITIVE);
        let w: Vec<f64> = (0..self.sub_pop.len())
            .map(|r| {
                if r / n_sub == tribe {
                    return 0.0;
                }
                let d = self.sub_center[origin].dist(self.sub_center[r]).max(1e-9);
                m.powf(self.spec.alpha) * self.sub_pop[r].max(f64::MIN_POSITIVE).powf(self.spec.beta_g)
                    / d.powf(self.spec.gamma)
            })
            .collect();
        let r = pick(&w, rng);
        let members = &self.sub_members[r];
        let w: Vec<f64> = members
            .iter()
            .map(|&k| self.pop[k].max(0.0) * self.law.pdf(self.dist[from][k].max(1e-9)))
            .collect();
        members[pick(&w, rng)]
    }

    pub fn simulate_user(&self, user_id: &str, rng: &mut ChaCha8Rng) -> (PlantedUser, Vec<(i64, usize)>) {
        let sched = &self.spec.schedule;
        let home = self.home_choice.sample(rng);
        let cohort = rng.random::<f64>() < sched.midday_share;
        let commute_jitter = Normal::new(0.0, sched.commute_jitter_min * 60.0).expect("finite sd");
        let midday_jitter = Normal::new(0.0, sched.midday_jitter_min * 60.0).expect("finite sd");
        let fill_ins = (sched.fill_in_rate > 0.0).then(|| Poisson::new(sched.fill_in_rate).expect("positive rate"));
        let at = |h: f64, jitter: &Normal<f64>, rng: &mut ChaCha8Rng| {
            ((h * 3600.0 + jitter.sample(rng)).round() as i64).clamp(0, SECONDS_PER_DAY - 1)
        };

        let mut calls: Vec<(i64, usize)> = Vec::new();
        let mut trips = Vec::new();
        for day in 0..self.spec.days {
            let midnight = self.spec.start_timestamp + day as i64 * SECONDS_PER_DAY;
            let mut plan: Vec<Trip> = Vec::new();
            if day % 7 < 5 {
                if rng.random::<f64>() < sched.commute_weight {
                    let work = self.destination(home, rng);
                    plan.push(Trip { kind: TripKind::Commute, depart: at(sched.morning_h, &commute_jitter, rng), from: home, to: work });
                    if cohort && !self.midday_nbrs[work].is_empty() && rng.random::<f64>() < sched.midday_weight {
                        let nbrs = &self.midday_nbrs[work];
                        let spot = nbrs[rng.random_range(0..nbrs.len())];
                        plan.push(Trip { kind: TripKind::Midday, depart: at(sched.midday_out_h, &midday_jitter, rng), from: work, to: spot });
                        plan.push(Trip { kind: TripKind::MiddayReturn, depart: at(sched.midday_back_h, &midday_jitter, rng), from: spot, to: work });
                    }
                    plan.push(Trip { kind: TripKind::CommuteReturn, depart: at(sched.evening_h, &commute_jitter, rng), from: work, to: home });
                }
            } else if rng.random::<f64>() < sched.weekend_weight {
                let dest = self.destination(home, rng);
                plan.push(Trip { kind: TripKind::Leisure, depart: at(sched.weekend_out_h, &commute_jitter, rng), from: home, to: dest });
                plan.push(Trip { kind: TripKind::LeisureReturn, depart: at(sched.weekend_back_h, &commute_jitter, rng), from: dest, to: home });
            }

            // (origin call, destination call) per trip, kept in order
            let mut day_calls: Vec<(i64, usize)> = Vec::new();
            let mut spans: Vec<(i64, i64, usize)> = Vec::new();
            let mut floor = 0;
            for trip in &plan {
                let depart = trip.depart.max(floor);
                let delay = rng.random_range(sched.trip_delay_min.0..sched.trip_delay_min.1);
                let arrive = depart + (delay * 60.0).round() as i64;
                day_calls.push((depart, trip.from));
                day_calls.push((arrive, trip.to));
                spans.push((depart, arrive, trip.to));
                floor = arrive + 1;
            }
            let n_fill = fill_ins.as_ref().map_or(0, |p| p.sample(rng) as usize);
            let lo = (sched.active_from_h * 3600.0) as i64;
            let hi = (sched.active_to_h * 3600.0) as i64;
            for _ in 0..n_fill {
                let t = rng.random_range(lo..hi);
                if spans.iter().any(|&(a, b, _)| t >= a && t <= b) {
                    continue;
                }
                let place = spans.iter().rev().find(|&&(_, b, _)| b < t).map_or(home, |s| s.2);
                day_calls.push((t, place));
            }
            day_calls.sort_by_key(|c| c.0);

            let mut last = calls.last().map_or(i64::MIN, |c| c.0);
            let mut stamps = Vec::with_capacity(day_calls.len());
            for &(t, a) in &day_calls {
                let ts = (midnight + t).max(last + 1);
                last = ts;
                stamps.push(ts);
                calls.push((ts, a));
            }
            for (k, trip) in plan.iter().enumerate() {
                let (depart, arrive) = (spans[k].0, spans[k].1);
                let stamp = |t: i64| {
                    let pos = day_calls.iter().position(|c| c.0 == t).expect("trip call present");
                    stamps[pos]
                };
                trips.push(PlantedTrip {
                    day,
                    kind: trip.kind,
                    origin: self.ids[trip.from].clone(),
                    destination: self.ids[trip.to].clone(),
                    depart: stamp(depart),
                    arrive: stamp(arrive),
                    distance_km: self.dist[trip.from][trip.to],
                    inter_region: self.region[trip.to].0 != self.region[home].0,
                });
            }
        }
        let planted = PlantedUser {
            user_id: user_id.to_owned(),
            home: self.ids[home].clone(),
            home_region: format!("T{}", self.region[home].0),
            midday_cohort: cohort,
            n_events: calls.len(),
            trips,
        };
        (planted, calls)
    }
}

fn pick(w: &[f64], rng: &mut ChaCha8Rng) -> usize {
    match WeightedIndex::new(w.iter().map(|&x| if x.is_finite() { x.max(0.0) } else { 0.0 })) {
        Ok(d) => d.sample(rng),
        Err(_) => {
            let live: Vec<usize> = (0..w.len()).filter(|&k| w[k] > 0.0 || w.iter().all(|&x| x <= 0.0)).collect();
            live[rng.random_range(0..live.len())]
        }
    }
}
