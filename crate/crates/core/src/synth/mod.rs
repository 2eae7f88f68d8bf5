//! Deterministic synthetic societies with planted regions, flows and
//! schedules, emitted in the same file formats the ingest layer reads.

mod geography;
mod schedule;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::TruncatedPowerLaw;
use crate::error::{validation, Error, Result};
use crate::ingest::{
    assign_population, build_voronoi, collapse_colocated, AntennaRegistry, AntennaSite, LonLat,
    PopulationRaster, RasterSample,
};

pub use schedule::{PlantedTrip, PlantedUser, TripKind};

/// Generator identity recorded in every manifest.
pub const GENERATOR_RNG: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64(seed); stream 0 for geography, stream k+1 for user k";
pub const GENERATOR_VERSION: &str = "mobility-synth/1";

/// Window used for the planted transition tally; matches the network default.
pub const TALLY_WINDOW_S: i64 = 86_400;

/// Daily activity template. Times are hours after local midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleTemplate {
    pub morning_h: f64,
    pub evening_h: f64,
    pub midday_out_h: f64,
    pub midday_back_h: f64,
    pub weekend_out_h: f64,
    pub weekend_back_h: f64,
    /// Probability a user commutes on a given weekday.
    pub commute_weight: f64,
    /// Share of eligible users that take short midday trips.
    pub midday_share: f64,
    /// Daily probability of a midday trip for a cohort member.
    pub midday_weight: f64,
    pub weekend_weight: f64,
    pub commute_jitter_min: f64,
    pub midday_jitter_min: f64,
    /// A work antenna qualifies for midday trips when a same-region antenna
    /// lies within this radius.
    pub midday_radius_km: f64,
    /// Stationary calls per user per day.
    pub fill_in_rate: f64,
    pub active_from_h: f64,
    pub active_to_h: f64,
    /// Delay between the origin and destination call of a trip, minutes.
    pub trip_delay_min: (f64, f64),
}

impl Default for ScheduleTemplate {
    fn default() -> Self {
        Self {
            morning_h: 8.0,
            evening_h: 19.0,
            midday_out_h: 12.5,
            midday_back_h: 13.25,
            weekend_out_h: 11.0,
            weekend_back_h: 17.0,
            commute_weight: 0.85,
            midday_share: 0.6,
            midday_weight: 0.7,
            weekend_weight: 0.5,
            commute_jitter_min: 15.0,
            midday_jitter_min: 10.0,
            midday_radius_km: 1.0,
            fill_in_rate: 4.0,
            active_from_h: 6.0,
            active_to_h: 23.0,
            trip_delay_min: (5.0, 30.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SocietySpec {
    pub seed: u64,
    pub n_level1_regions: usize,
    pub n_subcommunities_per_region: usize,
    pub n_antennas: usize,
    pub n_users: usize,
    pub days: usize,
    /// Probability that a destination draw stays in the home level-1 region.
    pub rho: f64,
    pub alpha: f64,
    pub beta_g: f64,
    pub gamma: f64,
    pub delta_r0_km: f64,
    pub beta: f64,
    pub kappa_km: f64,
    pub schedule: ScheduleTemplate,
    /// `[west, south, east, north]` in degrees.
    pub bbox: [f64; 4],
    pub n_capital_antennas: usize,
    pub capital_radius_km: f64,
    /// Standard deviation of rural antenna scatter around a sub-community center.
    pub rural_spread_km: f64,
    pub capital_peak_density: f64,
    pub background_density: f64,
    pub raster_spacing_deg: f64,
    /// Flat density everywhere instead of blobs.
    pub uniform_population: bool,
    /// Groups of 2–3 antennas planted at (nearly) the same location.
    pub n_colocated_groups: usize,
    pub grid_columns: usize,
    pub grid_rows: usize,
    /// Unix time of the first simulated midnight (UTC). Must be a Monday.
    pub start_timestamp: i64,
}

impl Default for SocietySpec {
    fn default() -> Self {
        Self {
            seed: 20131201,
            n_level1_regions: 5,
            n_subcommunities_per_region: 3,
            n_antennas: 200,
            n_users: 2000,
            days: 14,
            rho: 0.9,
            alpha: 1.0,
            beta_g: 1.0,
            gamma: 2.0,
            delta_r0_km: 60.0,
            beta: 1.62,
            kappa_km: 122.0,
            schedule: ScheduleTemplate::default(),
            bbox: [-8.0, 5.0, -3.0, 10.0],
            n_capital_antennas: 40,
            capital_radius_km: 3.0,
            rural_spread_km: 60.0,
            capital_peak_density: 5000.0,
            background_density: 5.0,
            raster_spacing_deg: 0.05,
            uniform_population: false,
            n_colocated_groups: 0,
            grid_columns: 5,
            grid_rows: 3,
            start_timestamp: 1_385_942_400,
        }
    }
}

impl SocietySpec {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_level1_regions", self.n_level1_regions),
            ("n_subcommunities_per_region", self.n_subcommunities_per_region),
            ("n_antennas", self.n_antennas),
            ("n_users", self.n_users),
            ("days", self.days),
            ("grid_columns", self.grid_columns),
            ("grid_rows", self.grid_rows),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(validation!("{name} must be at least 1"));
        }
        let n_sub = self.n_level1_regions * self.n_subcommunities_per_region;
        if n_sub > self.n_antennas {
            return Err(validation!(
                "{n_sub} sub-communities cannot be populated by {} antennas",
                self.n_antennas
            ));
        }
        if self.n_level1_regions < 2 && self.rho < 1.0 {
            return Err(validation!("rho < 1 needs at least two level-1 regions"));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return Err(validation!("rho must lie in [0, 1], got {}", self.rho));
        }
        let s = &self.schedule;
        for p in [s.commute_weight, s.midday_share, s.midday_weight, s.weekend_weight] {
            if !(0.0..=1.0).contains(&p) {
                return Err(validation!("schedule probabilities must lie in [0, 1], got {p}"));
            }
        }
        let times = [s.morning_h, s.evening_h, s.midday_out_h, s.midday_back_h, s.weekend_out_h, s.weekend_back_h];
        if times.iter().any(|t| !(0.0..24.0).contains(t)) || !(s.active_from_h < s.active_to_h) {
            return Err(validation!("schedule times must fall within the day"));
        }
        if !(s.morning_h < s.midday_out_h && s.midday_out_h < s.midday_back_h && s.midday_back_h < s.evening_h)
            || !(s.weekend_out_h < s.weekend_back_h)
        {
            return Err(validation!("schedule times are out of order"));
        }
        if !(0.0 < s.trip_delay_min.0 && s.trip_delay_min.0 < s.trip_delay_min.1) || !(s.fill_in_rate >= 0.0) {
            return Err(validation!("invalid trip delay or fill-in rate"));
        }
        for g in [self.alpha, self.beta_g, self.gamma] {
            if !g.is_finite() {
                return Err(validation!("gravity exponents must be finite"));
            }
        }
        TruncatedPowerLaw::new(self.delta_r0_km, self.beta, self.kappa_km)?;
        let [w, so, e, n] = self.bbox;
        if !(w < e && so < n) || !LonLat::new(w, so).is_valid() || !LonLat::new(e, n).is_valid() {
            return Err(validation!("invalid bounding box"));
        }
        if !(self.raster_spacing_deg > 0.0) || !(self.background_density > 0.0) {
            return Err(validation!("raster spacing and background density must be positive"));
        }
        if (self.start_timestamp.div_euclid(86_400) + 3).rem_euclid(7) != 0 || self.start_timestamp % 86_400 != 0 {
            return Err(validation!("start_timestamp must be a Monday midnight UTC"));
        }
        if 2 * self.n_colocated_groups > self.n_antennas {
            return Err(validation!("too many co-located groups for {} antennas", self.n_antennas));
        }
        Ok(())
    }

    pub fn law(&self) -> TruncatedPowerLaw {
        TruncatedPowerLaw::new(self.delta_r0_km, self.beta, self.kappa_km).expect("validated")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Transition {
    pub from: String,
    pub to: String,
    pub count: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GroundTruthManifest {
    pub generator_version: String,
    pub rng: String,
    pub spec: SocietySpec,
    /// Scheme name to antenna-to-label assignment.
    pub partitions: BTreeMap<String, BTreeMap<String, String>>,
    /// Sub-community label to its level-1 label.
    pub level1_of_sub: BTreeMap<String, String>,
    pub capital_region: String,
    pub capital_antenna: String,
    pub colocated_groups: Vec<Vec<String>>,
    pub n_events: usize,
    pub transition_window_s: i64,
    /// Consecutive-call transitions per user, including repeats at one antenna.
    pub transitions: Vec<Transition>,
    pub users: Vec<PlantedUser>,
}

impl GroundTruthManifest {
    pub fn tally(&self) -> BTreeMap<(String, String), u64> {
        self.transitions
            .iter()
            .map(|t| ((t.from.clone(), t.to.clone()), t.count))
            .collect()
    }
}

/// Names of the emitted files, in write order.
pub const SOCIETY_FILES: [&str; 9] = [
    "antennas.csv",
    "population.csv",
    "population.json",
    "tribes.csv",
    "subcommunities.csv",
    "grid.csv",
    "grid_columns.csv",
    "cdr.csv",
    "manifest.json",
];

#[derive(Debug, Clone)]
pub struct Society {
    pub manifest: GroundTruthManifest,
    files: Vec<(&'static str, String)>,
}

impl Society {
    pub fn files(&self) -> &[(&'static str, String)] {
        &self.files
    }

    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| *n == name).map(|(_, s)| s.as_str())
    }

    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in &self.files {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

fn id_width(n: usize) -> usize {
    n.to_string().len().max(4)
}

pub fn generate(spec: &SocietySpec) -> Result<Society> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut geo = geography::build(spec, &mut rng)?;
    let colocated = geography::plant_colocated(spec, &mut geo, &mut rng);
    let raster_samples = geography::population(spec, &geo, &mut rng);

    let aw = id_width(spec.n_antennas);
    let ids: Vec<String> = (0..geo.antennas.len()).map(|k| format!("A{:0aw$}", k + 1)).collect();
    let mut antennas_csv = String::from("antenna_id,lon,lat\n");
    let mut sites = Vec::with_capacity(ids.len());
    for (id, &p) in ids.iter().zip(&geo.antennas) {
        let ll = geo.projection.inverse(p);
        let (lon, lat) = (fmt6(ll.lon), fmt6(ll.lat));
        writeln!(antennas_csv, "{id},{lon},{lat}").unwrap();
        sites.push(AntennaSite::new(id.clone(), lon.parse().unwrap(), lat.parse().unwrap()));
    }

    let mut population_csv = String::from("lon,lat,density\n");
    let mut samples = Vec::with_capacity(raster_samples.len());
    for s in &raster_samples {
        let (lon, lat, d) = (fmt6(s.lon), fmt6(s.lat), fmt6(s.density));
        writeln!(population_csv, "{lon},{lat},{d}").unwrap();
        samples.push(RasterSample {
            lon: lon.parse().unwrap(),
            lat: lat.parse().unwrap(),
            density: d.parse().unwrap(),
        });
    }
    let sidecar = format!("{{\"spacing_deg\":{}}}\n", spec.raster_spacing_deg);
    let raster = PopulationRaster {
        spacing_deg: spec.raster_spacing_deg,
        samples,
    };

    // Populations come from the same tessellation the analysis will build,
    // with co-located members splitting their merged cell evenly.
    let reg = AntennaRegistry::with_padded_bounds(sites)?;
    let collapsed = collapse_colocated(&reg, 1.0)?;
    let tess = build_voronoi(&collapsed.registry)?;
    let assigned = assign_population(&collapsed.registry, &tess, &raster)?.registry;
    let mut group_size: BTreeMap<&str, usize> = BTreeMap::new();
    for rep in collapsed.mapping.values() {
        *group_size.entry(rep).or_default() += 1;
    }
    let pops: Vec<f64> = ids
        .iter()
        .map(|id| {
            let rep = &collapsed.mapping[id];
            let k = assigned.index_of(rep).expect("representative is a site");
            assigned.site(k).population / group_size[rep.as_str()] as f64
        })
        .collect();
    let reg = reg.with_populations(&pops)?;

    let n_sub = spec.n_subcommunities_per_region;
    let tribe_label = |t: usize| format!("T{t}");
    let sub_label = |t: usize, s: usize| format!("T{t}S{s}");
    let [w, so, e, n] = spec.bbox;
    let mut partitions: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
    for (k, id) in ids.iter().enumerate() {
        let (t, s) = geo.antenna_region[k];
        let ll = reg.site(k).position;
        let col = (((ll.lon - w) / (e - w) * spec.grid_columns as f64).floor() as usize).min(spec.grid_columns - 1);
        let row = (((ll.lat - so) / (n - so) * spec.grid_rows as f64).floor() as usize).min(spec.grid_rows - 1);
        for (scheme, label) in [
            ("tribes", tribe_label(t)),
            ("subcommunities", sub_label(t, s)),
            ("grid", format!("G{col}{row}")),
            ("grid_columns", format!("C{col}")),
        ] {
            partitions.entry(scheme.into()).or_default().insert(id.clone(), label);
        }
    }
    let level1_of_sub: BTreeMap<String, String> = (0..spec.n_level1_regions)
        .flat_map(|t| (0..n_sub).map(move |s| (sub_label(t, s), tribe_label(t))))
        .collect();

    let world = schedule::World::new(spec, &reg, &geo)?;
    let uw = id_width(spec.n_users);
    let mut users = Vec::with_capacity(spec.n_users);
    let mut events: Vec<(i64, usize, usize)> = Vec::new();
    let mut tally: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for u in 0..spec.n_users {
        let mut urng = ChaCha8Rng::seed_from_u64(spec.seed);
        urng.set_stream(u as u64 + 1);
        let user_id = format!("U{:0uw$}", u + 1);
        let (planted, calls) = world.simulate_user(&user_id, &mut urng);
        for pair in calls.windows(2) {
            let dt = pair[1].0 - pair[0].0;
            if dt > 0 && dt <= TALLY_WINDOW_S {
                *tally.entry((pair[0].1, pair[1].1)).or_default() += 1;
            }
        }
        events.extend(calls.into_iter().map(|(t, a)| (t, u, a)));
        users.push(planted);
    }
    let transitions = tally
        .into_iter()
        .map(|((a, b), count)| Transition {
            from: ids[a].clone(),
            to: ids[b].clone(),
            count,
        })
        .collect::<Vec<_>>();

    events.sort_unstable();
    let mut cdr_csv = String::with_capacity(events.len() * 24);
    cdr_csv.push_str("timestamp,user_id,antenna_id\n");
    for &(t, u, a) in &events {
        writeln!(cdr_csv, "{t},{},{}", users[u].user_id, ids[a]).unwrap();
    }

    let partition_csv = |scheme: &str| {
        let mut s = String::from("antenna_id,region_label\n");
        for (id, label) in &partitions[scheme] {
            writeln!(s, "{id},{label}").unwrap();
        }
        s
    };
    let files_partitions = ["tribes", "subcommunities", "grid", "grid_columns"].map(partition_csv);

    let manifest = GroundTruthManifest {
        generator_version: GENERATOR_VERSION.into(),
        rng: GENERATOR_RNG.into(),
        spec: spec.clone(),
        level1_of_sub,
        capital_region: tribe_label(0),
        capital_antenna: ids[world.capital_antenna()].clone(),
        colocated_groups: colocated
            .iter()
            .map(|g| g.iter().map(|&k| ids[k].clone()).collect())
            .collect(),
        partitions,
        n_events: events.len(),
        transition_window_s: TALLY_WINDOW_S,
        transitions,
        users,
    };
    let mut manifest_json = serde_json::to_string(&manifest).expect("manifest serializes");
    manifest_json.push('\n');

    let [tribes, subs, grid, cols] = files_partitions;
    let files = vec![
        (SOCIETY_FILES[0], antennas_csv),
        (SOCIETY_FILES[1], population_csv),
        (SOCIETY_FILES[2], sidecar),
        (SOCIETY_FILES[3], tribes),
        (SOCIETY_FILES[4], subs),
        (SOCIETY_FILES[5], grid),
        (SOCIETY_FILES[6], cols),
        (SOCIETY_FILES[7], cdr_csv),
        (SOCIETY_FILES[8], manifest_json),
    ];
    Ok(Society { manifest, files })
}
