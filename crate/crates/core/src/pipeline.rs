//! End-to-end runs over files on disk. Each command returns its artifacts as
//! named byte strings so the CLI only has to write them.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::borders::{
    border_histogram, border_polylines, histograms_to_csv, sample_border_strength, strength_field,
    SamplingOptions,
};
use crate::distributions::{
    estimate_pdf, fit_truncated_power_law, per_region_fits, FitOptions, RegionAttribution,
};
use crate::error::{validation, Error, Result};
use crate::flux_models::{
    affinity_bias, aggregate_flux, distance_binned_comparison, flux_to_csv, gravity_fit,
    gravity_predict, level1_of_regions, mape, mape_over, normalized_mapes, radiation_from_observed,
    region_profiles, split_intra_inter, FluxMatrix, RegionProfile,
};
use crate::ingest::{
    assign_population, build_voronoi, collapse_colocated, load_antennas, load_events_with,
    load_partition, load_population, population::sidecar_path, AntennaRegistry, EventLog,
    EventOptions, PartitionScheme, StudyWindow, VoronoiTessellation,
};
use crate::network::{
    build_mobility_network, constrained_subcommunities, louvain_best_of, modularity,
    similarity_indices_verbose, CommunityAssignment, MobilityNetwork, DEFAULT_TRANSITION_WINDOW_S,
    LOUVAIN_VERSION,
};
use crate::synth::{self, SocietySpec};
use crate::trajectories::{
    all_displacements, displacement_probability_profile, distance_binned_profiles,
    gyration_samples, mean_distance_profile, profiles_to_csv, DistanceBin, ProfileConfig,
    DEFAULT_BINS_KM,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default co-location tolerance in metres.
pub const DEFAULT_COLOCATION_TOL_M: f64 = 1.0;

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub antennas: PathBuf,
    pub population: Option<PathBuf>,
    pub cdr: Option<PathBuf>,
    /// `(name, path)` in command-line order.
    pub partitions: Vec<(String, PathBuf)>,
    pub window: Option<StudyWindow>,
    pub seed: Option<u64>,
    pub utc_offset_hours: f64,
    pub colocation_tol_m: f64,
}

impl RunConfig {
    pub fn new(antennas: impl Into<PathBuf>) -> Self {
        Self {
            antennas: antennas.into(),
            population: None,
            cdr: None,
            partitions: Vec::new(),
            window: None,
            seed: None,
            utc_offset_hours: 0.0,
            colocation_tol_m: DEFAULT_COLOCATION_TOL_M,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut files = vec![&self.antennas];
        files.extend(self.population.iter());
        files.extend(self.cdr.iter());
        files.extend(self.partitions.iter().map(|(_, p)| p));
        for f in files {
            if !f.is_file() {
                return Err(validation!("input file {} does not exist", f.display()));
            }
        }
        let mut names: Vec<&str> = self.partitions.iter().map(|(n, _)| n.as_str()).collect();
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(validation!("partition {} given twice", w[0]));
        }
        if !self.utc_offset_hours.is_finite() || self.utc_offset_hours.abs() > 14.0 {
            return Err(validation!("utc offset must lie within ±14 hours"));
        }
        Ok(())
    }

    fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| validation!("this command needs an explicit --seed"))
    }

    fn require_population(&self) -> Result<()> {
        match self.population {
            Some(_) => Ok(()),
            None => Err(validation!("flux models need region populations; pass --population")),
        }
    }

    fn require_cdr(&self) -> Result<&Path> {
        self.cdr
            .as_deref()
            .ok_or_else(|| validation!("this command needs --cdr"))
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

impl Artifact {
    fn new(name: impl Into<String>, contents: String) -> Self {
        Self {
            name: name.into(),
            contents,
        }
    }

    fn json(name: impl Into<String>, value: &Value) -> Self {
        let mut s = serde_json::to_string_pretty(value).expect("json values serialize");
        s.push('\n');
        Self::new(name, s)
    }
}

pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for a in artifacts {
        let p = dir.join(&a.name);
        std::fs::write(&p, &a.contents).map_err(|e| Error::io(&p, e))?;
    }
    Ok(())
}

fn digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn to_value<S: Serialize>(v: &S) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

/// Everything loaded from a [`RunConfig`], after co-location merging.
pub struct Inputs {
    pub registry: AntennaRegistry,
    pub tessellation: VoronoiTessellation,
    /// Original antenna id to the id representing it after merging.
    pub mapping: BTreeMap<String, String>,
    pub n_input_sites: usize,
    pub outside_mass: f64,
    pub outside_samples: usize,
    /// Restricted to the merged registry.
    pub schemes: BTreeMap<String, PartitionScheme>,
    pub events: Option<EventLog>,
    provenance: Value,
}

impl Inputs {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let mut digests = BTreeMap::new();
        digests.insert("antennas".to_owned(), digest(&cfg.antennas)?);
        let raw = load_antennas(&cfg.antennas)?;
        let collapsed = collapse_colocated(&raw, cfg.colocation_tol_m)?;
        let mut registry = collapsed.registry;
        let tessellation = build_voronoi(&registry)?;
        let (mut outside_mass, mut outside_samples) = (0.0, 0);
        if let Some(p) = &cfg.population {
            digests.insert("population".to_owned(), digest(p)?);
            digests.insert("population_sidecar".to_owned(), digest(&sidecar_path(p))?);
            let raster = load_population(p)?;
            let assigned = assign_population(&registry, &tessellation, &raster)?;
            registry = assigned.registry;
            outside_mass = assigned.outside_mass;
            outside_samples = assigned.outside_samples;
        }
        let mut schemes = BTreeMap::new();
        for (name, path) in &cfg.partitions {
            digests.insert(format!("partition:{name}"), digest(path)?);
            schemes.insert(name.clone(), load_partition(path, name)?.restrict_to(&registry)?);
        }
        let events = match &cfg.cdr {
            Some(p) => {
                digests.insert("cdr".to_owned(), digest(p)?);
                let opts = EventOptions {
                    window: cfg.window,
                    remap: Some(&collapsed.mapping),
                };
                Some(load_events_with(p, &registry, &opts)?)
            }
            None => None,
        };
        let provenance = json!({
            "tool_version": TOOL_VERSION,
            "seed": cfg.seed,
            "inputs_sha256": digests,
            "window": cfg.window.map(|w| json!({"start": w.start, "end": w.end})),
            "utc_offset_hours": cfg.utc_offset_hours,
            "colocation_tol_m": cfg.colocation_tol_m,
        });
        Ok(Self {
            registry,
            tessellation,
            mapping: collapsed.mapping,
            n_input_sites: raw.len(),
            outside_mass,
            outside_samples,
            schemes,
            events,
            provenance,
        })
    }

    pub fn provenance(&self) -> &Value {
        &self.provenance
    }

    pub fn scheme(&self, name: &str) -> Result<&PartitionScheme> {
        self.schemes
            .get(name)
            .ok_or_else(|| validation!("no partition named {name}; pass it with --partition {name}=<path>"))
    }

    pub fn events(&self) -> Result<&EventLog> {
        self.events.as_ref().ok_or_else(|| validation!("this command needs --cdr"))
    }

    pub fn network(&self) -> Result<MobilityNetwork<f64>> {
        Ok(build_mobility_network(self.events()?, &self.registry, DEFAULT_TRANSITION_WINDOW_S))
    }
}

fn merged_pairs(mapping: &BTreeMap<String, String>) -> Vec<[&str; 2]> {
    mapping
        .iter()
        .filter(|(k, v)| k != v)
        .map(|(k, v)| [k.as_str(), v.as_str()])
        .collect()
}

pub fn tessellate(cfg: &RunConfig) -> Result<Vec<Artifact>> {
    let inp = Inputs::load(cfg)?;
    let reg = &inp.registry;
    let mut csv = String::from("antenna_id,lon,lat,population\n");
    for s in reg.sites() {
        csv.push_str(&format!("{},{},{},{}\n", s.id, s.position.lon, s.position.lat, s.population));
    }
    let mut geo = serde_json::to_string(&inp.tessellation.to_geojson(reg)).expect("geojson serializes");
    geo.push('\n');
    let report = json!({
        "provenance": inp.provenance(),
        "n_input_sites": inp.n_input_sites,
        "n_sites": reg.len(),
        "merged": merged_pairs(&inp.mapping),
        "total_population": reg.total_population(),
        "population_outside_bounds": inp.outside_mass,
        "raster_samples_outside_bounds": inp.outside_samples,
        "bounds_area_km2": inp.tessellation.bounds_area_km2(),
    });
    Ok(vec![
        Artifact::new("tessellation.geojson", geo),
        Artifact::new("registry.csv", csv),
        Artifact::json("tessellate.json", &report),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsKind {
    Jumps,
    Gyration,
    Profiles,
    BinnedProfiles,
}

#[derive(Debug, Clone)]
pub struct StatsOptions {
    pub bins_per_decade: usize,
    /// Per-region jump fits under this scheme.
    pub scheme: Option<String>,
    pub attribution: RegionAttribution,
    pub window_min: u32,
    pub step_min: u32,
    pub weekdays_only: bool,
    pub distance_bins: Vec<DistanceBin>,
}

impl Default for StatsOptions {
    fn default() -> Self {
        let p = ProfileConfig::default();
        Self {
            bins_per_decade: 10,
            scheme: None,
            attribution: RegionAttribution::Origin,
            window_min: p.window_min,
            step_min: p.step_min,
            weekdays_only: p.weekdays_only,
            distance_bins: DEFAULT_BINS_KM.to_vec(),
        }
    }
}

fn pdf_csv(pdf: &crate::distributions::PdfEstimate) -> String {
    let mut out = String::from("bin_lo,bin_hi,density,count\n");
    for (k, d) in pdf.densities.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            pdf.bin_edges[k],
            pdf.bin_edges[k + 1],
            d,
            pdf.counts[k]
        ));
    }
    out
}

pub fn stats(cfg: &RunConfig, which: StatsKind, opts: &StatsOptions) -> Result<Vec<Artifact>> {
    cfg.require_cdr()?;
    let inp = Inputs::load(cfg)?;
    let log = inp.events()?;
    let reg = &inp.registry;
    let profile_cfg = ProfileConfig {
        window_min: opts.window_min,
        step_min: opts.step_min,
        weekdays_only: opts.weekdays_only,
        utc_offset_s: (cfg.utc_offset_hours * 3600.0).round() as i64,
        ..ProfileConfig::default()
    };
    match which {
        StatsKind::Jumps => {
            let disp = all_displacements(log, reg);
            let lengths: Vec<f64> = disp.iter().map(|d| d.distance_km).collect();
            let pdf = estimate_pdf(&lengths, opts.bins_per_decade)?;
            let fit = fit_truncated_power_law(&lengths)?;
            let regions = match &opts.scheme {
                Some(name) => Some(to_value(&per_region_fits(
                    &disp,
                    reg,
                    inp.scheme(name)?,
                    opts.attribution,
                    &FitOptions::default(),
                )?)),
                None => None,
            };
            let report = json!({
                "provenance": inp.provenance(),
                "n_displacements": lengths.len(),
                "fit": fit,
                "per_region": regions,
                "scheme": opts.scheme,
                "attribution": opts.attribution,
            });
            Ok(vec![
                Artifact::new("jumps_pdf.csv", pdf_csv(&pdf)),
                Artifact::json("jumps.json", &report),
            ])
        }
        StatsKind::Gyration => {
            let samples = gyration_samples(log, reg);
            let mut csv = String::from("user_id,r_g_km,n_events\n");
            for s in &samples {
                csv.push_str(&format!("{},{},{}\n", s.user_id, s.r_g, s.n_events));
            }
            let values: Vec<f64> = samples.iter().map(|s| s.r_g).collect();
            let pdf = estimate_pdf(&values, opts.bins_per_decade)?;
            let fit = fit_truncated_power_law(&values)?;
            let report = json!({
                "provenance": inp.provenance(),
                "n_users": samples.len(),
                "fit": fit,
            });
            Ok(vec![
                Artifact::new("gyration.csv", csv),
                Artifact::new("gyration_pdf.csv", pdf_csv(&pdf)),
                Artifact::json("gyration.json", &report),
            ])
        }
        StatsKind::Profiles => {
            let p = displacement_probability_profile(log, reg, &profile_cfg)?;
            let d = mean_distance_profile(log, reg, &profile_cfg)?;
            Ok(vec![Artifact::new("profiles.csv", profiles_to_csv(&[p, d]))])
        }
        StatsKind::BinnedProfiles => {
            let ps = distance_binned_profiles(log, reg, &opts.distance_bins, &profile_cfg)?;
            Ok(vec![Artifact::new("binned_profiles.csv", profiles_to_csv(&ps))])
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CommunityOptions {
    /// Louvain restarts; seeds run from `--seed` upward.
    pub restarts: usize,
    /// Detect sub-communities inside each region of this scheme.
    pub within: Option<String>,
    /// Schemes to compare the detected partition against.
    pub compare: Vec<String>,
}

pub fn communities(cfg: &RunConfig, opts: &CommunityOptions) -> Result<Vec<Artifact>> {
    let seed = cfg.require_seed()?;
    cfg.require_cdr()?;
    let inp = Inputs::load(cfg)?;
    let net = inp.network()?;
    let (assignment, sweep, trivial) = match &opts.within {
        Some(name) => {
            let c = constrained_subcommunities(&net, inp.scheme(name)?, seed)?;
            (c.assignment, Vec::new(), c.trivial_regions)
        }
        None => {
            let seeds: Vec<u64> = (0..opts.restarts.max(1) as u64).map(|k| seed.wrapping_add(k)).collect();
            let best = louvain_best_of(&net, &seeds)?;
            let all: Vec<Value> = seeds
                .iter()
                .map(|&s| {
                    let a = crate::network::louvain(&net, s)?;
                    Ok(json!({"seed": s, "modularity": modularity(&net, &a)?, "n_communities": a.n_communities()}))
                })
                .collect::<Result<_>>()?;
            (best.assignment, all, Vec::new())
        }
    };
    let q = modularity(&net, &assignment)?;
    let detected = assignment.to_scheme("detected");
    let mut similarity = BTreeMap::new();
    let mut scheme_modularity = BTreeMap::new();
    for name in &opts.compare {
        let scheme = inp.scheme(name)?;
        similarity.insert(name.clone(), to_value(&similarity_indices_verbose(&detected, scheme)?));
        let asg = CommunityAssignment::from_scheme(&net, scheme)?;
        scheme_modularity.insert(name.clone(), modularity(&net, &asg)?);
    }
    let report = json!({
        "provenance": inp.provenance(),
        "algorithm": LOUVAIN_VERSION,
        "within": opts.within,
        "modularity": q,
        "n_communities": assignment.n_communities(),
        "seed_sweep": sweep,
        "trivial_regions": trivial,
        "similarity": similarity,
        "scheme_modularity": scheme_modularity,
    });
    Ok(vec![
        Artifact::new("communities.csv", assignment.to_csv()),
        Artifact::json("communities.json", &report),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Gravity,
    Radiation,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Gravity => "gravity",
            ModelKind::Radiation => "radiation",
        }
    }
}

/// A scheme to model, with an optional level-1 scheme for intra/inter splits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemeSpec {
    pub scheme: String,
    pub level1: Option<String>,
}

impl SchemeSpec {
    /// Parses `name` or `name:level1`.
    pub fn parse(s: &str) -> Result<Self> {
        let (scheme, level1) = match s.split_once(':') {
            Some((a, b)) => (a, Some(b.to_owned())),
            None => (s, None),
        };
        if scheme.is_empty() || level1.as_deref() == Some("") {
            return Err(validation!("scheme spec {s:?} must be name or name:level1"));
        }
        Ok(Self {
            scheme: scheme.to_owned(),
            level1,
        })
    }
}

struct Modeled {
    observed: FluxMatrix<f64>,
    modeled: FluxMatrix<f64>,
    profiles: Vec<RegionProfile<f64>>,
    params: Option<Value>,
    level1: Option<BTreeMap<String, String>>,
}

fn run_model(inp: &Inputs, net: &MobilityNetwork<f64>, model: ModelKind, spec: &SchemeSpec) -> Result<Modeled> {
    let scheme = inp.scheme(&spec.scheme)?;
    let observed = aggregate_flux(net, scheme)?;
    let profiles = region_profiles(&inp.registry, scheme)?;
    let (modeled, params) = match model {
        ModelKind::Gravity => {
            let fit = gravity_fit(&observed, &profiles)?;
            (gravity_predict(&fit.params, &profiles)?, Some(to_value(&fit)))
        }
        ModelKind::Radiation => (radiation_from_observed(&observed, &profiles)?, None),
    };
    let level1 = match &spec.level1 {
        Some(l1) => Some(level1_of_regions(&inp.registry, scheme, inp.scheme(l1)?)?),
        None => None,
    };
    Ok(Modeled {
        observed,
        modeled,
        profiles,
        params,
        level1,
    })
}

pub fn model(cfg: &RunConfig, model: ModelKind, schemes: &[SchemeSpec], bins_per_decade: usize) -> Result<Vec<Artifact>> {
    if schemes.is_empty() {
        return Err(validation!("model needs at least one --scheme"));
    }
    cfg.require_population()?;
    cfg.require_cdr()?;
    let inp = Inputs::load(cfg)?;
    let net = inp.network()?;
    let mut artifacts = Vec::new();
    let mut mapes = Vec::new();
    for spec in schemes {
        let m = run_model(&inp, &net, model, spec)?;
        let overall = mape(&m.observed, &m.modeled)?;
        let split = match &m.level1 {
            Some(l1) => {
                let (intra, inter) = split_intra_inter(&m.observed, l1)?;
                json!({
                    "level1": spec.level1,
                    "intra": mape_over(&m.observed, &m.modeled, &intra).ok(),
                    "inter": mape_over(&m.observed, &m.modeled, &inter).ok(),
                })
            }
            None => Value::Null,
        };
        let binned = distance_binned_comparison(&m.observed, &m.modeled, &m.profiles, bins_per_decade)?;
        mapes.push((spec.scheme.clone(), overall.mape));
        let report = json!({
            "provenance": inp.provenance(),
            "model": model.as_str(),
            "scheme": spec.scheme,
            "regions": m.observed.regions,
            "fit": m.params,
            "mape": overall,
            "intra_inter": split,
            "distance_binned": binned,
        });
        let stem = format!("{}_{}", model.as_str(), spec.scheme);
        artifacts.push(Artifact::json(format!("model_{stem}.json"), &report));
        artifacts.push(Artifact::new(format!("flux_{stem}.csv"), flux_to_csv(&[&m.observed, &m.modeled])));
    }
    let normalized: BTreeMap<String, f64> = normalized_mapes(&mapes).into_iter().collect();
    let summary = json!({
        "provenance": inp.provenance(),
        "model": model.as_str(),
        "mape": mapes.iter().cloned().collect::<BTreeMap<_, _>>(),
        "normalized_mape": normalized,
    });
    artifacts.push(Artifact::json(format!("model_{}_summary.json", model.as_str()), &summary));
    Ok(artifacts)
}

/// Affinity bias of both models for each `name:level1` scheme.
pub fn affinity(cfg: &RunConfig, schemes: &[SchemeSpec]) -> Result<Vec<Artifact>> {
    if schemes.is_empty() {
        return Err(validation!("affinity needs at least one --scheme name:level1"));
    }
    cfg.require_population()?;
    cfg.require_cdr()?;
    let inp = Inputs::load(cfg)?;
    let net = inp.network()?;
    let mut rows = Vec::new();
    for spec in schemes {
        if spec.level1.is_none() {
            return Err(validation!("affinity scheme {} needs a level-1 scheme (name:level1)", spec.scheme));
        }
        let mut row = json!({"scheme": spec.scheme, "level1": spec.level1});
        for model in [ModelKind::Gravity, ModelKind::Radiation] {
            let m = run_model(&inp, &net, model, spec)?;
            let bias = affinity_bias(&m.observed, &m.modeled, m.level1.as_ref().expect("checked"))?;
            row[model.as_str()] = to_value(&bias);
        }
        rows.push(row);
    }
    let report = json!({
        "provenance": inp.provenance(),
        "schemes": rows,
    });
    Ok(vec![Artifact::json("affinity.json", &report)])
}

#[derive(Debug, Clone)]
pub struct BorderOptions {
    pub scheme: String,
    /// Regions whose borders form the "capital" sample group.
    pub capital_regions: Vec<String>,
    pub sampling: SamplingOptions,
    pub bin_width: f64,
}

pub fn borders(cfg: &RunConfig, opts: &BorderOptions) -> Result<Vec<Artifact>> {
    cfg.require_cdr()?;
    let inp = Inputs::load(cfg)?;
    let net = inp.network()?;
    let scheme = inp.scheme(&opts.scheme)?;
    let field = strength_field(&net, scheme)?;
    let lines = border_polylines(&inp.tessellation, scheme)?;
    let samples = sample_border_strength(&field, &inp.tessellation, &lines, &opts.sampling, &opts.capital_regions)?;
    let hists = border_histogram(&samples, opts.bin_width)?;
    let mut geo = serde_json::to_string(&samples.to_geojson()).expect("geojson serializes");
    geo.push('\n');
    let report = json!({
        "provenance": inp.provenance(),
        "scheme": opts.scheme,
        "capital_regions": opts.capital_regions,
        "n_nodes": field.node_ids.len(),
        "n_undefined": field.n_missing(),
        "findings": field.findings,
        "n_border_polylines": lines.len(),
        "mean_positive": samples.mean_positive,
        "groups": samples.groups,
        "histograms": hists.iter().map(|h| json!({
            "group": h.group,
            "n_out_of_range": h.n_out_of_range,
            "mean_positive": h.mean_positive,
        })).collect::<Vec<_>>(),
    });
    Ok(vec![
        Artifact::new("border_field.csv", field.to_csv()),
        Artifact::new("border_samples.geojson", geo),
        Artifact::new("border_histograms.csv", histograms_to_csv(&hists)),
        Artifact::json("borders.json", &report),
    ])
}

/// Reads a JSON society spec; omitted fields take their defaults.
pub fn load_society_spec(path: &Path) -> Result<SocietySpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

pub fn synth(spec: &SocietySpec) -> Result<Vec<Artifact>> {
    let society = synth::generate(spec)?;
    Ok(society
        .files()
        .iter()
        .map(|(n, c)| Artifact::new(*n, c.clone()))
        .collect())
}
