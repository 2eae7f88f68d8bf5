use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use mobility_core::ingest::{
    assign_population, build_voronoi, collapse_colocated, load_antennas, load_population, StudyWindow,
};
use mobility_core::network::CommunityAssignment;
use mobility_core::pipeline::{self, CommunityOptions, ModelKind, RunConfig, SchemeSpec, StatsKind, StatsOptions};
use mobility_core::synth::{generate, SocietySpec};
use mobility_core::ErrorKind;
use serde_json::Value;

fn society(dir: &Path, spec: SocietySpec) -> RunConfig {
    generate(&spec).unwrap().write_to(dir).unwrap();
    let mut cfg = RunConfig::new(dir.join("antennas.csv"));
    cfg.population = Some(dir.join("population.csv"));
    cfg.cdr = Some(dir.join("cdr.csv"));
    for name in ["tribes", "subcommunities", "grid", "grid_columns"] {
        cfg.partitions.push((name.into(), dir.join(format!("{name}.csv"))));
    }
    cfg
}

fn small() -> SocietySpec {
    SocietySpec {
        n_users: 400,
        days: 7,
        ..SocietySpec::default()
    }
}

fn artifact<'a>(arts: &'a [pipeline::Artifact], name: &str) -> &'a str {
    &arts.iter().find(|a| a.name == name).unwrap_or_else(|| panic!("no {name}")).contents
}

#[test]
fn tessellation_equals_direct_library_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = society(dir.path(), SocietySpec { n_colocated_groups: 5, ..small() });
    let arts = pipeline::tessellate(&cfg).unwrap();

    let raw = load_antennas(dir.path().join("antennas.csv")).unwrap();
    let reg = collapse_colocated(&raw, 1.0).unwrap().registry;
    let tess = build_voronoi(&reg).unwrap();
    let raster = load_population(dir.path().join("population.csv")).unwrap();
    let reg = assign_population(&reg, &tess, &raster).unwrap().registry;
    let mut direct = serde_json::to_string(&tess.to_geojson(&reg)).unwrap();
    direct.push('\n');
    assert_eq!(artifact(&arts, "tessellation.geojson"), direct);

    let report: Value = serde_json::from_str(artifact(&arts, "tessellate.json")).unwrap();
    assert_eq!(report["n_sites"], reg.len());
    assert!(reg.len() < raw.len());
    assert_eq!(report["provenance"]["inputs_sha256"].as_object().unwrap().len(), 8);
}

#[test]
fn every_command_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = society(dir.path(), small());
    cfg.seed = Some(3);
    let schemes = [SchemeSpec::parse("subcommunities:tribes").unwrap()];
    let runs = || {
        let mut all = pipeline::tessellate(&cfg).unwrap();
        all.extend(pipeline::stats(&cfg, StatsKind::Jumps, &StatsOptions::default()).unwrap());
        all.extend(pipeline::stats(&cfg, StatsKind::BinnedProfiles, &StatsOptions::default()).unwrap());
        let opts = CommunityOptions { restarts: 3, within: None, compare: vec!["tribes".into()] };
        all.extend(pipeline::communities(&cfg, &opts).unwrap());
        all.extend(pipeline::model(&cfg, ModelKind::Radiation, &schemes, 5).unwrap());
        all.extend(pipeline::affinity(&cfg, &schemes).unwrap());
        all
    };
    assert_eq!(runs(), runs());
}

#[test]
fn constrained_communities_nest_in_level1_regions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = society(dir.path(), small());
    cfg.seed = Some(1);
    let opts = CommunityOptions { restarts: 1, within: Some("tribes".into()), compare: vec!["subcommunities".into()] };
    let arts = pipeline::communities(&cfg, &opts).unwrap();
    let tribes: BTreeMap<String, String> = csv_pairs(&std::fs::read_to_string(dir.path().join("tribes.csv")).unwrap());
    let detected = csv_pairs(artifact(&arts, "communities.csv"));
    let mut tribe_of: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (id, c) in &detected {
        tribe_of.entry(c).or_default().insert(&tribes[id]);
    }
    assert!(tribe_of.values().all(|t| t.len() == 1));
    let report: Value = serde_json::from_str(artifact(&arts, "communities.json")).unwrap();
    assert!(report["modularity"].as_f64().unwrap() > 0.3);
}

#[test]
fn unconstrained_communities_respect_planted_level1_regions() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = society(dir.path(), SocietySpec { n_users: 2000, days: 14, ..SocietySpec::default() });
    cfg.seed = Some(1);
    let opts = CommunityOptions { restarts: 5, within: None, compare: vec!["tribes".into()] };
    let arts = pipeline::communities(&cfg, &opts).unwrap();
    let tribes = csv_pairs(&std::fs::read_to_string(dir.path().join("tribes.csv")).unwrap());
    let detected = csv_pairs(artifact(&arts, "communities.csv"));
    // share of antennas whose community's majority tribe is their own
    let mut counts: BTreeMap<&str, BTreeMap<&str, usize>> = BTreeMap::new();
    for (id, c) in &detected {
        *counts.entry(c).or_default().entry(&tribes[id]).or_default() += 1;
    }
    let pure: usize = counts.values().map(|m| m.values().max().unwrap()).sum();
    let purity = pure as f64 / detected.len() as f64;
    assert!(purity >= 0.9, "purity {purity}");
}

#[test]
fn comparing_a_scheme_with_itself_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = society(dir.path(), small());
    cfg.seed = Some(4);
    let opts = CommunityOptions { restarts: 2, within: None, compare: vec![] };
    let first = pipeline::communities(&cfg, &opts).unwrap();
    let detected = artifact(&first, "communities.csv").replace("community_label", "region_label");
    let path = dir.path().join("detected.csv");
    std::fs::write(&path, detected).unwrap();
    cfg.partitions.push(("detected".into(), path));
    let opts = CommunityOptions { compare: vec!["detected".into()], ..opts };
    let arts = pipeline::communities(&cfg, &opts).unwrap();
    let report: Value = serde_json::from_str(artifact(&arts, "communities.json")).unwrap();
    let sim = report["similarity"]["detected"].as_object().unwrap();
    for key in ["rand", "adjusted_rand", "jaccard", "fowlkes_mallows", "wallace", "hubert", "meila_heckerman", "larsen"] {
        assert_eq!(sim[key].as_f64(), Some(1.0), "{key}");
    }
}

#[test]
fn input_problems_map_to_error_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = society(dir.path(), small());

    let mut missing = cfg.clone();
    missing.cdr = Some(dir.path().join("nope.csv"));
    assert_eq!(pipeline::tessellate(&missing).unwrap_err().kind(), ErrorKind::Validation);

    let opts = CommunityOptions { restarts: 1, within: None, compare: vec![] };
    assert_eq!(pipeline::communities(&cfg, &opts).unwrap_err().kind(), ErrorKind::Validation);

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "antenna_id,lon,lat\nA1,-5.0,not-a-number\n").unwrap();
    let parse = RunConfig::new(&bad);
    assert_eq!(pipeline::tessellate(&parse).unwrap_err().kind(), ErrorKind::Parse);

    let no_pop = RunConfig { population: None, ..cfg.clone() };
    let schemes = [SchemeSpec::parse("grid").unwrap()];
    assert_eq!(pipeline::model(&no_pop, ModelKind::Gravity, &schemes, 5).unwrap_err().kind(), ErrorKind::Validation);

    assert!(SchemeSpec::parse("a:").is_err());
    assert_eq!(SchemeSpec::parse("a:b").unwrap().level1.as_deref(), Some("b"));
}

#[test]
fn study_window_restricts_events() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = society(dir.path(), small());
    let start = SocietySpec::default().start_timestamp;
    cfg.window = Some(StudyWindow::new(start, start + 2 * 86_400).unwrap());
    let full = mobility_core::pipeline::Inputs::load(&RunConfig { window: None, ..cfg.clone() }).unwrap();
    let part = mobility_core::pipeline::Inputs::load(&cfg).unwrap();
    let (full, part) = (full.events.unwrap(), part.events.unwrap());
    assert!(part.n_events < full.n_events);
    assert_eq!(part.n_events + part.dropped_outside_window, full.n_events);
}

#[test]
fn assignment_round_trips_through_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = society(dir.path(), small());
    let inp = mobility_core::pipeline::Inputs::load(&cfg).unwrap();
    let net = inp.network().unwrap();
    let tribes = inp.scheme("tribes").unwrap();
    let asg = CommunityAssignment::from_scheme(&net, tribes).unwrap();
    assert_eq!(asg.n_communities(), tribes.labels().len());
}

fn csv_pairs(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.to_owned(), b.to_owned())
        })
        .collect()
}
