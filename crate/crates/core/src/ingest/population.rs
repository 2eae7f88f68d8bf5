use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{LonLat, EARTH_RADIUS_KM};
use super::sites::{csv_error, AntennaRegistry};
use super::voronoi::VoronoiTessellation;
use crate::error::{validation, Error, Result};

/// One point sample of a population-density grid (persons per km²).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSample {
    pub lon: f64,
    pub lat: f64,
    pub density: f64,
}

/// Point-sampled population grid with uniform spacing in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRaster {
    pub spacing_deg: f64,
    pub samples: Vec<RasterSample>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RasterSidecar {
    pub spacing_deg: f64,
}

impl PopulationRaster {
    /// Area represented by a sample at latitude `lat`.
    pub fn sample_area_km2(&self, lat: f64) -> f64 {
        let side = self.spacing_deg.to_radians() * EARTH_RADIUS_KM;
        side * side * lat.to_radians().cos()
    }

    pub fn sample_mass(&self, s: &RasterSample) -> f64 {
        s.density * self.sample_area_km2(s.lat)
    }

    pub fn total_mass(&self) -> f64 {
        self.samples.iter().map(|s| self.sample_mass(s)).sum()
    }
}

/// Path of the JSON sidecar declaring the grid spacing of `csv_path`.
pub fn sidecar_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("json")
}

/// Reads `lon,lat,density` rows plus the `{"spacing_deg": ..}` sidecar that
/// sits next to the CSV with a `.json` extension.
pub fn load_population(path: impl AsRef<Path>) -> Result<PopulationRaster> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let sidecar: RasterSidecar =
        serde_json::from_str(&text).map_err(|e| Error::parse(&side, e.line() as u64, e.to_string()))?;
    if !(sidecar.spacing_deg > 0.0) {
        return Err(validation!("{}: spacing_deg must be positive", side.display()));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut samples = Vec::new();
    for rec in reader.deserialize::<RasterSample>() {
        let s = rec.map_err(|e| csv_error(path, e))?;
        if !(s.density >= 0.0 && s.density.is_finite()) || !LonLat::new(s.lon, s.lat).is_valid() {
            return Err(validation!(
                "{}:{}: invalid raster sample",
                path.display(),
                samples.len() + 2
            ));
        }
        samples.push(s);
    }
    Ok(PopulationRaster {
        spacing_deg: sidecar.spacing_deg,
        samples,
    })
}

/// Outcome of [`assign_population`].
#[derive(Debug, Clone)]
pub struct PopulationAssignment {
    pub registry: AntennaRegistry,
    /// Raster mass that fell outside the bounding region.
    pub outside_mass: f64,
    pub outside_samples: usize,
}

/// Sums raster mass (density × sample area) into the Voronoi cell containing
/// each sample.
pub fn assign_population(
    reg: &AntennaRegistry,
    tess: &VoronoiTessellation,
    raster: &PopulationRaster,
) -> Result<PopulationAssignment> {
    if raster.samples.is_empty() {
        return Err(validation!("population raster is empty"));
    }
    if tess.ids().len() != reg.len() || tess.ids().iter().zip(reg.ids()).any(|(a, b)| a != b) {
        return Err(validation!("tessellation was not built from this registry"));
    }
    let proj = tess.projection();
    let mut pops = vec![0.0; reg.len()];
    let (mut outside_mass, mut outside_samples) = (0.0, 0);
    for s in &raster.samples {
        let mass = raster.sample_mass(s);
        match tess.locate(proj.forward(LonLat::new(s.lon, s.lat))) {
            Some(k) => pops[k] += mass,
            None => {
                outside_mass += mass;
                outside_samples += 1;
            }
        }
    }
    Ok(PopulationAssignment {
        registry: reg.with_populations(&pops)?,
        outside_mass,
        outside_samples,
    })
}
