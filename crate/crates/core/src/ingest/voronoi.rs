//! Planar Voronoi tessellation by half-plane clipping of the bounding region.
//!
//! Each cell starts as the (projected) bounding polygon and is clipped by the
//! perpendicular bisector against every other site, nearest first. Every
//! polygon edge carries the site whose bisector produced it, which yields the
//! neighbour relation and the shared edges without a separate pass.

use std::collections::BTreeSet;

use serde_json::json;

use super::geometry::{area, ccw, contains, LonLat, Projection, Xy};
use super::sites::AntennaRegistry;
use crate::error::{Error, Result};

/// Minimum shared-edge length (km) for two cells to count as neighbours.
const MIN_SHARED_EDGE_KM: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeTag {
    Boundary,
    Site(usize),
}

/// An edge shared by the cells of sites `a < b`, in projected coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SharedEdge {
    pub a: usize,
    pub b: usize,
    pub p: Xy,
    pub q: Xy,
}

#[derive(Debug, Clone)]
pub struct VoronoiTessellation {
    ids: Vec<String>,
    sites: Vec<Xy>,
    cells: Vec<Vec<Xy>>,
    bounds: Vec<Xy>,
    projection: Projection,
    edges: Vec<SharedEdge>,
    neighbors: BTreeSet<(usize, usize)>,
}

impl VoronoiTessellation {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn projection(&self) -> Projection {
        self.projection
    }

    pub fn site_xy(&self, k: usize) -> Xy {
        self.sites[k]
    }

    /// Cell of site `k` in projected kilometres, counter-clockwise.
    pub fn cell_xy(&self, k: usize) -> &[Xy] {
        &self.cells[k]
    }

    /// Cell of site `k` as a lon/lat ring (not repeated at the end).
    pub fn cell_lonlat(&self, k: usize) -> Vec<LonLat> {
        self.cells[k]
            .iter()
            .map(|&p| self.projection.inverse(p))
            .collect()
    }

    pub fn cell_area_km2(&self, k: usize) -> f64 {
        area(&self.cells[k])
    }

    pub fn bounds_xy(&self) -> &[Xy] {
        &self.bounds
    }

    pub fn bounds_area_km2(&self) -> f64 {
        area(&self.bounds)
    }

    /// Index pairs `(a, b)`, `a < b`, whose cells share an edge.
    pub fn neighbor_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.neighbors
    }

    pub fn neighbor_id_pairs(&self) -> BTreeSet<(String, String)> {
        self.neighbors
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (&self.ids[a], &self.ids[b]);
                if x <= y {
                    (x.clone(), y.clone())
                } else {
                    (y.clone(), x.clone())
                }
            })
            .collect()
    }

    pub fn shared_edges(&self) -> &[SharedEdge] {
        &self.edges
    }

    /// Site whose cell contains projected point `p`: the nearest site, lowest
    /// index on ties. `None` outside the bounding region.
    pub fn locate(&self, p: Xy) -> Option<usize> {
        if !contains(&self.bounds, p) {
            return None;
        }
        Some(nearest(&self.sites, p))
    }

    /// GeoJSON FeatureCollection with one Polygon per antenna, carrying
    /// `antenna_id` and the population from `reg`.
    pub fn to_geojson(&self, reg: &AntennaRegistry) -> serde_json::Value {
        let features: Vec<_> = (0..self.len())
            .map(|k| {
                let mut ring: Vec<[f64; 2]> = self
                    .cell_lonlat(k)
                    .iter()
                    .map(|p| [p.lon, p.lat])
                    .collect();
                if let Some(&first) = ring.first() {
                    ring.push(first);
                }
                let population = reg
                    .index_of(&self.ids[k])
                    .map(|i| reg.site(i).population)
                    .unwrap_or(0.0);
                json!({
                    "type": "Feature",
                    "geometry": { "type": "Polygon", "coordinates": [ring] },
                    "properties": { "antenna_id": self.ids[k], "population": population },
                })
            })
            .collect();
        json!({ "type": "FeatureCollection", "features": features })
    }
}

pub(crate) fn nearest(sites: &[Xy], p: Xy) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (k, s) in sites.iter().enumerate() {
        let d = s.dist2(p);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

/// Voronoi diagram of the registry's sites in its equirectangular projection,
/// clipped to the registry's bounding region.
pub fn build_voronoi(reg: &AntennaRegistry) -> Result<VoronoiTessellation> {
    let projection = reg.projection();
    let sites: Vec<Xy> = (0..reg.len()).map(|k| reg.projected(k)).collect();
    let first = sites[0];
    if sites.iter().all(|s| s.dist(first) == 0.0) {
        return Err(Error::Degenerate(
            "all antenna sites are coincident".to_owned(),
        ));
    }
    for i in 0..sites.len() {
        for j in i + 1..sites.len() {
            if sites[i].dist(sites[j]) == 0.0 {
                return Err(Error::Degenerate(format!(
                    "antennas {} and {} share a position; collapse co-located sites first",
                    reg.site(i).id,
                    reg.site(j).id
                )));
            }
        }
    }
    let bounds = ccw(reg.bounds().iter().map(|&p| projection.forward(p)).collect());
    let scale = bounds
        .iter()
        .chain(&sites)
        .map(|p| p.x.abs().max(p.y.abs()))
        .fold(1.0, f64::max);

    let mut cells = Vec::with_capacity(sites.len());
    let mut tagged_cells = Vec::with_capacity(sites.len());
    for (i, &si) in sites.iter().enumerate() {
        let mut order: Vec<usize> = (0..sites.len()).filter(|&j| j != i).collect();
        order.sort_by(|&a, &b| si.dist2(sites[a]).total_cmp(&si.dist2(sites[b])).then(a.cmp(&b)));
        let mut cell: Vec<(Xy, EdgeTag)> = bounds.iter().map(|&p| (p, EdgeTag::Boundary)).collect();
        for j in order {
            let reach = cell.iter().map(|(p, _)| p.dist(si)).fold(0.0, f64::max);
            if si.dist(sites[j]) > 2.0 * reach {
                break;
            }
            cell = clip(&cell, si, sites[j], j, scale);
            if cell.is_empty() {
                break;
            }
        }
        cells.push(cell.iter().map(|(p, _)| *p).collect::<Vec<_>>());
        tagged_cells.push(cell);
    }

    let mut neighbors = BTreeSet::new();
    let mut edges = Vec::new();
    for (i, cell) in tagged_cells.iter().enumerate() {
        let n = cell.len();
        for k in 0..n {
            if let EdgeTag::Site(j) = cell[k].1 {
                let (p, q) = (cell[k].0, cell[(k + 1) % n].0);
                if p.dist(q) <= MIN_SHARED_EDGE_KM {
                    continue;
                }
                let pair = (i.min(j), i.max(j));
                // keep each shared edge once, from the lower-index cell when it
                // has one
                let owner_has_it = i > j
                    && tagged_cells[j].iter().enumerate().any(|(m, (a, t))| {
                        *t == EdgeTag::Site(i)
                            && a.dist(tagged_cells[j][(m + 1) % tagged_cells[j].len()].0)
                                > MIN_SHARED_EDGE_KM
                    });
                neighbors.insert(pair);
                if !owner_has_it {
                    edges.push(SharedEdge {
                        a: pair.0,
                        b: pair.1,
                        p,
                        q,
                    });
                }
            }
        }
    }

    Ok(VoronoiTessellation {
        ids: reg.ids().map(str::to_owned).collect(),
        sites,
        cells,
        bounds,
        projection,
        edges,
        neighbors,
    })
}

/// Keeps the part of `poly` closer to `si` than to `sj`. The new edge along
/// the bisector is tagged with `j`.
fn clip(poly: &[(Xy, EdgeTag)], si: Xy, sj: Xy, j: usize, scale: f64) -> Vec<(Xy, EdgeTag)> {
    let (nx, ny) = (sj.x - si.x, sj.y - si.y);
    let c = (sj.x * sj.x + sj.y * sj.y - si.x * si.x - si.y * si.y) / 2.0;
    let eps = 1e-12 * scale * (nx.abs() + ny.abs());
    let side = |p: Xy| nx * p.x + ny * p.y - c;
    let n = poly.len();
    let mut out: Vec<(Xy, EdgeTag)> = Vec::with_capacity(n + 2);
    for k in 0..n {
        let (p, tag) = poly[k];
        let q = poly[(k + 1) % n].0;
        let (sp, sq) = (side(p), side(q));
        let (p_in, q_in) = (sp <= eps, sq <= eps);
        let crossing = || {
            let t = sp / (sp - sq);
            Xy::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y))
        };
        if p_in {
            out.push((p, tag));
            if !q_in {
                out.push((crossing(), EdgeTag::Site(j)));
            }
        } else if q_in {
            out.push((crossing(), tag));
        }
    }
    dedup_ring(out)
}

fn dedup_ring(ring: Vec<(Xy, EdgeTag)>) -> Vec<(Xy, EdgeTag)> {
    let mut out: Vec<(Xy, EdgeTag)> = Vec::with_capacity(ring.len());
    for v in ring {
        if let Some(last) = out.last_mut() {
            if last.0.dist(v.0) <= 1e-12 {
                // zero-length edge: the later vertex's outgoing edge survives
                *last = v;
                continue;
            }
        }
        out.push(v);
    }
    while out.len() > 1 && out[0].0.dist(out[out.len() - 1].0) <= 1e-12 {
        let last = out.pop().expect("len > 1");
        out[0].0 = last.0;
    }
    if out.len() < 3 {
        return Vec::new();
    }
    out
}
