//! Loading antennas, population, partitions and event streams, and the
//! Voronoi catchment geometry built from them.

pub mod events;
pub mod geometry;
pub mod partition;
pub mod population;
pub mod sites;
pub mod voronoi;

pub use events::{
    events_from_records, load_events, load_events_with, read_cdr, CdrEvent, EventLog,
    EventOptions, StudyWindow, Trajectory, Visit,
};
pub use geometry::{haversine, LonLat, Projection, Xy, EARTH_RADIUS_KM};
pub use partition::{load_partition, PartitionScheme};
pub use population::{
    assign_population, load_population, sidecar_path, PopulationAssignment, PopulationRaster,
    RasterSample, RasterSidecar,
};
pub use sites::{collapse_colocated, load_antennas, AntennaRegistry, AntennaSite, Collapsed};
pub use voronoi::{build_voronoi, SharedEdge, VoronoiTessellation};
