pub mod borders;
pub mod distributions;
pub mod error;
pub mod flux_models;
pub mod ingest;
pub mod matrix;
pub mod network;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod trajectories;

pub use error::{Error, ErrorKind, Result};
pub use matrix::SquareMatrix;
pub use scalar::Scalar;

pub type MobilityNetworkF64 = network::MobilityNetwork<f64>;
pub type SeedSweepF64 = network::SeedSweep<f64>;
pub type FluxMatrixF64 = flux_models::FluxMatrix<f64>;
pub type RegionProfileF64 = flux_models::RegionProfile<f64>;
pub type GravityParamsF64 = flux_models::GravityParams<f64>;
pub type GravityFitF64 = flux_models::GravityFit<f64>;
pub type MapeReportF64 = flux_models::MapeReport<f64>;
pub type BorderStrengthFieldF64 = borders::BorderStrengthField<f64>;
pub type SquareMatrixF64 = SquareMatrix<f64>;
