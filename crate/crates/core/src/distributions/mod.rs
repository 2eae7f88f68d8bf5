//! Jump-size and gyration densities and the truncated power-law fit.

mod pdf;
mod powerlaw;
mod quadrature;
mod regions;

pub use pdf::{estimate_pdf, PdfEstimate};
pub use powerlaw::{
    fit_truncated_power_law, fit_truncated_power_law_with, FitOptions, PowerLawFit,
    TruncatedPowerLaw,
};
pub use quadrature::integrate;
pub use regions::{per_region_fits, FitRecord, RegionAttribution, RegionFits, SkippedRegion};
