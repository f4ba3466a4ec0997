//! Facility location under client arrivals and departures with bounded
//! recourse: deterministic local search for the online setting, a
//! heap-backed randomized search for the incremental setting, and a fully
//! dynamic algorithm on hierarchically well-separated trees.

pub mod error;
pub mod frt;
pub mod heaps;
pub mod hst;
pub mod hst_dynamic;
pub mod incremental;
pub mod io;
pub mod local_search;
pub mod model;
pub mod online;
pub mod oracle;
pub mod randomized;

pub use error::{ModelError, SearchError, TreeError};
pub use model::{cost, nearest_facility, scaled_cost, ClientId, CostReport, FacilityId, Instance, Solution};
