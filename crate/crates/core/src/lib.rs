//! Delivery-phase optimization for cache-aided fog radio access networks.
//!
//! Given eRRH caches, a channel realization and the files requested by the
//! UEs, the optimizer maximizes the minimum per-file delivery rate over
//! transmit covariances and fronthaul quantization noise, for hard-, soft- and
//! hybrid-transfer fronthauling. All rates and capacities are in bits per
//! symbol.

pub mod cccp;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod prefetch;
pub mod rates;
pub mod scenario;
pub mod solver;
pub mod validation;

pub use cccp::{assign_fronthaul_nf, extract_precoders, init_feasible, run_cccp, run_cccp_from, run_hybrid, CccpSettings};
pub use error::{Error, Result};
pub use model::{
    build_selector, CacheState, ChannelRealization, DeliverySolution, FronthaulAssignment, Instance,
    Mode, RequestProfile, SplitScheme, SystemConfig,
};
pub use validation::{validate_solution, ValidationReport};
