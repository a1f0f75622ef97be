//! Independent ground truth: exact path simulation, uniformization, time-domain quadrature
//! and rejection-sampling E-steps, and synthetic data generation.

pub mod protocol;
pub mod quadrature;
pub mod rejection;
pub mod sim;
pub mod uniformization;

pub use protocol::{
    generate_microsat_dataset, generate_protocol_dataset, CovariateScheme, ProtocolConfig,
};
pub use quadrature::{integrate_vector, timedomain_estep};
pub use rejection::{rejection_estep, RejectionEstimate};
pub use sim::{simulate_path, substream, Path, PathStatistics};
pub use uniformization::{auto_truncation, default_cap, uniformization_tp, Uniformized};
