//! Diffusion on temporal contact networks whose links carry both a direct
//! (co-present) and an indirect (delayed, decaying) transmission component.
//!
//! A link records a host stay `[t_s, t_l]` and a neighbour stay `[t_s', t_l']`
//! at the same place. Exposure of the neighbour is computed from the particle
//! concentration the host leaves behind, which keeps decaying after the host
//! departs.

pub mod epidemic;
pub mod exposure;
pub mod fitting;
pub mod graphgen;
pub mod ingest;
pub mod linkfile;
pub mod netmetrics;
pub mod network;
pub mod rng;
pub mod vaccinate;

pub use exposure::{DecayConfig, ExposureParams};
pub use network::{Link, LinkKind, Network, NodeId, DAY};
