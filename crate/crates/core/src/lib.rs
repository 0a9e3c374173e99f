//! Software model of a pipelined displacement-vector (DV) search for
//! wavelet-domain intra pattern copy (IPC).
//!
//! The crate is organized bottom-up:
//!
//! * [`wavelet`]: reversible color transform and the 5/3 integer DWT that
//!   turns 4-line pixel strips into precinct coefficients.
//! * [`grouping`]: the band-to-group table and the IPC Unit geometry.
//! * [`residual`]: sign-magnitude residuals and the CTRL/FIFO dataflow.
//! * [`pipeline`]: the four-stage DV comparison pipeline (functional and
//!   cycle-stepped).
//! * [`memory`]: precinct-aligned vs group-aligned DRAM layouts, TLB,
//!   command generation and a transfer-cost model.
//! * [`search`]: candidate windows, per-unit search and mode decision.
//! * [`pnm`] and [`testcard`]: image ingestion and synthetic fixtures.

pub mod coeff;
pub mod error;
pub mod grouping;
pub mod memory;
pub mod pipeline;
pub mod pnm;
pub mod residual;
pub mod search;
pub mod testcard;
pub mod wavelet;

pub use coeff::SignMag32;
pub use error::{Error, Result};
pub use grouping::{GroupId, GroupParams, Geometry, UnitDescriptor};
pub use memory::{DramConfig, Layout, TransferStats};
pub use pipeline::{BitCost, DisplacementVector};
pub use search::{Mode, SearchConfig, UnitDecision};
pub use wavelet::{Band, PrecinctCoeffs};
