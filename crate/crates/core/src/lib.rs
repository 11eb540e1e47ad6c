//! Discrete-event simulator for dynamic first-fit packing of size-1 and
//! size-2 items on the half-axis, with instrumented steady-state window
//! statistics.
//!
//! Module map:
//!
//! - [`model`]: lattice occupancy, first-fit placement, holes, `F_i(x)`.
//! - [`gap_index`]: segment tree for leftmost-fit queries, plus a scan oracle.
//! - [`sim`]: competing-exponentials event loop, initial states, observers.
//! - [`observables`]: window statistics (`Y, Z, X, D, G, G1, G^delta, U`, wasted space).
//! - [`estimate`]: time-weighted averages with batch-means confidence intervals.
//! - [`experiments`]: sweeps, traces and their file formats.

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod gap_index;
pub mod model;
pub mod observables;
pub mod sim;
pub mod snapshot;

pub use error::{ConfigError, ModelError, OutputError};
pub use estimate::{Estimate, Inconclusive, TimeAverageEstimator};
pub use gap_index::{naive_leftmost_fit, FitIndex};
pub use model::{Configuration, Hole, Item, ItemId, ItemKind, ModelParams};
pub use observables::{snapshot_observables, ObservableSnapshot, PairCap, WindowSpec};
pub use sim::{make_initial, simulate, InitialState, Observer, SimState, StreamSeed};
