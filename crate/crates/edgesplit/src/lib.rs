//! Schedule optimization and round-time simulation for parallel split
//! learning on heterogeneous edge fleets.
//!
//! A fleet of edge devices trains a shared model against one server. Each
//! device keeps the first `j` layers locally and offloads the rest; the
//! scheduler picks the cut layer and the bandwidth share per device so that
//! the slowest device's round time — the makespan — is minimized.
//!
//! The crate is organized around that pipeline:
//!
//! * [`profiles`] — model, device, server and network inputs; validation,
//!   file I/O and synthetic fleet generation;
//! * [`cost`] — the analytic round-time model and its compute/traffic
//!   coefficient table;
//! * [`sched`] — the cut rule, the min-max bandwidth allocator, the
//!   alternating solver and a brute-force oracle;
//! * [`sim`] — an event-level round simulator and a strategy comparison
//!   harness (`edgesplit`, `splitfed`, `fedavg`, `adaptive-fl`).
//!
//! ```
//! use edgesplit::profiles::{generate_fleet, SyntheticSpec};
//! use edgesplit::sched::SolveOptions;
//! use edgesplit::sim::{run_experiment, Strategy};
//!
//! let spec = SyntheticSpec::heterogeneous(4, &[1.0, 4.0], 6);
//! let fleet = generate_fleet(&spec, 7).unwrap();
//! let report = run_experiment(&fleet, &Strategy::ALL, 1, &SolveOptions::default()).unwrap();
//! let edgesplit = report.run(Strategy::EdgeSplit).unwrap();
//! assert!(edgesplit.acceleration_vs_fedavg >= 1.0);
//! ```

pub mod cli;
pub mod cost;
pub mod profiles;
pub mod sched;
pub mod sim;

pub use cost::{build_cost_table, round_time, CostTable, RoundBreakdown};
pub use profiles::{generate_fleet, load_fleet, FleetProfile, SyntheticSpec};
pub use sched::{
    best_cuts_given_bandwidth, brute_force_oracle, min_max_bandwidth, solve, solve_bandwidth,
    Schedule, SolveOptions, SolveReport,
};
pub use sim::{resolve_strategy, run_experiment, simulate_round, ComparisonReport, Strategy};

// Every fenced Rust block in the guide compiles and runs under
// `cargo test --doc`, keeping the book in sync with the code.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub struct Introduction;
    #[doc = include_str!("../../../book/src/profiles.md")]
    pub struct Profiles;
    #[doc = include_str!("../../../book/src/cost-model.md")]
    pub struct CostModel;
    #[doc = include_str!("../../../book/src/bandwidth-allocation.md")]
    pub struct BandwidthAllocation;
    #[doc = include_str!("../../../book/src/partitioning.md")]
    pub struct Partitioning;
    #[doc = include_str!("../../../book/src/simulation.md")]
    pub struct Simulation;
    #[doc = include_str!("../../../book/src/cli.md")]
    pub struct CommandLine;
}
