//! Scenario configuration, closed-loop runs, timing benchmark and the
//! property suite behind the `polycbf` command-line tool.

pub mod bench;
pub mod config;
pub mod run;
pub mod trajectory;
pub mod verify;

pub use bench::{run_benchmark, BenchConfig, BenchReport, MethodTiming};
pub use config::{FilterMode, Overrides, ScenarioConfig, ScenarioKind, ShapeSource};
pub use run::{logged_barrier, run_scenario, RunSummary};
pub use trajectory::{Trajectory, TrajectoryStep};
pub use verify::{run_property_suite, PropertyCheck, SuiteCounts, VerifyReport};

/// Half-width of the `|ĥ_a|` band in which gradient norms are tracked.
pub const BOUNDARY_ZONE: f64 = 0.1;
