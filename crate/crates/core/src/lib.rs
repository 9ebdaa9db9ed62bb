//! Distributed bandwidth allocation among NB-IoT edge devices.
//!
//! Devices share a total bandwidth `B` and each derives net utility
//! `ω·ln(c·x + 1) − p·x²` from its share `x`. The edge server admits the
//! requested demands once (scaling them down when they exceed `B`); the
//! devices then reach the utility-maximizing split on their own by
//! exchanging marginal utilities with graph neighbours. A centralized
//! bisection solver provides the reference optimum.
//!
//! Numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below name the double-precision instantiations used by the CLI.

pub mod admission;
pub mod cli;
pub mod engine;
pub mod error;
pub mod oracle;
pub mod scalar;
pub mod scenario;
pub mod topology;
pub mod trace;
pub mod utility;

pub use admission::{admit, ConfirmedDemands};
pub use engine::{consensus_residual, run, DeviceState, Engine, EngineState, RunResult, TraceRow};
pub use error::{Error, Result};
pub use oracle::{objective, solve, OracleSolution};
pub use scalar::Real;
pub use scenario::{
    generate_random_scenario, load_scenario, parse_scenario, DeviceParams, Globals, InitMode,
    Scenario, SolverOptions,
};
pub use topology::Topology;
pub use utility::{
    capacity_coefficient, derivative, evaluate, invert_derivative, CapacityCoefficient, NetUtility,
};

pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
pub type ConfirmedDemands64 = ConfirmedDemands<f64>;
pub type EngineState64 = EngineState<f64>;
pub type RunResult64 = RunResult<f64>;
pub type RunResult32 = RunResult<f32>;
pub type OracleSolution64 = OracleSolution<f64>;
pub type Engine64 = Engine<f64>;
