//! Statevector engine for Berry phases of the dimerized Hubbard chain via adaptive
//! variational real- and imaginary-time evolution, with an exact-diagonalization oracle.

pub mod ansatz;
pub mod avqds;
pub mod avqite;
pub mod berry;
pub mod ed;
pub mod error;
pub mod io;
pub mod model;
pub mod pauli;
pub mod resources;

pub use ansatz::{Ansatz, EomSystem, Unit, UnitOrigin};
pub use avqds::{DynConfig, Evolution, StepRecord, TrajectoryRecord};
pub use avqite::{ItConfig, ItReport};
pub use berry::{principal_value, run_berry, BerryResult, LoopSchedule, Warning};
pub use ed::{DenseFamily, LoopInfidelity};
pub use error::{Error, Result};
pub use io::{RunConfig, RunOutput, SweepAxis, SweepSpec};
pub use model::{ModelParams, OperatorPool, PoolKind, TwistFamily};
pub use pauli::{PauliString, PauliSum, StateVector, C64};
pub use resources::{ResourceTrace, SweepSummary};
