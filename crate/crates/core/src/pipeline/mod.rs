//! Worker and master state machines and the training loop that drives them.

pub mod config;
pub mod master;
pub mod master_momentum;
pub mod run;
pub mod virtual_iterates;
pub mod worker;

pub use config::{BlockLayout, RunConfig, StepSchedule};
pub use master::{Chain, MasterState};
pub use master_momentum::{closed_loop_gap, master_momentum_sim, open_loop_gap, MomentumRow};
pub use run::{run_training, run_training_with, RunOutput, Simulation, StepReport};
pub use virtual_iterates::{record_history, virtual_iterates, History, VirtualIterates};
pub use worker::{StepRecord, WorkerState};
