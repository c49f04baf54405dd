//! Exact control refinement for discrete-time linear descriptor systems.
//!
//! A descriptor system `E x(t+1) = A x(t) + B u(t)`, `y = C x` may have a
//! singular `E`, so its successor states are not determined by the current
//! state and input alone. This crate
//!
//! * rewrites such systems into driving-variable form, where a free input `s`
//!   spans the kernel of `[E -B]` ([`dvtransform`]),
//! * checks candidate simulation relations given as graphs `x_a = H x`
//!   ([`relations`]),
//! * checks controller well-posedness and simulates implicit closed loops
//!   ([`simulate`]), and
//! * refines a well-posed controller of a reduced abstract system into one for
//!   the concrete system whose output behaviour is contained in the abstract
//!   closed loop's ([`refinement`]).

pub mod dvtransform;
pub mod error;
pub mod io;
pub mod numkit;
pub mod reference;
pub mod refinement;
pub mod relations;
pub mod simulate;
pub mod systems;

pub use dvtransform::{
    check_dv_consistency, recover_driving_input, to_dv, verify_ds_dv_equivalence,
    DrivingVariableSystem,
};
pub use error::{Error, Result, Stage, WellPosedCondition};
pub use numkit::{Matrix, Tolerance, Vector};
pub use refinement::{
    abstract_s_schedule, closed_loop_reduce, refine_end_to_end, ClosedLoopLinear, RefinedController,
};
pub use relations::{
    check_init_simulated, check_initial_cover, check_simulation, synthesize_interface,
    InterfaceMap, LinearStateMap, SimulationReport,
};
pub use simulate::{
    check_wellposed, compare_outputs, simulate_closed_loop, simulate_refined, step_implicit,
    ComparisonReport, WellPosednessReport,
};
pub use systems::{
    membership_residual, validate, Controller, DescriptorSystem, InitialSet, Trajectory,
    ValidationReport,
};
