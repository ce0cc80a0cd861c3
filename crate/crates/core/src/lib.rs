//! Simulator for multiple-time quantum states.
//!
//! States live on alternating bra/ket time boundaries ([`state`]); Kraus
//! operators are inserted into their measurement periods ([`kraus`]) and the
//! outcome distribution follows from squared norms of the contraction. Every
//! prediction can be cross-checked against a forward-in-time branch
//! enumeration ([`oracle`]) of an [`script::ExperimentScript`], and
//! [`preparation`] turns abstract states into such scripts.

pub mod corpus;
pub mod dsl;
pub mod error;
pub mod kraus;
pub mod linalg;
pub mod oracle;
pub mod preparation;
pub mod random;
pub mod report;
pub mod script;
pub mod state;
pub mod tensor;

pub use error::{Error, Result};
pub use kraus::{KrausOperator, KrausSet, MultiTimeObservable, PeriodBinding};
pub use state::{BoundarySpec, Direction, MeasurementPeriod, MultiTimeState, TimeLabel};
pub use tensor::{c64, DenseTensor, Tolerance, C64};
