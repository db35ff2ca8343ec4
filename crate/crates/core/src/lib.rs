//! Simultaneous sensor localization and target tracking (SLAT) on a discrete
//! cell map via real-time belief propagation, with a Monte-Carlo scenario
//! simulator.

pub mod cli;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod noise;
pub mod sim;

pub use engine::{BeliefSnapshot, Mode, Models, Pmf, Range, SlatEngine, SlotInput, StepReport};
pub use error::{Error, Result, Variable};
pub use geometry::{CellId, CellMap, Position3};
pub use noise::{GmComponent, ImuModel, RangingNoiseModel};
