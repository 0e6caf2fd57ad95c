//! Batch pipeline around the platefuse core: JSONL detection streams in,
//! fused plate readouts out, plus a synthetic scenario generator and an
//! evaluation harness comparing single-frame readout against multi-frame
//! fusion with and without rotation correction.

pub mod config;
pub mod evaluate;
pub mod oracle;
pub mod simulate;
pub mod stream;
pub mod vehicle;

pub use config::Settings;
pub use evaluate::{evaluate, EvalReport, Method, MethodReport};
pub use simulate::{simulate, ConfusionTable, ScenarioConfig, SimulatedPlate};
pub use stream::{read_stream, write_stream, PlateStream, ReadOutcome, StreamError};
pub use vehicle::{match_plate_to_vehicle, VehicleBox};
