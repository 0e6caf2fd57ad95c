//! Detector-agnostic fusion of per-frame character detections into a single
//! robust license plate readout.
//!
//! The crate is organized around four stages:
//!
//! - [`geometry`]: least-squares slope estimation over character centers and
//!   cumulative plate rotation correction, applied as coordinate rectification.
//! - [`assignment`]: exact rectangular minimum-cost assignment with an
//!   infeasibility gate, used to associate detections with character tracks.
//! - [`ctm`]: the character time-series tracker — per-frame track updates,
//!   confidence-weighted class voting, and readout finalization.
//! - [`layout`]: merged-class alphabets (O/0, I/1) and plate-format based
//!   disambiguation against a positional pattern such as `AAANNNN`.
//!
//! All operations are deterministic: identical inputs produce byte-identical
//! readouts. State is per-plate; distinct plates can be processed in parallel
//! as long as a single plate's frames are applied in order.

pub mod assignment;
pub mod ctm;
pub mod geometry;
pub mod layout;

pub use ctm::{
    run_plate, CharDetection, CtmConfig, EpsilonPolicy, PlateFrame, PlateProcessor, PlateReadout,
    Track, TrackSet,
};
pub use geometry::{Point2, Rect, RotationState};
pub use layout::{Alphabet, LayoutSpec};
