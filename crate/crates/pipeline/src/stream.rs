//! Line-delimited JSON detection streams.
//!
//! One frame per line:
//!
//! ```json
//! {"plate_id": "p1", "frame": 0, "plate_box": [x, y, w, h],
//!  "vehicles": [{"id": "v1", "box": [x, y, w, h], "class": "car"}],
//!  "chars": [{"cx": 1.0, "cy": 2.0, "w": 20.0, "h": 30.0, "class": "A", "conf": 0.9}]}
//! ```
//!
//! Coordinates are pixels; `chars` are plate-local raw coordinates. In strict
//! mode the first malformed line aborts with its line number; lenient mode
//! skips bad lines and reports them.

use crate::vehicle::VehicleBox;
use platefuse_core::ctm::{CharDetection, PlateFrame};
use platefuse_core::geometry::{Point2, Rect};
use platefuse_core::layout::Alphabet;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum StreamError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct CharRecord {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub class: String,
    pub conf: f64,
}

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct VehicleRecord {
    pub id: String,
    #[serde(rename = "box")]
    pub box_: [f64; 4],
    pub class: String,
}

/// Wire form of one frame.
#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct FrameRecord {
    pub plate_id: String,
    pub frame: u64,
    pub plate_box: [f64; 4],
    #[serde(default)]
    pub vehicles: Vec<VehicleRecord>,
    pub chars: Vec<CharRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilt_hint: Option<f64>,
}

/// One plate's frames in stream order, with per-frame vehicle detections.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateStream {
    pub plate_id: String,
    pub frames: Vec<PlateFrame>,
    pub vehicles: Vec<Vec<VehicleBox>>,
}

/// A skipped line in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineIssue {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    /// Plates in order of first appearance, frames in stream order.
    pub plates: Vec<PlateStream>,
    /// Lines skipped in lenient mode.
    pub issues: Vec<LineIssue>,
}

fn check_box(b: &[f64; 4], what: &str) -> Result<Rect, String> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(format!("{what} has non-finite values"));
    }
    if b[2] <= 0.0 || b[3] <= 0.0 {
        return Err(format!("{what} has non-positive size {}x{}", b[2], b[3]));
    }
    Ok(Rect::new(b[0], b[1], b[2], b[3]))
}

fn convert_record(
    record: FrameRecord,
    alphabet: &Alphabet,
) -> Result<(PlateFrame, Vec<VehicleBox>), String> {
    let plate_box = check_box(&record.plate_box, "plate_box")?;
    let mut detections = Vec::with_capacity(record.chars.len());
    for c in &record.chars {
        let mut chars = c.class.chars();
        let label = match (chars.next(), chars.next()) {
            (Some(l), None) => l,
            _ => return Err(format!("class {:?} is not a single character", c.class)),
        };
        let class_id = alphabet.class_of(label).map_err(|e| e.to_string())?;
        let det = CharDetection::new(Point2::new(c.cx, c.cy), c.w, c.h, class_id, c.conf)
            .map_err(|e| e.to_string())?;
        detections.push(det);
    }
    let mut vehicles = Vec::with_capacity(record.vehicles.len());
    for v in &record.vehicles {
        let box_ = check_box(&v.box_, "vehicle box")?;
        vehicles.push(VehicleBox {
            frame_index: record.frame,
            box_,
            vehicle_id: v.id.clone(),
            vehicle_class: v.class.clone(),
        });
    }
    Ok((
        PlateFrame {
            plate_id: record.plate_id,
            frame_index: record.frame,
            plate_box,
            tilt_hint: record.tilt_hint,
            detections,
        },
        vehicles,
    ))
}

/// Reads a detection stream, grouping frames per plate and preserving order.
pub fn read_stream(
    reader: impl BufRead,
    alphabet: &Alphabet,
    strict: bool,
) -> Result<ReadOutcome, StreamError> {
    let mut outcome = ReadOutcome::default();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fail = |message: String, outcome: &mut ReadOutcome| -> Result<(), StreamError> {
            if strict {
                Err(StreamError::Line {
                    line: line_no,
                    message,
                })
            } else {
                outcome.issues.push(LineIssue {
                    line: line_no,
                    message,
                });
                Ok(())
            }
        };
        let record: FrameRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                fail(e.to_string(), &mut outcome)?;
                continue;
            }
        };
        let (frame, vehicles) = match convert_record(record, alphabet) {
            Ok(x) => x,
            Err(message) => {
                fail(message, &mut outcome)?;
                continue;
            }
        };
        let slot = *index.entry(frame.plate_id.clone()).or_insert_with(|| {
            outcome.plates.push(PlateStream {
                plate_id: frame.plate_id.clone(),
                frames: Vec::new(),
                vehicles: Vec::new(),
            });
            outcome.plates.len() - 1
        });
        let plate = &mut outcome.plates[slot];
        if let Some(last) = plate.frames.last() {
            if frame.frame_index <= last.frame_index {
                fail(
                    format!(
                        "frame index {} not increasing for plate {:?} (last {})",
                        frame.frame_index, plate.plate_id, last.frame_index
                    ),
                    &mut outcome,
                )?;
                continue;
            }
        }
        plate.frames.push(frame);
        plate.vehicles.push(vehicles);
    }
    Ok(outcome)
}

/// Converts a plate frame back to its wire form.
pub fn frame_to_record(
    frame: &PlateFrame,
    vehicles: &[VehicleBox],
    alphabet: &Alphabet,
) -> FrameRecord {
    FrameRecord {
        plate_id: frame.plate_id.clone(),
        frame: frame.frame_index,
        plate_box: [
            frame.plate_box.x,
            frame.plate_box.y,
            frame.plate_box.w,
            frame.plate_box.h,
        ],
        vehicles: vehicles
            .iter()
            .map(|v| VehicleRecord {
                id: v.vehicle_id.clone(),
                box_: [v.box_.x, v.box_.y, v.box_.w, v.box_.h],
                class: v.vehicle_class.clone(),
            })
            .collect(),
        chars: frame
            .detections
            .iter()
            .map(|d| CharRecord {
                cx: d.center.x,
                cy: d.center.y,
                w: d.width,
                h: d.height,
                class: alphabet
                    .label(d.class_id)
                    .expect("detection classes come from this alphabet")
                    .to_string(),
                conf: d.confidence,
            })
            .collect(),
        tilt_hint: frame.tilt_hint,
    }
}

/// Writes plates back out as one frame per line.
pub fn write_stream(
    writer: &mut impl Write,
    plates: &[PlateStream],
    alphabet: &Alphabet,
) -> Result<(), StreamError> {
    for plate in plates {
        for (frame, vehicles) in plate.frames.iter().zip(&plate.vehicles) {
            let record = frame_to_record(frame, vehicles, alphabet);
            serde_json::to_writer(&mut *writer, &record)
                .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
            writer.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Output readout record, one per plate.
#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct ReadoutRecord {
    pub plate_id: String,
    pub text: String,
    pub vehicle_id: Option<String>,
    pub chars: Vec<ReadoutChar>,
    pub alpha_final_deg: f64,
}

#[derive(Debug, Serialize, Deserialize, Clone, PartialEq)]
pub struct ReadoutChar {
    pub class: String,
    pub score: f64,
    pub cx: f64,
    pub cy: f64,
}
