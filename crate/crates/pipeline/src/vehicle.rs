//! Plate-to-vehicle association.

use platefuse_core::ctm::PlateFrame;
use platefuse_core::geometry::Rect;

/// A detected vehicle box in image coordinates for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleBox {
    pub frame_index: u64,
    pub box_: Rect,
    pub vehicle_id: String,
    pub vehicle_class: String,
}

/// Vehicle owning the plate: its box contains the plate center; nested
/// candidates resolve to the smallest area, then to list order.
pub fn match_plate_to_vehicle<'a>(
    plate_box: &Rect,
    vehicles: &'a [VehicleBox],
) -> Option<&'a VehicleBox> {
    let center = plate_box.center();
    vehicles
        .iter()
        .filter(|v| v.box_.contains(&center))
        .min_by(|a, b| {
            a.box_
                .area()
                .partial_cmp(&b.box_.area())
                .expect("finite areas")
        })
}

/// Vehicle id matched most often across a plate's frames; ties resolve to
/// the earliest matched id.
pub fn dominant_vehicle_id(
    frames: &[PlateFrame],
    vehicles_per_frame: &[Vec<VehicleBox>],
) -> Option<String> {
    let mut counts: Vec<(String, usize)> = Vec::new();
    for (frame, vehicles) in frames.iter().zip(vehicles_per_frame) {
        if let Some(v) = match_plate_to_vehicle(&frame.plate_box, vehicles) {
            match counts.iter_mut().find(|(id, _)| *id == v.vehicle_id) {
                Some((_, n)) => *n += 1,
                None => counts.push((v.vehicle_id.clone(), 1)),
            }
        }
    }
    let mut best: Option<&(String, usize)> = None;
    for entry in &counts {
        if best.is_none_or(|b| entry.1 > b.1) {
            best = Some(entry);
        }
    }
    best.map(|(id, _)| id.clone())
}
