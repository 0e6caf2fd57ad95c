//! Character time-series matching.
//!
//! Each plate keeps a set of character tracks. Every frame, detections are
//! associated to tracks by gated minimum-cost assignment on center distance,
//! and one of three things happens to each participant:
//!
//! - a matched track takes the detection's position and appends its class
//!   and confidence to the track history;
//! - an unmatched detection seeds a new track;
//! - an unmatched track is shifted by the mean displacement of this frame's
//!   matched pairs, so stale tracks ride along with plate motion and
//!   re-match when their character reappears.
//!
//! After the last frame, each surviving track votes: per class, the sum of
//! its observation confidences; the class with the largest weighted sum wins.
//! Tracks are ordered into reading order and the layout resolves merged
//! classes into the final string.

use crate::assignment::{build_cost_matrix, solve};
use crate::geometry::{
    estimate_slope, rectify_points, slope_to_angle, update_rotation, GeometryError, Point2, Rect,
    RotationState,
};
use crate::layout::{disambiguate, Alphabet, LayoutSpec};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CtmError {
    #[error("invalid detection: {0}")]
    InvalidDetection(String),
    #[error("track has no observations")]
    EmptyTrack,
    #[error("class id {class_id} outside alphabet of {alphabet_size} classes")]
    ClassOutOfRange {
        class_id: usize,
        alphabet_size: usize,
    },
    #[error("no frames for plate")]
    EmptyFrameList,
    #[error("invalid plate box: w={w}, h={h}")]
    InvalidPlateBox { w: f64, h: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Assignment(#[from] crate::assignment::AssignmentError),
}

/// One detected character box in a single frame, in plate-local pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharDetection {
    pub center: Point2,
    pub width: f64,
    pub height: f64,
    pub class_id: usize,
    pub confidence: f64,
}

impl CharDetection {
    pub fn new(
        center: Point2,
        width: f64,
        height: f64,
        class_id: usize,
        confidence: f64,
    ) -> Result<Self, CtmError> {
        if !center.is_finite() {
            return Err(CtmError::InvalidDetection(format!(
                "non-finite center ({}, {})",
                center.x, center.y
            )));
        }
        if width <= 0.0 || height <= 0.0 || !width.is_finite() || !height.is_finite() {
            return Err(CtmError::InvalidDetection(format!(
                "box size must be positive, got {width}x{height}"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CtmError::InvalidDetection(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        Ok(Self {
            center,
            width,
            height,
            class_id,
            confidence,
        })
    }
}

/// A persistent hypothesis for one physical character on the plate.
#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub position: Point2,
    pub cls: Vec<usize>,
    pub conf: Vec<f64>,
    pub created_frame: u64,
    pub last_matched_frame: u64,
    position_sum: Point2,
}

impl Track {
    fn from_detection(id: u64, det: &CharDetection, frame: u64) -> Self {
        Self {
            id,
            position: det.center,
            cls: vec![det.class_id],
            conf: vec![det.confidence],
            created_frame: frame,
            last_matched_frame: frame,
            position_sum: det.center,
        }
    }

    fn absorb(&mut self, det: &CharDetection, frame: u64) {
        self.position = det.center;
        self.cls.push(det.class_id);
        self.conf.push(det.confidence);
        self.last_matched_frame = frame;
        self.position_sum.x += det.center.x;
        self.position_sum.y += det.center.y;
    }

    /// Number of detections absorbed by this track.
    pub fn matched_count(&self) -> usize {
        self.cls.len()
    }

    /// Mean center of all absorbed detections.
    pub fn mean_position(&self) -> Point2 {
        let n = self.matched_count() as f64;
        Point2::new(self.position_sum.x / n, self.position_sum.y / n)
    }
}

/// Per-plate track set. Frames must be applied in order by a single owner;
/// distinct plates are independent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    tracks: Vec<Track>,
    next_id: u64,
    frame_index: u64,
}

impl TrackSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn frame_index(&self) -> u64 {
        self.frame_index
    }

    /// Total observations across all tracks. Grows by exactly the number of
    /// detections on every update.
    pub fn observation_count(&self) -> usize {
        self.tracks.iter().map(|t| t.matched_count()).sum()
    }
}

/// Applies one frame of detections to the track set.
///
/// Detections must already be rectified. Matching is gated: a pair is only
/// considered when the center distance is strictly below `epsilon`.
pub fn ctm_update(
    set: &mut TrackSet,
    detections: &[CharDetection],
    epsilon: f64,
) -> Result<(), CtmError> {
    for det in detections {
        // Re-validate: detections may have been rectified since construction.
        CharDetection::new(
            det.center,
            det.width,
            det.height,
            det.class_id,
            det.confidence,
        )?;
    }
    let track_positions: Vec<Point2> = set.tracks.iter().map(|t| t.position).collect();
    let det_centers: Vec<Point2> = detections.iter().map(|d| d.center).collect();
    let matrix = build_cost_matrix(&track_positions, &det_centers, epsilon)?;
    let assignment = solve(&matrix);

    let frame = set.frame_index;

    // Mean displacement of matched pairs, using pre-update track positions.
    let mut shift = Point2::new(0.0, 0.0);
    for &(track_idx, det_idx) in &assignment.pairs {
        shift.x += detections[det_idx].center.x - track_positions[track_idx].x;
        shift.y += detections[det_idx].center.y - track_positions[track_idx].y;
    }
    if !assignment.pairs.is_empty() {
        let n = assignment.pairs.len() as f64;
        shift.x /= n;
        shift.y /= n;
    }

    for &(track_idx, det_idx) in &assignment.pairs {
        set.tracks[track_idx].absorb(&detections[det_idx], frame);
    }
    for &track_idx in &assignment.unmatched_rows {
        let t = &mut set.tracks[track_idx];
        t.position.x += shift.x;
        t.position.y += shift.y;
    }
    for &det_idx in &assignment.unmatched_cols {
        let id = set.next_id;
        set.next_id += 1;
        set.tracks
            .push(Track::from_detection(id, &detections[det_idx], frame));
    }
    set.frame_index += 1;
    Ok(())
}

/// Winning class of a track's weighted-sum confidence vote.
#[derive(Debug, Clone, PartialEq)]
pub struct VoteResult {
    pub class_id: usize,
    pub score: f64,
    pub runner_up: Option<(usize, f64)>,
}

/// Sums observation confidences per class and picks the argmax.
/// Ties break toward the lower class id.
pub fn vote(track: &Track, alphabet_size: usize) -> Result<VoteResult, CtmError> {
    if track.cls.is_empty() {
        return Err(CtmError::EmptyTrack);
    }
    let mut weight = vec![0.0f64; alphabet_size];
    let mut seen = vec![false; alphabet_size];
    for (&class_id, &confidence) in track.cls.iter().zip(&track.conf) {
        if class_id >= alphabet_size {
            return Err(CtmError::ClassOutOfRange {
                class_id,
                alphabet_size,
            });
        }
        weight[class_id] += confidence;
        seen[class_id] = true;
    }
    let mut winner: Option<usize> = None;
    for c in 0..alphabet_size {
        if seen[c] && winner.is_none_or(|w| weight[c] > weight[w]) {
            winner = Some(c);
        }
    }
    let winner = winner.expect("at least one observed class");
    let mut runner_up: Option<usize> = None;
    for c in 0..alphabet_size {
        if c != winner && seen[c] && runner_up.is_none_or(|r| weight[c] > weight[r]) {
            runner_up = Some(c);
        }
    }
    Ok(VoteResult {
        class_id: winner,
        score: weight[winner],
        runner_up: runner_up.map(|c| (c, weight[c])),
    })
}

/// How the matching gate is chosen per frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonPolicy {
    /// Fixed gate in pixels.
    Absolute(f64),
    /// Gate = factor × median detected character width in the frame.
    RelativeToWidth(f64),
}

impl EpsilonPolicy {
    pub fn effective(&self, detections: &[CharDetection]) -> f64 {
        match *self {
            EpsilonPolicy::Absolute(px) => px,
            EpsilonPolicy::RelativeToWidth(factor) => {
                if detections.is_empty() {
                    // Nothing to match; any positive gate is equivalent.
                    return 1.0;
                }
                let mut widths: Vec<f64> = detections.iter().map(|d| d.width).collect();
                widths.sort_by(|a, b| a.partial_cmp(b).expect("validated widths"));
                let mid = widths.len() / 2;
                let median = if widths.len().is_multiple_of(2) {
                    (widths[mid - 1] + widths[mid]) / 2.0
                } else {
                    widths[mid]
                };
                factor * median
            }
        }
    }
}

impl Default for EpsilonPolicy {
    fn default() -> Self {
        EpsilonPolicy::RelativeToWidth(0.5)
    }
}

/// Configuration for one plate run.
#[derive(Debug, Clone, PartialEq)]
pub struct CtmConfig {
    pub epsilon: EpsilonPolicy,
    /// Tracks with fewer matched detections are dropped at finalize.
    pub min_hits: usize,
    pub layout: LayoutSpec,
    pub alphabet: Alphabet,
    /// When false, frames are consumed in raw coordinates and the rotation
    /// state stays at zero.
    pub enable_rotation: bool,
}

impl Default for CtmConfig {
    fn default() -> Self {
        Self {
            epsilon: EpsilonPolicy::default(),
            min_hits: 2,
            layout: LayoutSpec::default(),
            alphabet: Alphabet::default(),
            enable_rotation: true,
        }
    }
}

/// All character detections of one plate at one timestamp.
///
/// Detections are plate-local and unrectified; `tilt_hint` carries the
/// simulator's ground-truth tilt and is never read by the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateFrame {
    pub plate_id: String,
    pub frame_index: u64,
    pub plate_box: Rect,
    pub tilt_hint: Option<f64>,
    pub detections: Vec<CharDetection>,
}

/// One finalized character in reading order.
#[derive(Debug, Clone, PartialEq)]
pub struct CharReadout {
    pub class_id: usize,
    pub score: f64,
    pub track_id: u64,
    pub mean_position: Point2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadoutDiagnostics {
    /// Tracks discarded for having fewer than `min_hits` observations.
    pub tracks_dropped: usize,
    /// The voted string did not match the layout length, so merged classes
    /// were left unresolved.
    pub layout_length_mismatch: bool,
}

/// Final fused readout for one plate.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateReadout {
    pub text: String,
    pub per_char: Vec<CharReadout>,
    pub rows: u8,
    /// Accumulated rectification angle in radians; zero when rotation was
    /// disabled or the readout came from `finalize` directly.
    pub alpha_final: f64,
    pub diagnostics: ReadoutDiagnostics,
}

/// Votes every surviving track, orders tracks into reading order, and
/// resolves merged classes against the layout.
pub fn finalize(set: &TrackSet, config: &CtmConfig) -> Result<PlateReadout, CtmError> {
    let min_hits = config.min_hits.max(1);
    let survivors: Vec<&Track> = set
        .tracks
        .iter()
        .filter(|t| t.matched_count() >= min_hits)
        .collect();
    let dropped = set.tracks.len() - survivors.len();

    if survivors.is_empty() {
        return Ok(PlateReadout {
            text: String::new(),
            per_char: Vec::new(),
            rows: 1,
            alpha_final: 0.0,
            diagnostics: ReadoutDiagnostics {
                tracks_dropped: dropped,
                layout_length_mismatch: false,
            },
        });
    }

    // Reading order: split into rows by mean y when the layout is two-row,
    // then left to right within each row.
    let mut ordered: Vec<(&Track, u8)> = if config.layout.rows() == 2 {
        let ys: Vec<f64> = survivors.iter().map(|t| t.mean_position().y).collect();
        let min_y = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let max_y = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mid = (min_y + max_y) / 2.0;
        survivors
            .iter()
            .map(|t| (*t, u8::from(t.mean_position().y > mid)))
            .collect()
    } else {
        survivors.iter().map(|t| (*t, 0u8)).collect()
    };
    ordered.sort_by(|(a, row_a), (b, row_b)| {
        row_a
            .cmp(row_b)
            .then(
                a.mean_position()
                    .x
                    .partial_cmp(&b.mean_position().x)
                    .expect("finite positions"),
            )
            .then(a.id.cmp(&b.id))
    });
    let rows_used = if ordered.iter().any(|(_, r)| *r == 1) {
        2
    } else {
        1
    };

    let mut per_char = Vec::with_capacity(ordered.len());
    let mut merged_text = String::with_capacity(ordered.len());
    for (track, _) in &ordered {
        let result = vote(track, config.alphabet.len())?;
        let label = config
            .alphabet
            .label(result.class_id)
            .ok_or(CtmError::ClassOutOfRange {
                class_id: result.class_id,
                alphabet_size: config.alphabet.len(),
            })?;
        merged_text.push(label);
        per_char.push(CharReadout {
            class_id: result.class_id,
            score: result.score,
            track_id: track.id,
            mean_position: track.mean_position(),
        });
    }

    let resolved = disambiguate(&merged_text, &config.layout);
    Ok(PlateReadout {
        text: resolved.text,
        per_char,
        rows: rows_used,
        alpha_final: 0.0,
        diagnostics: ReadoutDiagnostics {
            tracks_dropped: dropped,
            layout_length_mismatch: resolved.length_mismatch,
        },
    })
}

/// Streaming per-plate pipeline: rectify, estimate slope, accumulate
/// rotation, update tracks. Owns the plate's rotation and track state.
#[derive(Debug, Clone)]
pub struct PlateProcessor<'a> {
    config: &'a CtmConfig,
    rotation: RotationState,
    tracks: TrackSet,
}

impl<'a> PlateProcessor<'a> {
    pub fn new(config: &'a CtmConfig) -> Self {
        Self {
            config,
            rotation: RotationState::new(),
            tracks: TrackSet::new(),
        }
    }

    pub fn rotation_state(&self) -> &RotationState {
        &self.rotation
    }

    pub fn track_set(&self) -> &TrackSet {
        &self.tracks
    }

    pub fn push_frame(&mut self, frame: &PlateFrame) -> Result<(), CtmError> {
        if !(frame.plate_box.w.is_finite() && frame.plate_box.h.is_finite())
            || frame.plate_box.w <= 0.0
            || frame.plate_box.h <= 0.0
        {
            return Err(CtmError::InvalidPlateBox {
                w: frame.plate_box.w,
                h: frame.plate_box.h,
            });
        }
        let detections = if self.config.enable_rotation {
            // Pivot about the plate-local box center.
            let pivot = Point2::new(frame.plate_box.w / 2.0, frame.plate_box.h / 2.0);
            let centers: Vec<Point2> = frame.detections.iter().map(|d| d.center).collect();
            let rectified_centers = rectify_points(&centers, self.rotation.alpha, pivot);
            let rectified: Vec<CharDetection> = frame
                .detections
                .iter()
                .zip(&rectified_centers)
                .map(|(d, &center)| CharDetection { center, ..*d })
                .collect();

            let beta = if rectified_centers.is_empty() {
                0.0
            } else {
                let est = estimate_slope(&rectified_centers)?;
                if est.defined {
                    slope_to_angle(&est)?
                } else {
                    0.0
                }
            };
            self.rotation = update_rotation(&self.rotation, beta)?;
            rectified
        } else {
            frame.detections.clone()
        };

        let epsilon = self.config.epsilon.effective(&detections);
        ctm_update(&mut self.tracks, &detections, epsilon)
    }

    pub fn finalize(self) -> Result<PlateReadout, CtmError> {
        let mut readout = finalize(&self.tracks, self.config)?;
        readout.alpha_final = self.rotation.alpha;
        Ok(readout)
    }
}

/// Runs a whole plate: frames in chronological order, one readout out.
/// Deterministic for fixed input and config.
pub fn run_plate(frames: &[PlateFrame], config: &CtmConfig) -> Result<PlateReadout, CtmError> {
    if frames.is_empty() {
        return Err(CtmError::EmptyFrameList);
    }
    let mut processor = PlateProcessor::new(config);
    for frame in frames {
        processor.push_frame(frame)?;
    }
    processor.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn det(x: f64, y: f64, class_id: usize, confidence: f64) -> CharDetection {
        CharDetection::new(Point2::new(x, y), 20.0, 30.0, class_id, confidence).unwrap()
    }

    fn class(c: char) -> usize {
        Alphabet::merged_latin().class_of(c).unwrap()
    }

    #[test]
    fn first_frame_seeds_a_track_per_detection() {
        let mut set = TrackSet::new();
        ctm_update(
            &mut set,
            &[det(10.0, 5.0, 3, 0.9), det(40.0, 5.0, 4, 0.8)],
            10.0,
        )
        .unwrap();
        assert_eq!(set.tracks().len(), 2);
        assert_eq!(set.tracks()[0].position, Point2::new(10.0, 5.0));
        assert_eq!(set.tracks()[1].position, Point2::new(40.0, 5.0));
        assert_eq!(set.tracks()[0].id, 0);
        assert_eq!(set.tracks()[1].id, 1);
    }

    #[test]
    fn matched_track_takes_detection_position_and_history() {
        let mut set = TrackSet::new();
        ctm_update(&mut set, &[det(10.0, 10.0, 2, 0.5)], 5.0).unwrap();
        ctm_update(&mut set, &[det(12.0, 10.0, 7, 0.8)], 5.0).unwrap();
        assert_eq!(set.tracks().len(), 1);
        let t = &set.tracks()[0];
        assert_eq!(t.position, Point2::new(12.0, 10.0));
        assert_eq!(t.cls, vec![2, 7]);
        assert_eq!(t.conf, vec![0.5, 0.8]);
        assert_eq!(t.matched_count(), 2);
        assert_eq!(t.last_matched_frame, 1);
    }

    #[test]
    fn unmatched_track_shifts_with_matched_pairs() {
        let mut set = TrackSet::new();
        ctm_update(
            &mut set,
            &[det(0.0, 0.0, 1, 0.9), det(50.0, 0.0, 2, 0.9)],
            5.0,
        )
        .unwrap();
        // Second character missing this frame; the matched pair moved +2 in x.
        ctm_update(&mut set, &[det(2.0, 0.0, 1, 0.9)], 5.0).unwrap();
        assert_eq!(set.tracks().len(), 2);
        assert_eq!(set.tracks()[0].position, Point2::new(2.0, 0.0));
        assert_eq!(set.tracks()[1].position, Point2::new(52.0, 0.0));
        assert_eq!(set.tracks()[1].matched_count(), 1);
    }

    #[test]
    fn no_matches_means_no_shift() {
        let mut set = TrackSet::new();
        ctm_update(&mut set, &[det(0.0, 0.0, 1, 0.9)], 5.0).unwrap();
        ctm_update(&mut set, &[], 5.0).unwrap();
        assert_eq!(set.tracks()[0].position, Point2::new(0.0, 0.0));
        assert_eq!(set.frame_index(), 2);
    }

    #[test]
    fn far_detection_spawns_instead_of_matching() {
        let mut set = TrackSet::new();
        ctm_update(&mut set, &[det(0.0, 0.0, 1, 0.9)], 5.0).unwrap();
        ctm_update(&mut set, &[det(30.0, 0.0, 1, 0.9)], 5.0).unwrap();
        assert_eq!(set.tracks().len(), 2);
    }

    #[test]
    fn update_rejects_bad_epsilon_and_detection() {
        let mut set = TrackSet::new();
        assert!(ctm_update(&mut set, &[det(0.0, 0.0, 1, 0.9)], 0.0).is_err());
        let bad = CharDetection {
            confidence: 1.7,
            ..det(0.0, 0.0, 1, 0.9)
        };
        assert!(matches!(
            ctm_update(&mut set, &[bad], 5.0),
            Err(CtmError::InvalidDetection(_))
        ));
    }

    #[test]
    fn vote_single_observation() {
        let t = Track::from_detection(0, &det(0.0, 0.0, class('H'), 0.9), 0);
        let v = vote(&t, 34).unwrap();
        assert_eq!(v.class_id, class('H'));
        assert!((v.score - 0.9).abs() < 1e-15);
        assert!(v.runner_up.is_none());
    }

    #[test]
    fn vote_weighted_sum_prefers_heavier_class() {
        // H observed at 0.6 and 0.7, M once at 0.9: K_H = 1.3 beats K_M = 0.9.
        let mut t = Track::from_detection(0, &det(0.0, 0.0, class('H'), 0.6), 0);
        t.absorb(&det(0.0, 0.0, class('M'), 0.9), 1);
        t.absorb(&det(0.0, 0.0, class('H'), 0.7), 2);
        let v = vote(&t, 34).unwrap();
        assert_eq!(v.class_id, class('H'));
        assert!((v.score - 1.3).abs() < 1e-12);
        let (runner_class, runner_score) = v.runner_up.unwrap();
        assert_eq!(runner_class, class('M'));
        assert!((runner_score - 0.9).abs() < 1e-15);
    }

    #[test]
    fn vote_tie_breaks_to_lower_class_id() {
        let mut t = Track::from_detection(0, &det(0.0, 0.0, 5, 0.5), 0);
        t.absorb(&det(0.0, 0.0, 3, 0.5), 1);
        let v = vote(&t, 34).unwrap();
        assert_eq!(v.class_id, 3);
    }

    #[test]
    fn vote_rejects_empty_and_out_of_range() {
        let mut t = Track::from_detection(0, &det(0.0, 0.0, 1, 0.9), 0);
        t.cls.clear();
        t.conf.clear();
        assert_eq!(vote(&t, 34), Err(CtmError::EmptyTrack));
        let t = Track::from_detection(0, &det(0.0, 0.0, 50, 0.9), 0);
        assert!(matches!(
            vote(&t, 34),
            Err(CtmError::ClassOutOfRange { .. })
        ));
    }

    fn run_frames(texts: &[&str], positions: &[f64]) -> TrackSet {
        let alphabet = Alphabet::merged_latin();
        let mut set = TrackSet::new();
        for text in texts {
            let dets: Vec<CharDetection> = text
                .chars()
                .zip(positions)
                .filter(|(c, _)| *c != '.')
                .map(|(c, &x)| det(x, 10.0, alphabet.class_of(c).unwrap(), 0.9))
                .collect();
            ctm_update(&mut set, &dets, 10.0).unwrap();
        }
        set
    }

    #[test]
    fn finalize_orders_by_x_and_applies_layout() {
        let positions: Vec<f64> = (0..7).map(|i| i as f64 * 30.0).collect();
        let set = run_frames(&["AEK0977", "AEK0977", "AEK0977"], &positions);
        let cfg = CtmConfig::default();
        let readout = finalize(&set, &cfg).unwrap();
        assert_eq!(readout.text, "AEK0977");
        assert_eq!(readout.per_char.len(), 7);
        assert_eq!(readout.rows, 1);
        assert_eq!(readout.diagnostics.tracks_dropped, 0);
    }

    #[test]
    fn finalize_drops_short_tracks() {
        let positions: Vec<f64> = (0..7).map(|i| i as f64 * 30.0).collect();
        // One spurious detection appears far away in a single frame.
        let alphabet = Alphabet::merged_latin();
        let mut set = run_frames(&["AEK0977", "AEK0977"], &positions);
        let spurious = det(300.0, 10.0, alphabet.class_of('Z').unwrap(), 0.4);
        let mut dets: Vec<CharDetection> = "AEK0977"
            .chars()
            .zip(&positions)
            .map(|(c, &x)| det(x, 10.0, alphabet.class_of(c).unwrap(), 0.9))
            .collect();
        dets.push(spurious);
        ctm_update(&mut set, &dets, 10.0).unwrap();
        assert_eq!(set.tracks().len(), 8);

        let cfg = CtmConfig::default();
        let readout = finalize(&set, &cfg).unwrap();
        assert_eq!(readout.text, "AEK0977");
        assert_eq!(readout.diagnostics.tracks_dropped, 1);

        // min_hits = 1 keeps the spurious track, mirroring no-filter behavior.
        let lenient = CtmConfig {
            min_hits: 1,
            ..CtmConfig::default()
        };
        let readout = finalize(&set, &lenient).unwrap();
        assert_eq!(readout.per_char.len(), 8);
        assert!(readout.diagnostics.layout_length_mismatch);
    }

    #[test]
    fn finalize_two_row_reading_order() {
        let alphabet = Alphabet::merged_latin();
        let layout = LayoutSpec::parse("NN|NNN").unwrap();
        let mut set = TrackSet::new();
        for _ in 0..2 {
            let dets = vec![
                det(35.0, 60.0, alphabet.class_of('3').unwrap(), 0.9),
                det(5.0, 60.0, alphabet.class_of('2').unwrap(), 0.9),
                det(65.0, 60.0, alphabet.class_of('4').unwrap(), 0.9),
                det(40.0, 20.0, alphabet.class_of('1').unwrap(), 0.9),
                det(10.0, 20.0, alphabet.class_of('0').unwrap(), 0.9),
            ];
            ctm_update(&mut set, &dets, 10.0).unwrap();
        }
        let cfg = CtmConfig {
            layout,
            ..CtmConfig::default()
        };
        let readout = finalize(&set, &cfg).unwrap();
        assert_eq!(readout.text, "01234");
        assert_eq!(readout.rows, 2);
    }

    #[test]
    fn finalize_with_no_survivors_reports_empty() {
        let set = run_frames(
            &["AEK0977"],
            &(0..7).map(|i| i as f64 * 30.0).collect::<Vec<_>>(),
        );
        let cfg = CtmConfig::default(); // min_hits 2 > single observation
        let readout = finalize(&set, &cfg).unwrap();
        assert_eq!(readout.text, "");
        assert_eq!(readout.diagnostics.tracks_dropped, 7);
    }

    fn perfect_frame(plate_id: &str, frame_index: u64, text: &str, tilt_rad: f64) -> PlateFrame {
        let alphabet = Alphabet::merged_latin();
        let n = text.chars().count();
        let pivot_x = 120.0;
        let pivot_y = 75.0;
        let detections = text
            .chars()
            .enumerate()
            .map(|(i, c)| {
                let r = (i as f64 - (n as f64 - 1.0) / 2.0) * 30.0;
                det(
                    pivot_x + r * tilt_rad.cos(),
                    pivot_y + r * tilt_rad.sin(),
                    alphabet.class_of(c).unwrap(),
                    0.9,
                )
            })
            .collect();
        PlateFrame {
            plate_id: plate_id.to_string(),
            frame_index,
            plate_box: Rect::new(0.0, 0.0, 240.0, 150.0),
            tilt_hint: None,
            detections,
        }
    }

    #[test]
    fn single_perfect_frame_reads_exactly() {
        let frames = vec![perfect_frame("p", 0, "ABC1234", 0.0)];
        let cfg = CtmConfig {
            min_hits: 1,
            ..CtmConfig::default()
        };
        let readout = run_plate(&frames, &cfg).unwrap();
        assert_eq!(readout.text, "ABC1234");
    }

    #[test]
    fn run_plate_rejects_empty_input() {
        assert_eq!(
            run_plate(&[], &CtmConfig::default()),
            Err(CtmError::EmptyFrameList)
        );
    }

    #[test]
    fn recovers_truth_under_minority_confusion() {
        // One character misread in 40% of the frames still loses the vote:
        // 18 correct reads at 0.9 outweigh 12 confusions at 0.85.
        let alphabet = Alphabet::merged_latin();
        let truth = "ABC1234";
        let wrong = alphabet.class_of('X').unwrap();
        let frames: Vec<PlateFrame> = (0..30)
            .map(|i| {
                let mut frame = perfect_frame("p", i, truth, 0.0);
                if i % 5 < 2 {
                    frame.detections[3].class_id = wrong;
                    frame.detections[3].confidence = 0.85;
                }
                frame
            })
            .collect();
        let readout = run_plate(&frames, &CtmConfig::default()).unwrap();
        assert_eq!(readout.text, truth);
    }

    #[test]
    fn run_plate_is_deterministic() {
        let frames: Vec<PlateFrame> = (0..10)
            .map(|i| perfect_frame("p", i, "ABC1234", 0.3))
            .collect();
        let cfg = CtmConfig::default();
        let a = run_plate(&frames, &cfg).unwrap();
        for _ in 0..4 {
            assert_eq!(run_plate(&frames, &cfg).unwrap(), a);
        }
    }

    #[test]
    fn tilted_plate_reads_like_pre_rectified() {
        let tilt = 15f64.to_radians();
        let tilted: Vec<PlateFrame> = (0..8)
            .map(|i| perfect_frame("p", i, "ABC1234", tilt))
            .collect();
        let level: Vec<PlateFrame> = (0..8)
            .map(|i| perfect_frame("p", i, "ABC1234", 0.0))
            .collect();
        let cfg = CtmConfig::default();
        let from_tilted = run_plate(&tilted, &cfg).unwrap();
        let from_level = run_plate(&level, &cfg).unwrap();
        assert_eq!(from_tilted.text, from_level.text);
        assert_eq!(from_tilted.text, "ABC1234");
        assert!((from_tilted.alpha_final - tilt).abs() < 1e-9);
    }

    #[test]
    fn noiseless_track_count_equals_characters() {
        for n_frames in [1u64, 2, 5, 20] {
            let frames: Vec<PlateFrame> = (0..n_frames)
                .map(|i| perfect_frame("p", i, "ABC1234", 0.0))
                .collect();
            let cfg = CtmConfig {
                min_hits: 1,
                ..CtmConfig::default()
            };
            let readout = run_plate(&frames, &cfg).unwrap();
            assert_eq!(readout.per_char.len(), 7, "frames = {n_frames}");
        }
    }

    #[test]
    fn coasted_track_rematches_after_gap() {
        let mut set = TrackSet::new();
        let make = |x0: f64, t: f64, with_middle: bool| -> Vec<CharDetection> {
            let mut dets = vec![
                det(x0 + 2.0 * t, 0.0, 1, 0.9),
                det(x0 + 60.0 + 2.0 * t, 0.0, 3, 0.9),
            ];
            if with_middle {
                dets.insert(1, det(x0 + 30.0 + 2.0 * t, 0.0, 2, 0.9));
            }
            dets
        };
        // Frame 0: all three. Frames 1..=4: middle missing, plate drifting
        // +2 px/frame. Frame 5: middle reappears.
        ctm_update(&mut set, &make(0.0, 0.0, true), 8.0).unwrap();
        let middle_id = set.tracks()[1].id;
        for t in 1..=4 {
            ctm_update(&mut set, &make(0.0, t as f64, false), 8.0).unwrap();
        }
        ctm_update(&mut set, &make(0.0, 5.0, true), 8.0).unwrap();
        // No new track was created: the coasted one re-acquired.
        assert_eq!(set.tracks().len(), 3);
        let middle = set.tracks().iter().find(|t| t.id == middle_id).unwrap();
        assert_eq!(middle.matched_count(), 2);
        assert_eq!(middle.last_matched_frame, 5);
    }

    proptest! {
        #[test]
        fn updates_conserve_tracks_and_observations(
            frames in proptest::collection::vec(
                proptest::collection::vec((0.0f64..300.0, 0.0f64..60.0, 0usize..34, 0.1f64..1.0), 0..8),
                1..12,
            ),
        ) {
            let mut set = TrackSet::new();
            for frame in &frames {
                let dets: Vec<CharDetection> = frame
                    .iter()
                    .map(|&(x, y, c, conf)| det(x, y, c, conf))
                    .collect();
                let tracks_before = set.tracks().len();
                let obs_before = set.observation_count();
                ctm_update(&mut set, &dets, 12.0).unwrap();
                // Every detection either extends a track or seeds one.
                prop_assert_eq!(set.observation_count(), obs_before + dets.len());
                prop_assert!(set.tracks().len() >= tracks_before);
                prop_assert!(set.tracks().len() <= tracks_before + dets.len());
                let new_tracks = set.tracks().len() - tracks_before;
                let extended = dets.len() - new_tracks;
                prop_assert!(extended <= tracks_before);
            }
            // Ids stay unique.
            let mut ids: Vec<u64> = set.tracks().iter().map(|t| t.id).collect();
            ids.sort_unstable();
            ids.dedup();
            prop_assert_eq!(ids.len(), set.tracks().len());
        }

        #[test]
        fn vote_argmax_is_scale_invariant(
            obs in proptest::collection::vec((0usize..10, 0.05f64..1.0), 1..20),
            lambda in prop::sample::select(vec![0.1f64, 1.0, 10.0]),
        ) {
            let mut t = Track::from_detection(0, &det(0.0, 0.0, obs[0].0, obs[0].1), 0);
            for &(c, conf) in &obs[1..] {
                t.absorb(&det(0.0, 0.0, c, conf), 0);
            }
            let base = vote(&t, 10).unwrap();
            let mut scaled = t.clone();
            // Confidence fields are only constrained at the detection
            // boundary; scaling here probes the argmax algebra.
            for c in &mut scaled.conf {
                *c *= lambda;
            }
            let v = vote(&scaled, 10).unwrap();
            prop_assert_eq!(base.class_id, v.class_id);
        }
    }
}
