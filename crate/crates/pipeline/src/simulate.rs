//! Synthetic detection-stream generator.
//!
//! Stands in for the neural detectors: characters are laid out on a line
//! with slope tan(tilt) through the plate center, drift along that line at
//! a constant velocity, and get Gaussian center jitter. Each character is
//! independently dropped (miss) or misclassified (confusion) per frame, and
//! confidences are drawn from fixed ranges: correct class U[0.6, 0.95],
//! confused class U[0.3, 0.8].
//!
//! Tilt degrades recognition through a multiplier `1 + γ·|effective tilt|/30°`
//! on the per-frame confusion probability, plus a tilt-gated *persistent*
//! confusion mode: with probability `sys_confusion_prob · γ·|effective
//! tilt|/30°` a character is consistently misread for as long as the tilt
//! persists. That persistent mode is what rotation correction actually fixes;
//! i.i.d. confusion alone washes out under multi-frame voting.
//!
//! Every plate is generated in two coupled views sharing geometry and random
//! draws: the raw view keeps the full tilt every frame, while the rotated
//! view models a detector running on rectified crops — full tilt on frame 0,
//! zero effective tilt afterwards (rotation estimation converges after one
//! frame on clean geometry). Identical draws make the views a counterfactual
//! pair, so method comparisons use common random numbers.

use crate::vehicle::VehicleBox;
use platefuse_core::ctm::{CharDetection, PlateFrame};
use platefuse_core::geometry::{Point2, Rect};
use platefuse_core::layout::{Alphabet, LayoutSpec, SlotKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub const CHAR_WIDTH: f64 = 20.0;
pub const CHAR_HEIGHT: f64 = 30.0;
pub const CHAR_PITCH: f64 = 30.0;
/// Image-space position of the simulated plate box.
const PLATE_IMAGE_POS: (f64, f64) = (400.0, 300.0);

#[derive(Debug, Error, PartialEq)]
pub enum SimulateError {
    #[error("{name} must be a probability in [0, 1], got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("{name} must be finite and non-negative, got {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("plate text is empty")]
    EmptyText,
    #[error("plate text contains unsupported character {0:?}")]
    UnsupportedChar(char),
    #[error("scenario needs at least one frame")]
    NoFrames,
}

/// Per-class confusion candidates over the merged alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTable {
    by_class: Vec<Vec<usize>>,
}

impl ConfusionTable {
    /// Visually plausible confusions for the merged Latin-digit alphabet.
    pub fn default_for(alphabet: &Alphabet) -> Self {
        let pairs: &[(&str, &str)] = &[
            ("0", "DQ"),
            ("1", "7T"),
            ("2", "Z"),
            ("3", "8"),
            ("4", "A"),
            ("5", "S"),
            ("6", "G"),
            ("7", "1"),
            ("8", "B3"),
            ("9", "84"),
            ("A", "4"),
            ("B", "8"),
            ("C", "G"),
            ("D", "0"),
            ("E", "F"),
            ("F", "E"),
            ("G", "6C"),
            ("H", "MN"),
            ("J", "1"),
            ("K", "X"),
            ("L", "1"),
            ("M", "HN"),
            ("N", "MH"),
            ("P", "R"),
            ("Q", "0"),
            ("R", "P"),
            ("S", "5"),
            ("T", "17"),
            ("U", "V"),
            ("V", "UY"),
            ("W", "M"),
            ("X", "K"),
            ("Y", "V"),
            ("Z", "2"),
        ];
        let mut by_class = vec![Vec::new(); alphabet.len()];
        for (from, candidates) in pairs {
            let from_id = alphabet
                .class_of(from.chars().next().unwrap())
                .expect("table uses alphabet classes");
            by_class[from_id] = candidates
                .chars()
                .map(|c| alphabet.class_of(c).expect("table uses alphabet classes"))
                .collect();
        }
        Self { by_class }
    }

    pub fn candidates(&self, class_id: usize) -> &[usize] {
        &self.by_class[class_id]
    }

    /// Deterministic pick among this class's candidates; falls back to the
    /// next class when the table has no entry.
    fn pick(&self, class_id: usize, u: f64) -> usize {
        let candidates = &self.by_class[class_id];
        if candidates.is_empty() {
            (class_id + 1) % self.by_class.len()
        } else {
            candidates[((u * candidates.len() as f64) as usize).min(candidates.len() - 1)]
        }
    }
}

impl Default for ConfusionTable {
    fn default() -> Self {
        Self::default_for(&Alphabet::merged_latin())
    }
}

/// One synthetic plate scenario; generation is deterministic in `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub plate_id: String,
    /// Ground-truth display text (may contain I and O at alphabetic slots).
    pub plate_text: String,
    pub layout: LayoutSpec,
    pub n_frames: usize,
    /// Static plate tilt in degrees.
    pub tilt_deg: f64,
    /// Gaussian center jitter, pixels.
    pub jitter_sigma: f64,
    /// Per-character per-frame drop probability.
    pub miss_prob: f64,
    /// Per-character per-frame misclassification probability (before the
    /// tilt multiplier).
    pub confusion_prob: f64,
    /// Tilt-gated persistent misread probability per character.
    pub sys_confusion_prob: f64,
    /// Tilt-noise coupling strength.
    pub gamma: f64,
    /// Drift along the character line, pixels per frame.
    pub velocity: f64,
    pub confusion_table: ConfusionTable,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            plate_id: "plate-0".to_string(),
            plate_text: "ABC1234".to_string(),
            layout: LayoutSpec::default(),
            n_frames: 30,
            tilt_deg: 0.0,
            jitter_sigma: 1.0,
            miss_prob: 0.10,
            confusion_prob: 0.15,
            sys_confusion_prob: 0.02,
            gamma: 1.0,
            velocity: 0.0,
            confusion_table: ConfusionTable::default(),
            seed: 42,
        }
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<(), SimulateError> {
        for (name, value) in [
            ("miss_prob", self.miss_prob),
            ("confusion_prob", self.confusion_prob),
            ("sys_confusion_prob", self.sys_confusion_prob),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimulateError::InvalidProbability { name, value });
            }
        }
        for (name, value) in [("jitter_sigma", self.jitter_sigma), ("gamma", self.gamma)] {
            if !value.is_finite() || value < 0.0 {
                return Err(SimulateError::InvalidParameter { name, value });
            }
        }
        if !self.tilt_deg.is_finite() || !self.velocity.is_finite() {
            return Err(SimulateError::InvalidParameter {
                name: "tilt_deg/velocity",
                value: f64::NAN,
            });
        }
        if self.plate_text.is_empty() {
            return Err(SimulateError::EmptyText);
        }
        if self.n_frames == 0 {
            return Err(SimulateError::NoFrames);
        }
        Ok(())
    }
}

/// Which detector the view models.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum DetectorView {
    /// Detector sees the raw, tilted plate every frame.
    Raw,
    /// Detector sees rectified crops from frame 1 onward.
    Rotated,
}

/// A generated plate: ground truth plus the two coupled detection views.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedPlate {
    pub plate_id: String,
    pub truth: String,
    pub tilt_deg: f64,
    /// Raw-detector view: full tilt noise in every frame.
    pub frames: Vec<PlateFrame>,
    /// Rotated-detector view: tilt noise only in frame 0.
    pub rotated_frames: Vec<PlateFrame>,
    /// One synthetic containing vehicle per frame.
    pub vehicles: Vec<Vec<VehicleBox>>,
}

fn substream(seed: u64, a: u64, b: u64, tag: u64) -> ChaCha8Rng {
    let mut bytes = [0u8; 32];
    bytes[0..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..16].copy_from_slice(&a.to_le_bytes());
    bytes[16..24].copy_from_slice(&b.to_le_bytes());
    bytes[24..32].copy_from_slice(&tag.to_le_bytes());
    ChaCha8Rng::from_seed(bytes)
}

const TAG_FRAME_CHAR: u64 = 0x66726d63;
const TAG_PERSISTENT: u64 = 0x73797343;

/// Standard normal via Box–Muller; draws exactly two uniforms.
fn normal_pair(rng: &mut ChaCha8Rng) -> (f64, f64) {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    let r = (-2.0 * u1.ln()).sqrt();
    let phi = 2.0 * std::f64::consts::PI * u2;
    (r * phi.cos(), r * phi.sin())
}

struct PlateGeometry {
    width: f64,
    height: f64,
    cos_t: f64,
    sin_t: f64,
    offsets: Vec<f64>,
}

fn geometry(config: &ScenarioConfig) -> PlateGeometry {
    let n = config.plate_text.chars().count();
    let theta = config.tilt_deg.to_radians();
    let half_span = (n as f64 - 1.0) / 2.0 * CHAR_PITCH;
    let max_s = half_span + config.velocity.abs() * (config.n_frames as f64 - 1.0);
    let width = 2.0 * (max_s + 2.0 * CHAR_WIDTH);
    let height = 2.0 * (max_s * theta.sin().abs() + CHAR_HEIGHT + 4.0 * config.jitter_sigma + 10.0);
    let offsets = (0..n)
        .map(|i| (i as f64 - (n as f64 - 1.0) / 2.0) * CHAR_PITCH)
        .collect();
    PlateGeometry {
        width,
        height,
        cos_t: theta.cos(),
        sin_t: theta.sin(),
        offsets,
    }
}

fn generate_view(
    config: &ScenarioConfig,
    truth_classes: &[usize],
    table: &ConfusionTable,
    geom: &PlateGeometry,
    view: DetectorView,
) -> Vec<PlateFrame> {
    let pivot = Point2::new(geom.width / 2.0, geom.height / 2.0);
    let mut frames = Vec::with_capacity(config.n_frames);
    for t in 0..config.n_frames {
        let effective_tilt = match view {
            DetectorView::Raw => config.tilt_deg.abs(),
            DetectorView::Rotated => {
                if t == 0 {
                    config.tilt_deg.abs()
                } else {
                    0.0
                }
            }
        };
        let tilt_factor = config.gamma * effective_tilt / 30.0;
        let confusion = (config.confusion_prob * (1.0 + tilt_factor)).min(1.0);
        let persistent = (config.sys_confusion_prob * tilt_factor).min(1.0);

        let mut detections = Vec::with_capacity(truth_classes.len());
        for (i, &true_class) in truth_classes.iter().enumerate() {
            // Identical draw order in both views keeps them coupled.
            let mut rng = substream(config.seed, t as u64, i as u64, TAG_FRAME_CHAR);
            let u_miss: f64 = rng.gen();
            let (jx, jy) = normal_pair(&mut rng);
            let u_conf: f64 = rng.gen();
            let conf_correct: f64 = rng.gen();
            let conf_confused: f64 = rng.gen();
            let confused_pick: f64 = rng.gen();

            let mut sys_rng = substream(config.seed, i as u64, 0, TAG_PERSISTENT);
            let u_persistent: f64 = sys_rng.gen();
            let persistent_pick: f64 = sys_rng.gen();

            if u_miss < config.miss_prob {
                continue;
            }
            let (class_id, confidence) = if u_persistent < persistent {
                (
                    table.pick(true_class, persistent_pick),
                    0.3 + 0.5 * conf_confused,
                )
            } else if u_conf < confusion {
                (
                    table.pick(true_class, confused_pick),
                    0.3 + 0.5 * conf_confused,
                )
            } else {
                (true_class, 0.6 + 0.35 * conf_correct)
            };

            let s = geom.offsets[i] + config.velocity * t as f64;
            let center = Point2::new(
                pivot.x + s * geom.cos_t + config.jitter_sigma * jx,
                pivot.y + s * geom.sin_t + config.jitter_sigma * jy,
            );
            detections.push(
                CharDetection::new(center, CHAR_WIDTH, CHAR_HEIGHT, class_id, confidence)
                    .expect("simulated detections satisfy the invariants"),
            );
        }
        frames.push(PlateFrame {
            plate_id: config.plate_id.clone(),
            frame_index: t as u64,
            plate_box: Rect::new(
                PLATE_IMAGE_POS.0,
                PLATE_IMAGE_POS.1,
                geom.width,
                geom.height,
            ),
            tilt_hint: Some(config.tilt_deg),
            detections,
        });
    }
    frames
}

/// Generates the plate's detection stream and ground truth.
pub fn simulate(config: &ScenarioConfig) -> Result<SimulatedPlate, SimulateError> {
    config.validate()?;
    let alphabet = Alphabet::merged_latin();
    let truth_classes: Vec<usize> = config
        .plate_text
        .chars()
        .map(|c| {
            alphabet
                .class_of(c)
                .map_err(|_| SimulateError::UnsupportedChar(c))
        })
        .collect::<Result<_, _>>()?;
    let geom = geometry(config);

    let table = &config.confusion_table;
    let frames = generate_view(config, &truth_classes, table, &geom, DetectorView::Raw);
    let rotated_frames = generate_view(config, &truth_classes, table, &geom, DetectorView::Rotated);

    let plate_box = Rect::new(
        PLATE_IMAGE_POS.0,
        PLATE_IMAGE_POS.1,
        geom.width,
        geom.height,
    );
    let vehicle = VehicleBox {
        frame_index: 0,
        box_: Rect::new(
            plate_box.x - 120.0,
            plate_box.y - 180.0,
            plate_box.w + 240.0,
            plate_box.h + 260.0,
        ),
        vehicle_id: format!("veh-{}", config.plate_id),
        vehicle_class: "car".to_string(),
    };
    let vehicles = (0..config.n_frames)
        .map(|t| {
            vec![VehicleBox {
                frame_index: t as u64,
                ..vehicle.clone()
            }]
        })
        .collect();

    Ok(SimulatedPlate {
        plate_id: config.plate_id.clone(),
        truth: config.plate_text.clone(),
        tilt_deg: config.tilt_deg,
        frames,
        rotated_frames,
        vehicles,
    })
}

/// Random plate text matching a layout: letters at alphabetic slots
/// (including I and O), digits at numeric slots.
pub fn random_plate_text(layout: &LayoutSpec, rng: &mut ChaCha8Rng) -> String {
    layout
        .pattern()
        .iter()
        .map(|slot| match slot {
            SlotKind::Alphabetic => {
                let letters: Vec<char> = ('A'..='Z').collect();
                letters[rng.gen_range(0..letters.len())]
            }
            SlotKind::Numeric | SlotKind::Any => {
                char::from_digit(rng.gen_range(0..10), 10).expect("single digit")
            }
        })
        .collect()
}

/// Derives the per-plate scenario for a bench run: stable plate id, text
/// drawn from the layout, and an independent seed per plate.
pub fn scenario_for_plate(base: &ScenarioConfig, plate_index: usize) -> ScenarioConfig {
    let mut rng = substream(base.seed, plate_index as u64, 0, 0x706c74);
    let plate_text = random_plate_text(&base.layout, &mut rng);
    ScenarioConfig {
        plate_id: format!("p{plate_index:05}"),
        plate_text,
        seed: rng.gen(),
        ..base.clone()
    }
}
