//! Method comparison harness: single-frame readout baselines vs multi-frame
//! fusion (CTM) vs rotation-corrected fusion (AR+CTM), on synthetic
//! scenarios with controlled degradation.

use crate::simulate::{
    scenario_for_plate, simulate, ScenarioConfig, SimulateError, SimulatedPlate,
};
use platefuse_core::ctm::{run_plate, CtmConfig, CtmError, PlateFrame};
use platefuse_core::layout::{disambiguate, Alphabet};
use serde::Serialize;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Ctm(#[from] CtmError),
    #[error("failed to build worker pool: {0}")]
    Pool(String),
    #[error("unknown method {0:?} (expected single_frame, ctm, ar_ctm)")]
    UnknownMethod(String),
}

/// Recognition strategies under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Per-frame readout; scored both on the self-chosen best frame
    /// (highest mean confidence) and on the modal string across frames.
    SingleFrame,
    /// Multi-frame track fusion, no rotation correction.
    Ctm,
    /// Rotation-corrected multi-frame fusion.
    ArCtm,
}

impl FromStr for Method {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "single_frame" => Ok(Method::SingleFrame),
            "ctm" => Ok(Method::Ctm),
            "ar_ctm" => Ok(Method::ArCtm),
            other => Err(EvalError::UnknownMethod(other.to_string())),
        }
    }
}

impl Method {
    pub const ALL: [Method; 3] = [Method::SingleFrame, Method::Ctm, Method::ArCtm];

    pub fn name(&self) -> &'static str {
        match self {
            Method::SingleFrame => "single_frame",
            Method::Ctm => "ctm",
            Method::ArCtm => "ar_ctm",
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MethodReport {
    pub plate_accuracy: f64,
    pub char_accuracy: f64,
    pub mean_frames_per_plate: f64,
    pub runtime_ms: f64,
    pub plates: usize,
}

/// Accuracy per method; mirrors the ablation table layout.
#[derive(Debug, Clone, Serialize, PartialEq, Default)]
pub struct EvalReport {
    pub plates: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_frame_best: Option<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub single_frame_majority: Option<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ctm: Option<MethodReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ar_ctm: Option<MethodReport>,
}

/// Readouts one plate produced under each requested method.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateOutcome {
    pub plate_id: String,
    pub truth: String,
    pub frames: usize,
    pub single_best: Option<String>,
    pub single_majority: Option<String>,
    pub ctm: Option<String>,
    pub ar_ctm: Option<String>,
    single_seconds: f64,
    ctm_seconds: f64,
    ar_ctm_seconds: f64,
}

/// Full evaluation: aggregate report plus per-plate readouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub report: EvalReport,
    pub outcomes: Vec<PlateOutcome>,
}

/// Levenshtein distance; strings here are at most a dozen characters.
fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut next = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        next[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            next[j + 1] = substitute.min(prev[j + 1] + 1).min(next[j] + 1);
        }
        std::mem::swap(&mut prev, &mut next);
    }
    prev[b.len()]
}

/// 1 − CER, clamped to [0, 1].
fn char_accuracy(truth: &str, got: &str) -> f64 {
    let n = truth.chars().count();
    if n == 0 {
        return if got.is_empty() { 1.0 } else { 0.0 };
    }
    let cer = edit_distance(truth, got) as f64 / n as f64;
    (1.0 - cer).max(0.0)
}

/// Per-frame readout: detections ordered by x, one-observation classes,
/// merged classes resolved against the layout.
fn single_frame_text(frame: &PlateFrame, config: &ScenarioConfig, alphabet: &Alphabet) -> String {
    let mut dets: Vec<_> = frame.detections.iter().collect();
    dets.sort_by(|a, b| {
        a.center
            .x
            .partial_cmp(&b.center.x)
            .expect("finite coordinates")
    });
    let merged: String = dets
        .iter()
        .map(|d| alphabet.label(d.class_id).expect("alphabet classes"))
        .collect();
    disambiguate(&merged, &config.layout).text
}

/// Both single-frame scorings: (best frame by mean confidence, modal string).
fn single_frame_readouts(
    frames: &[PlateFrame],
    config: &ScenarioConfig,
    alphabet: &Alphabet,
) -> (String, String) {
    let texts: Vec<String> = frames
        .iter()
        .map(|f| single_frame_text(f, config, alphabet))
        .collect();
    let scores: Vec<f64> = frames
        .iter()
        .map(|f| {
            if f.detections.is_empty() {
                0.0
            } else {
                f.detections.iter().map(|d| d.confidence).sum::<f64>() / f.detections.len() as f64
            }
        })
        .collect();

    let mut best_idx = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best_idx] {
            best_idx = i;
        }
    }
    let best = texts[best_idx].clone();

    let mut majority = texts[0].clone();
    let mut majority_count = 0;
    for (i, text) in texts.iter().enumerate() {
        let count = texts.iter().filter(|t| *t == text).count();
        if count > majority_count {
            majority_count = count;
            majority = texts[i].clone();
        }
    }
    (best, majority)
}

fn fusion_config(config: &ScenarioConfig, enable_rotation: bool) -> CtmConfig {
    CtmConfig {
        layout: config.layout.clone(),
        enable_rotation,
        ..CtmConfig::default()
    }
}

/// Runs the requested methods on one simulated plate.
pub fn evaluate_plate(
    plate: &SimulatedPlate,
    config: &ScenarioConfig,
    methods: &[Method],
) -> Result<PlateOutcome, EvalError> {
    let alphabet = Alphabet::merged_latin();
    let mut outcome = PlateOutcome {
        plate_id: plate.plate_id.clone(),
        truth: plate.truth.clone(),
        frames: plate.frames.len(),
        single_best: None,
        single_majority: None,
        ctm: None,
        ar_ctm: None,
        single_seconds: 0.0,
        ctm_seconds: 0.0,
        ar_ctm_seconds: 0.0,
    };
    for method in methods {
        match method {
            Method::SingleFrame => {
                let start = Instant::now();
                let (best, majority) = single_frame_readouts(&plate.frames, config, &alphabet);
                outcome.single_seconds = start.elapsed().as_secs_f64();
                outcome.single_best = Some(best);
                outcome.single_majority = Some(majority);
            }
            Method::Ctm => {
                let start = Instant::now();
                let readout = run_plate(&plate.frames, &fusion_config(config, false))?;
                outcome.ctm_seconds = start.elapsed().as_secs_f64();
                outcome.ctm = Some(readout.text);
            }
            Method::ArCtm => {
                let start = Instant::now();
                let readout = run_plate(&plate.rotated_frames, &fusion_config(config, true))?;
                outcome.ar_ctm_seconds = start.elapsed().as_secs_f64();
                outcome.ar_ctm = Some(readout.text);
            }
        }
    }
    Ok(outcome)
}

fn aggregate(
    outcomes: &[PlateOutcome],
    pick: impl Fn(&PlateOutcome) -> Option<&String>,
    seconds: impl Fn(&PlateOutcome) -> f64,
) -> Option<MethodReport> {
    let scored: Vec<(&PlateOutcome, &String)> = outcomes
        .iter()
        .filter_map(|o| pick(o).map(|t| (o, t)))
        .collect();
    if scored.is_empty() {
        return None;
    }
    let plates = scored.len();
    let exact = scored.iter().filter(|(o, t)| **t == o.truth).count();
    let char_acc: f64 = scored
        .iter()
        .map(|(o, t)| char_accuracy(&o.truth, t))
        .sum::<f64>()
        / plates as f64;
    let frames: f64 = scored.iter().map(|(o, _)| o.frames as f64).sum::<f64>() / plates as f64;
    let runtime_ms: f64 = scored.iter().map(|(o, _)| seconds(o)).sum::<f64>() * 1e3;
    Some(MethodReport {
        plate_accuracy: exact as f64 / plates as f64,
        char_accuracy: char_acc,
        mean_frames_per_plate: frames,
        runtime_ms,
        plates,
    })
}

/// Evaluates pre-simulated plates.
pub fn evaluate_plates(
    plates: &[(SimulatedPlate, ScenarioConfig)],
    methods: &[Method],
) -> Result<Evaluation, EvalError> {
    let outcomes: Vec<PlateOutcome> = plates
        .iter()
        .map(|(plate, config)| evaluate_plate(plate, config, methods))
        .collect::<Result<_, _>>()?;
    Ok(build_evaluation(outcomes))
}

fn build_evaluation(outcomes: Vec<PlateOutcome>) -> Evaluation {
    let report = EvalReport {
        plates: outcomes.len(),
        single_frame_best: aggregate(&outcomes, |o| o.single_best.as_ref(), |o| o.single_seconds),
        single_frame_majority: aggregate(&outcomes, |o| o.single_majority.as_ref(), |_| 0.0),
        ctm: aggregate(&outcomes, |o| o.ctm.as_ref(), |o| o.ctm_seconds),
        ar_ctm: aggregate(&outcomes, |o| o.ar_ctm.as_ref(), |o| o.ar_ctm_seconds),
    };
    Evaluation { report, outcomes }
}

/// Simulates `plates` scenarios derived from the base config and evaluates
/// the requested methods. Plates are independent and processed in parallel;
/// outcomes are collected in plate order, so the result is identical for any
/// worker count.
pub fn evaluate(
    base: &ScenarioConfig,
    plates: usize,
    methods: &[Method],
    workers: usize,
) -> Result<Evaluation, EvalError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    let outcomes: Vec<PlateOutcome> = pool.install(|| {
        use rayon::prelude::*;
        (0..plates)
            .into_par_iter()
            .map(|idx| {
                let scenario = scenario_for_plate(base, idx);
                let plate = simulate(&scenario)?;
                evaluate_plate(&plate, &scenario, methods)
            })
            .collect::<Result<_, EvalError>>()
    })?;
    Ok(build_evaluation(outcomes))
}
