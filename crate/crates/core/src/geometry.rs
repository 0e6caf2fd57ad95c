//! Plate rotation estimation and coordinate rectification.
//!
//! A tilted plate puts its character centers on a line `y = a*x + b`. The
//! slope is recovered by least squares over the centers, converted to an
//! angle, and accumulated across frames so that each new frame is rectified
//! by the angle learned so far. Rotation is applied to coordinates, not
//! pixels; the detector is external.

use thiserror::Error;

/// Tolerance below which the least-squares denominator is treated as zero
/// (all x within tolerance of their mean).
pub const SLOPE_DENOMINATOR_TOLERANCE: f64 = 1e-9;

/// Accumulated rotation is clamped to ±89° to keep arctan and the rotation
/// well-conditioned; real plates never approach vertical.
pub const MAX_ALPHA: f64 = 89.0 * std::f64::consts::PI / 180.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("no character centers")]
    NoCenters,
    #[error("invalid coordinate: ({x}, {y})")]
    InvalidCoordinate { x: f64, y: f64 },
    #[error("degenerate slope")]
    DegenerateSlope,
    #[error("non-finite angle")]
    NonFiniteAngle,
}

/// A point in plate-local pixel coordinates, y downward-positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Axis-aligned box as (x, y, w, h).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.x && p.x <= self.x + self.w && p.y >= self.y && p.y <= self.y + self.h
    }
}

/// Least-squares slope of the line through a set of character centers.
///
/// `defined` is false when fewer than two points were given or when all x
/// coordinates coincide (vertical stack); `a` must not be read in that case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeEstimate {
    pub a: f64,
    pub n: usize,
    pub defined: bool,
}

/// Per-plate rotation accumulator.
///
/// `alpha` is the total rectification angle applied to incoming frames;
/// `beta` is the residual angle estimated from the last frame. Angles are
/// radians; `alpha` is clamped to [`MAX_ALPHA`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationState {
    pub alpha: f64,
    pub beta: f64,
    pub frame_index: u64,
}

impl RotationState {
    /// Initial state: alpha = 0 before the first frame.
    pub fn new() -> Self {
        Self {
            alpha: 0.0,
            beta: 0.0,
            frame_index: 0,
        }
    }
}

impl Default for RotationState {
    fn default() -> Self {
        Self::new()
    }
}

/// Fits `y = a*x + b` to the centers and returns the slope.
///
/// Computed over centered coordinates, which is algebraically identical to
/// the raw-moment form but translation-invariant in floating point.
pub fn estimate_slope(centers: &[Point2]) -> Result<SlopeEstimate, GeometryError> {
    if centers.is_empty() {
        return Err(GeometryError::NoCenters);
    }
    for p in centers {
        if !p.is_finite() {
            return Err(GeometryError::InvalidCoordinate { x: p.x, y: p.y });
        }
    }
    let n = centers.len();
    if n < 2 {
        return Ok(SlopeEstimate {
            a: 0.0,
            n,
            defined: false,
        });
    }
    let inv_n = 1.0 / n as f64;
    let mean_x = centers.iter().map(|p| p.x).sum::<f64>() * inv_n;
    let mean_y = centers.iter().map(|p| p.y).sum::<f64>() * inv_n;
    let mut num = 0.0;
    let mut den = 0.0;
    for p in centers {
        let dx = p.x - mean_x;
        num += dx * (p.y - mean_y);
        den += dx * dx;
    }
    if den < SLOPE_DENOMINATOR_TOLERANCE {
        return Ok(SlopeEstimate {
            a: 0.0,
            n,
            defined: false,
        });
    }
    Ok(SlopeEstimate {
        a: num / den,
        n,
        defined: true,
    })
}

/// Angle of the fitted line against the horizontal axis: `atan(a)`,
/// in (−π/2, π/2).
pub fn slope_to_angle(est: &SlopeEstimate) -> Result<f64, GeometryError> {
    if !est.defined {
        return Err(GeometryError::DegenerateSlope);
    }
    Ok(est.a.atan())
}

/// Accumulates the residual angle: `alpha' = clamp(alpha + beta)`.
///
/// Frames with no defined slope carry the state forward with beta = 0.
pub fn update_rotation(state: &RotationState, beta: f64) -> Result<RotationState, GeometryError> {
    if !beta.is_finite() {
        return Err(GeometryError::NonFiniteAngle);
    }
    Ok(RotationState {
        alpha: (state.alpha + beta).clamp(-MAX_ALPHA, MAX_ALPHA),
        beta,
        frame_index: state.frame_index + 1,
    })
}

/// Rotates each center by −alpha about the pivot, mapping raw detections
/// into the rectified plate frame. Pairwise distances are preserved.
pub fn rectify_points(centers: &[Point2], alpha: f64, pivot: Point2) -> Vec<Point2> {
    if alpha == 0.0 {
        return centers.to_vec();
    }
    let (sin_a, cos_a) = alpha.sin_cos();
    centers
        .iter()
        .map(|p| {
            let dx = p.x - pivot.x;
            let dy = p.y - pivot.y;
            Point2::new(
                pivot.x + cos_a * dx + sin_a * dy,
                pivot.y - sin_a * dx + cos_a * dy,
            )
        })
        .collect()
}

/// Rotates a single point by −alpha about the pivot.
pub fn rectify_point(p: Point2, alpha: f64, pivot: Point2) -> Point2 {
    rectify_points(std::slice::from_ref(&p), alpha, pivot)[0]
}
