//! Exact solver for the gated rectangular linear assignment problem.
//!
//! Tracks and detections are matched by minimizing total Euclidean distance
//! subject to a hard gate: cells at or beyond the threshold ε are infeasible
//! and can never be part of a match. Among assignments that use only feasible
//! cells, the solver first maximizes the number of matches, then minimizes
//! total cost.
//!
//! [`solve`] is an O(n³) Kuhn–Munkres variant over a square padding of the
//! matrix; [`brute_force_solve`] enumerates all feasible partial assignments
//! and exists as the independent oracle for tests.

use crate::geometry::Point2;
use thiserror::Error;

/// Sentinel marking a gated-out cell. Never returned inside a pair.
pub const INFEASIBLE: f64 = f64::INFINITY;

#[derive(Debug, Error, PartialEq)]
pub enum AssignmentError {
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("cost at ({row}, {col}) must be non-negative and not NaN, got {value}")]
    InvalidCost { row: usize, col: usize, value: f64 },
    #[error("data length {got} does not match {rows}x{cols}")]
    DimensionMismatch {
        rows: usize,
        cols: usize,
        got: usize,
    },
    #[error("brute force is limited to 9x9, got {rows}x{cols}")]
    TooLarge { rows: usize, cols: usize },
    #[error("position contains a non-finite coordinate")]
    InvalidPosition,
}

/// Row-major cost matrix of track-to-detection distances, with [`INFEASIBLE`]
/// marking gated-out cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AssignmentError> {
        if data.len() != rows * cols {
            return Err(AssignmentError::DimensionMismatch {
                rows,
                cols,
                got: data.len(),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if v.is_nan() || v < 0.0 {
                return Err(AssignmentError::InvalidCost {
                    row: i / cols.max(1),
                    col: i % cols.max(1),
                    value: v,
                });
            }
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, AssignmentError> {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self::new(rows, cols, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn is_feasible(&self, row: usize, col: usize) -> bool {
        self.get(row, col).is_finite()
    }

    fn sum_finite(&self) -> f64 {
        self.data.iter().filter(|v| v.is_finite()).sum()
    }
}

/// Result of an assignment: matched (row, col) pairs sorted by row, plus the
/// leftover rows and columns. Every index appears exactly once across the
/// partition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl Assignment {
    pub fn cardinality(&self) -> usize {
        self.pairs.len()
    }

    /// Total cost summed in row order, so equal pair sets always produce the
    /// same floating-point total.
    pub fn total_cost(&self, matrix: &CostMatrix) -> f64 {
        self.pairs.iter().map(|&(r, c)| matrix.get(r, c)).sum()
    }
}

/// Builds the gated distance matrix: `cost[r][c]` is the Euclidean distance
/// from track r to detection c when strictly below epsilon, else infeasible.
pub fn build_cost_matrix(
    track_positions: &[Point2],
    det_centers: &[Point2],
    epsilon: f64,
) -> Result<CostMatrix, AssignmentError> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(AssignmentError::InvalidEpsilon(epsilon));
    }
    for p in track_positions.iter().chain(det_centers) {
        if !p.is_finite() {
            return Err(AssignmentError::InvalidPosition);
        }
    }
    CostMatrix::from_fn(track_positions.len(), det_centers.len(), |r, c| {
        let d = track_positions[r].distance(&det_centers[c]);
        if d < epsilon {
            d
        } else {
            INFEASIBLE
        }
    })
}

/// Shortest-augmenting-path Kuhn–Munkres on a square matrix with finite
/// costs. Returns the matched column for each row.
fn solve_square(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> Vec<usize> {
    // 1-based potentials; p[j] is the row matched to column j, 0 = free.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![usize::MAX; n];
    for (j, &row) in p.iter().enumerate().skip(1) {
        if row != 0 {
            row_to_col[row - 1] = j - 1;
        }
    }
    row_to_col
}

/// Minimum-cost assignment of maximum feasible cardinality.
///
/// Infeasible and padding cells are priced above the sum of all finite costs,
/// so the square solver first avoids them (maximizing real matches) and only
/// then minimizes cost. Exact cost ties between two pairs are canonicalized
/// so the lower row takes the lower column.
pub fn solve(matrix: &CostMatrix) -> Assignment {
    let (rows, cols) = (matrix.rows, matrix.cols);
    if rows == 0 || cols == 0 {
        return Assignment {
            pairs: Vec::new(),
            unmatched_rows: (0..rows).collect(),
            unmatched_cols: (0..cols).collect(),
        };
    }
    let n = rows.max(cols);
    let big = matrix.sum_finite().max(0.0) + 1.0;
    let padded = |r: usize, c: usize| -> f64 {
        if r < rows && c < cols && matrix.is_feasible(r, c) {
            matrix.get(r, c)
        } else {
            big
        }
    };
    let row_to_col = solve_square(n, &padded);

    let mut pairs: Vec<(usize, usize)> = (0..rows)
        .filter_map(|r| {
            let c = row_to_col[r];
            (c < cols && matrix.is_feasible(r, c)).then_some((r, c))
        })
        .collect();
    canonicalize_ties(matrix, &mut pairs);

    let matched_rows: Vec<bool> = {
        let mut m = vec![false; rows];
        for &(r, _) in &pairs {
            m[r] = true;
        }
        m
    };
    let matched_cols: Vec<bool> = {
        let mut m = vec![false; cols];
        for &(_, c) in &pairs {
            m[c] = true;
        }
        m
    };
    Assignment {
        pairs,
        unmatched_rows: (0..rows).filter(|&r| !matched_rows[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !matched_cols[c]).collect(),
    }
}

/// Swaps columns between pairs whose costs tie exactly, preferring the lower
/// column for the lower row. Total cost and cardinality are unchanged.
fn canonicalize_ties(matrix: &CostMatrix, pairs: &mut [(usize, usize)]) {
    pairs.sort_unstable();
    let mut rounds = 0;
    loop {
        let mut changed = false;
        for i in 0..pairs.len() {
            for j in (i + 1)..pairs.len() {
                let (r1, c1) = pairs[i];
                let (r2, c2) = pairs[j];
                if c2 < c1
                    && matrix.is_feasible(r1, c2)
                    && matrix.is_feasible(r2, c1)
                    && matrix.get(r1, c1) + matrix.get(r2, c2)
                        == matrix.get(r1, c2) + matrix.get(r2, c1)
                {
                    pairs[i] = (r1, c2);
                    pairs[j] = (r2, c1);
                    changed = true;
                }
            }
        }
        rounds += 1;
        if !changed || rounds > pairs.len() {
            break;
        }
    }
}

/// Exhaustive oracle: enumerates every feasible partial assignment and keeps
/// the best by (max cardinality, min cost, lexicographically smallest pairs).
/// Test use only; limited to 9x9.
pub fn brute_force_solve(matrix: &CostMatrix) -> Result<Assignment, AssignmentError> {
    let (rows, cols) = (matrix.rows, matrix.cols);
    if rows > 9 || cols > 9 {
        return Err(AssignmentError::TooLarge { rows, cols });
    }

    // (cardinality, total cost, pairs)
    type Candidate = (usize, f64, Vec<(usize, usize)>);

    struct Search<'a> {
        matrix: &'a CostMatrix,
        used_cols: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Option<Candidate>,
    }

    impl Search<'_> {
        fn recurse(&mut self, row: usize, cost_so_far: f64) {
            let rows = self.matrix.rows;
            if row == rows {
                let card = self.current.len();
                let better = match &self.best {
                    None => true,
                    Some((bc, bcost, bpairs)) => {
                        card > *bc
                            || (card == *bc && cost_so_far < *bcost)
                            || (card == *bc && cost_so_far == *bcost && self.current < *bpairs)
                    }
                };
                if better {
                    self.best = Some((card, cost_so_far, self.current.clone()));
                }
                return;
            }
            // Bound: even matching every remaining row cannot beat the best.
            if let Some((bc, bcost, _)) = &self.best {
                let max_reachable = self.current.len() + (rows - row);
                if max_reachable < *bc {
                    return;
                }
                if max_reachable == *bc && cost_so_far > *bcost {
                    return;
                }
            }
            for col in 0..self.matrix.cols {
                if self.used_cols[col] || !self.matrix.is_feasible(row, col) {
                    continue;
                }
                self.used_cols[col] = true;
                self.current.push((row, col));
                self.recurse(row + 1, cost_so_far + self.matrix.get(row, col));
                self.current.pop();
                self.used_cols[col] = false;
            }
            // Leave this row unmatched.
            self.recurse(row + 1, cost_so_far);
        }
    }

    let mut search = Search {
        matrix,
        used_cols: vec![false; cols],
        current: Vec::new(),
        best: None,
    };
    search.recurse(0, 0.0);
    let (_, _, pairs) = search
        .best
        .expect("search visits at least the empty assignment");

    let mut matched_rows = vec![false; rows];
    let mut matched_cols = vec![false; cols];
    for &(r, c) in &pairs {
        matched_rows[r] = true;
        matched_cols[c] = true;
    }
    Ok(Assignment {
        pairs,
        unmatched_rows: (0..rows).filter(|&r| !matched_rows[r]).collect(),
        unmatched_cols: (0..cols).filter(|&c| !matched_cols[c]).collect(),
    })
}
