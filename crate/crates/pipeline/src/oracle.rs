//! Randomized cross-check of the assignment solver against brute-force
//! enumeration.
//!
//! Costs are drawn on a dyadic grid (multiples of 1/1024) so that every
//! addition and subtraction inside the solver is exact in f64; total-cost
//! equality with the oracle is then meaningful at zero tolerance.

use platefuse_core::assignment::{brute_force_solve, solve, CostMatrix, INFEASIBLE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMismatch {
    pub case: usize,
    pub rows: usize,
    pub cols: usize,
    pub solver_cost: f64,
    pub oracle_cost: f64,
    pub solver_cardinality: usize,
    pub oracle_cardinality: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub cases: usize,
    pub mismatches: Vec<OracleMismatch>,
    pub elapsed: Duration,
}

impl OracleOutcome {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

/// Draws one gated cost matrix: dimensions in 1..=max_dim, entries uniform
/// on the dyadic grid over [0, 100], cells infeasible with the given rate.
pub fn random_gated_matrix(
    rng: &mut ChaCha8Rng,
    max_dim: usize,
    infeasible_rate: f64,
) -> CostMatrix {
    let rows = rng.gen_range(1..=max_dim);
    let cols = rng.gen_range(1..=max_dim);
    CostMatrix::from_fn(rows, cols, |_, _| {
        if rng.gen::<f64>() < infeasible_rate {
            INFEASIBLE
        } else {
            rng.gen_range(0u32..=102_400) as f64 / 1024.0
        }
    })
    .expect("grid costs are valid")
}

/// Runs `cases` random matrices through both solvers and compares total cost
/// and cardinality exactly.
pub fn run_oracle(cases: usize, max_dim: usize, infeasible_rate: f64, seed: u64) -> OracleOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut mismatches = Vec::new();
    for case in 0..cases {
        let matrix = random_gated_matrix(&mut rng, max_dim, infeasible_rate);
        let fast = solve(&matrix);
        let slow = brute_force_solve(&matrix).expect("dimensions within brute-force limit");
        let solver_cost = fast.total_cost(&matrix);
        let oracle_cost = slow.total_cost(&matrix);
        if fast.cardinality() != slow.cardinality() || solver_cost != oracle_cost {
            mismatches.push(OracleMismatch {
                case,
                rows: matrix.rows(),
                cols: matrix.cols(),
                solver_cost,
                oracle_cost,
                solver_cardinality: fast.cardinality(),
                oracle_cardinality: slow.cardinality(),
            });
        }
    }
    OracleOutcome {
        cases,
        mismatches,
        elapsed: start.elapsed(),
    }
}
