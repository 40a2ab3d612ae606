//! The dominance linear program.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

/// Solves `max eps` subject to `sum_j x_j d_kj >= eps` for every row `k` of
/// `diffs`, with `x` a probability vector. Returns the optimal `eps`.
pub fn max_min_margin(diffs: &[Vec<f64>], num_vars: usize) -> Result<f64> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let x: Vec<_> = (0..num_vars).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let eps = lp.add_var(1.0, (f64::NEG_INFINITY, f64::INFINITY));
    lp.add_constraint(x.iter().map(|&v| (v, 1.0)), ComparisonOp::Eq, 1.0);
    for row in diffs {
        let expr: Vec<_> = x
            .iter()
            .zip(row)
            .filter(|(_, &d)| d != 0.0)
            .map(|(&v, &d)| (v, d))
            .chain(std::iter::once((eps, -1.0)))
            .collect();
        lp.add_constraint(expr, ComparisonOp::Ge, 0.0);
    }
    lp.solve().map(|s| s.objective()).map_err(|e| {
        Error::LpNumericalFailure(format!("{e} ({} rows, {num_vars} columns)", diffs.len()))
    })
}
