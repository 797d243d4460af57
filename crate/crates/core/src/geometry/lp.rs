//! Thin wrapper over `microlp` for the small dense LPs geometry needs.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::GeometryError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Sense {
    Minimize,
    Maximize,
}

/// A row `coeffs · z >= rhs`.
pub(crate) struct GeRow {
    pub coeffs: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum LpOutcome {
    Optimal { value: f64, point: Vec<f64> },
    Infeasible,
    Unbounded,
}

pub(crate) fn solve(
    sense: Sense,
    objective: &[f64],
    bounds: &[(f64, f64)],
    rows: &[GeRow],
) -> Result<LpOutcome, GeometryError> {
    let direction = match sense {
        Sense::Minimize => OptimizationDirection::Minimize,
        Sense::Maximize => OptimizationDirection::Maximize,
    };
    let mut problem = Problem::new(direction);
    let vars: Vec<_> = objective
        .iter()
        .zip(bounds)
        .map(|(&c, &b)| problem.add_var(c, b))
        .collect();
    for row in rows {
        let terms: Vec<_> = vars
            .iter()
            .zip(&row.coeffs)
            .filter(|(_, c)| **c != 0.0)
            .map(|(v, c)| (*v, *c))
            .collect();
        if terms.is_empty() {
            // 0 >= rhs
            if row.rhs > 1e-12 {
                return Ok(LpOutcome::Infeasible);
            }
            continue;
        }
        problem.add_constraint(terms.as_slice(), ComparisonOp::Ge, row.rhs);
    }
    match problem.solve() {
        Ok(outcome) => match outcome.into_solution() {
            Ok(solution) => Ok(LpOutcome::Optimal {
                value: solution.objective(),
                point: vars.iter().map(|v| solution.var_value(*v)).collect(),
            }),
            Err(_) => Err(GeometryError::Lp("solve interrupted".into())),
        },
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(GeometryError::Lp(e.to_string())),
    }
}
