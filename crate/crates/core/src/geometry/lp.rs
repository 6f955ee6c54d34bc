//! Thin wrapper over the simplex solver used by every polytope query.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of `max c·x s.t. A x ≤ b`. `value` and `point` are only meaningful
/// when `status` is [`LpStatus::Optimal`].
#[derive(Clone, Debug)]
pub struct LpOutcome {
    pub status: LpStatus,
    pub value: f64,
    pub point: Vec<f64>,
}

impl LpOutcome {
    fn without_solution(status: LpStatus) -> Self {
        let value = match status {
            LpStatus::Unbounded => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        };
        LpOutcome {
            status,
            value,
            point: Vec::new(),
        }
    }
}

/// Maximizes `c·x` over `{x : A x ≤ b}` with `A` stored row-major (`b.len()`
/// rows of `c.len()` columns). Variables are free unless `bounds` is given.
pub fn maximize(
    c: &[f64],
    a: &[f64],
    b: &[f64],
    bounds: Option<&[(f64, f64)]>,
) -> Result<LpOutcome> {
    let n = c.len();
    debug_assert_eq!(a.len(), n * b.len());
    let mut problem = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..n)
        .map(|j| {
            let range = bounds.map_or((f64::NEG_INFINITY, f64::INFINITY), |bs| bs[j]);
            problem.add_var(c[j], range)
        })
        .collect();
    for (i, &rhs) in b.iter().enumerate() {
        let row = &a[i * n..(i + 1) * n];
        let terms: Vec<_> = row
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, &v)| (vars[j], v))
            .collect();
        if terms.is_empty() {
            if rhs < 0.0 {
                return Ok(LpOutcome::without_solution(LpStatus::Infeasible));
            }
            continue;
        }
        problem.add_constraint(terms.as_slice(), ComparisonOp::Le, rhs);
    }
    match problem.solve() {
        Ok(outcome) => {
            let solution = outcome.into_solution().map_err(|e| Error::Lp {
                row: None,
                detail: format!("interrupted: {:?}", e.termination_reason()),
            })?;
            let point = vars.iter().map(|&v| solution.var_value_raw(v)).collect();
            Ok(LpOutcome {
                status: LpStatus::Optimal,
                value: solution.objective(),
                point,
            })
        }
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::without_solution(LpStatus::Infeasible)),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::without_solution(LpStatus::Unbounded)),
        Err(e) => Err(Error::Lp {
            row: None,
            detail: e.to_string(),
        }),
    }
}

/// Optimal value of `max c·x s.t. A x ≤ b`, without a maximizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Value {
    Finite(f64),
    Unbounded,
    Infeasible,
}

/// Like [`maximize`] but only the optimal value is computed, through the
/// dual `min bᵀλ s.t. Aᵀλ = c, λ ≥ 0`. The dual has one row per column of
/// `A`, which is much cheaper when `A` is tall. An infeasible dual leaves
/// the primal either unbounded or infeasible; that case is settled by the
/// primal solver.
pub fn max_value(c: &[f64], a: &[f64], b: &[f64]) -> Result<Value> {
    let n = c.len();
    debug_assert_eq!(a.len(), n * b.len());
    let primal = || -> Result<Value> {
        let out = maximize(c, a, b, None)?;
        Ok(match out.status {
            LpStatus::Optimal => Value::Finite(out.value),
            LpStatus::Unbounded => Value::Unbounded,
            LpStatus::Infeasible => Value::Infeasible,
        })
    };
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let lambda: Vec<_> = b.iter().map(|&bi| problem.add_var(bi, (0.0, f64::INFINITY))).collect();
    for j in 0..n {
        let terms: Vec<_> = (0..b.len())
            .filter(|&i| a[i * n + j] != 0.0)
            .map(|i| (lambda[i], a[i * n + j]))
            .collect();
        if terms.is_empty() {
            if c[j] != 0.0 {
                return primal();
            }
            continue;
        }
        problem.add_constraint(terms.as_slice(), ComparisonOp::Eq, c[j]);
    }
    if b.is_empty() {
        return primal();
    }
    match problem.solve() {
        Ok(outcome) => {
            let solution = outcome.into_solution().map_err(|e| Error::Lp {
                row: None,
                detail: format!("interrupted: {:?}", e.termination_reason()),
            })?;
            Ok(Value::Finite(solution.objective()))
        }
        Err(microlp::Error::Unbounded) => Ok(Value::Infeasible),
        Err(microlp::Error::Infeasible) => primal(),
        Err(e) => Err(Error::Lp {
            row: None,
            detail: e.to_string(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_maximum() {
        // x ≤ 1, y ≤ 2, -x ≤ 0, -y ≤ 0
        let a = [1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0];
        let b = [1.0, 2.0, 0.0, 0.0];
        let out = maximize(&[1.0, 1.0], &a, &b, None).unwrap();
        assert_eq!(out.status, LpStatus::Optimal);
        assert!((out.value - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let out = maximize(&[1.0], &[1.0, -1.0], &[0.0, -1.0], None).unwrap();
        assert_eq!(out.status, LpStatus::Infeasible);
        let out = maximize(&[1.0], &[-1.0], &[0.0], None).unwrap();
        assert_eq!(out.status, LpStatus::Unbounded);
    }

    #[test]
    fn dual_value_matches_primal() {
        let a = [1.0, 0.0, 0.0, 1.0, -1.0, 0.0, 0.0, -1.0, 1.0, 1.0];
        let b = [1.0, 2.0, 0.0, 0.0, 2.5];
        for c in [[1.0, 1.0], [1.0, -1.0], [-2.0, 0.5], [0.0, 0.0]] {
            let Value::Finite(v) = max_value(&c, &a, &b).unwrap() else {
                panic!("bounded")
            };
            assert!((v - maximize(&c, &a, &b, None).unwrap().value).abs() < 1e-9);
        }
        assert_eq!(max_value(&[1.0], &[-1.0], &[0.0]).unwrap(), Value::Unbounded);
        assert_eq!(max_value(&[1.0], &[1.0, -1.0], &[0.0, -1.0]).unwrap(), Value::Infeasible);
        assert_eq!(max_value(&[0.0], &[1.0, -1.0], &[0.0, -1.0]).unwrap(), Value::Infeasible);
        assert_eq!(max_value(&[1.0, 0.0], &[1.0, 0.0], &[3.0]).unwrap(), Value::Finite(3.0));
        assert_eq!(max_value(&[0.0, 1.0], &[1.0, 0.0], &[3.0]).unwrap(), Value::Unbounded);
    }
}
