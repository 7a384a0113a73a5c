//! Dense box-constrained quadratic programming.
//!
//! Minimizes `0.5 x' P x + q' x` subject to `lo <= x <= hi` with a
//! projected-Newton active-set iteration: variables pinned at a bound with
//! an outward-pushing gradient are frozen, a Newton step is taken on the
//! free block, and the result is projected back onto the box under an
//! Armijo line search. P must be symmetric positive semidefinite.

use nalgebra::{Cholesky, DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("infeasible box: lower bound {lo} exceeds upper bound {hi} at index {index}")]
    InfeasibleBox { index: usize, lo: f64, hi: f64 },
    #[error(
        "solver failed to reach tolerance {tolerance:.3e} within {iterations} iterations \
         (residual {residual:.3e})"
    )]
    SolverFailure {
        iterations: usize,
        tolerance: f64,
        residual: f64,
    },
}

#[derive(Debug, Clone)]
pub struct BoxQp {
    pub hessian: DMatrix<f64>,
    pub linear: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// `0.5 x' P x + q' x` at the solution.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Binding tolerance for active-set detection, relative to the box width.
const ACTIVE_EPS: f64 = 1e-12;

pub fn solve_box_qp(
    problem: &BoxQp,
    x0: Option<&DVector<f64>>,
    tolerance: f64,
    max_iterations: usize,
) -> Result<QpSolution, QpError> {
    let n = problem.linear.len();
    if problem.hessian.nrows() != n
        || problem.hessian.ncols() != n
        || problem.lower.len() != n
        || problem.upper.len() != n
    {
        return Err(QpError::DimensionMismatch(format!(
            "P is {}x{}, q/lo/hi have {}/{}/{} entries",
            problem.hessian.nrows(),
            problem.hessian.ncols(),
            n,
            problem.lower.len(),
            problem.upper.len()
        )));
    }
    for i in 0..n {
        if problem.lower[i] > problem.upper[i] {
            return Err(QpError::InfeasibleBox {
                index: i,
                lo: problem.lower[i],
                hi: problem.upper[i],
            });
        }
    }
    if n == 0 {
        return Ok(QpSolution {
            x: DVector::zeros(0),
            objective: 0.0,
            kkt_residual: 0.0,
            iterations: 0,
        });
    }

    let project = |x: &mut DVector<f64>| {
        for i in 0..n {
            x[i] = x[i].clamp(problem.lower[i], problem.upper[i]);
        }
    };
    let objective = |x: &DVector<f64>| 0.5 * (&problem.hessian * x).dot(x) + problem.linear.dot(x);

    let mut x = match x0 {
        Some(v) if v.len() == n => v.clone(),
        _ => DVector::zeros(n),
    };
    project(&mut x);

    let mut residual = f64::INFINITY;
    for iter in 0..max_iterations {
        let grad = &problem.hessian * &x + &problem.linear;

        // Fixed-point residual of the projected gradient map.
        residual = 0.0;
        for i in 0..n {
            let stepped = (x[i] - grad[i]).clamp(problem.lower[i], problem.upper[i]);
            residual = residual.max((x[i] - stepped).abs());
        }
        let scale = 1.0f64.max(grad.amax());
        if residual <= tolerance * scale {
            return Ok(QpSolution {
                objective: objective(&x),
                kkt_residual: residual,
                iterations: iter,
                x,
            });
        }

        let free: Vec<usize> = (0..n)
            .filter(|&i| {
                let width = (problem.upper[i] - problem.lower[i]).max(1.0);
                let at_lower = x[i] <= problem.lower[i] + ACTIVE_EPS * width;
                let at_upper = x[i] >= problem.upper[i] - ACTIVE_EPS * width;
                !(at_lower && grad[i] > 0.0 || at_upper && grad[i] < 0.0)
            })
            .collect();
        if free.is_empty() {
            // Every variable is pinned with an outward gradient; the
            // residual check above must have passed, so this is defensive.
            return Ok(QpSolution {
                objective: objective(&x),
                kkt_residual: residual,
                iterations: iter,
                x,
            });
        }

        let nf = free.len();
        let mut p_ff = DMatrix::<f64>::zeros(nf, nf);
        let mut g_f = DVector::<f64>::zeros(nf);
        for (a, &i) in free.iter().enumerate() {
            g_f[a] = grad[i];
            for (b, &j) in free.iter().enumerate() {
                p_ff[(a, b)] = problem.hessian[(i, j)];
            }
        }
        // Ridge for semidefinite blocks (zero-weight stages make P singular).
        let ridge = 1e-10 * p_ff.diagonal().amax().max(1.0);
        for a in 0..nf {
            p_ff[(a, a)] += ridge;
        }
        let direction_f = match Cholesky::new(p_ff) {
            Some(chol) => chol.solve(&(-&g_f)),
            None => -&g_f,
        };

        let mut direction = DVector::<f64>::zeros(n);
        for (a, &i) in free.iter().enumerate() {
            direction[i] = direction_f[a];
        }

        // Armijo search along the projection arc.
        let current = objective(&x);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let mut candidate = &x + alpha * &direction;
            project(&mut candidate);
            let delta = &candidate - &x;
            let decrease = grad.dot(&delta);
            if objective(&candidate) <= current + 1e-4 * decrease && decrease < 0.0 {
                x = candidate;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // No descent along the Newton arc; fall back to one projected
            // gradient step, which cannot increase the objective.
            let mut candidate = &x - &grad * (1.0 / scale.max(1.0));
            project(&mut candidate);
            if objective(&candidate) < current {
                x = candidate;
            }
        }
    }

    Err(QpError::SolverFailure {
        iterations: max_iterations,
        tolerance,
        residual,
    })
}
