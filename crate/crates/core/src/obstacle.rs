//! Solvers for the discrete obstacle problem
//!
//! ```text
//! minimize ½ qᵀKq − fᵀq  subject to  q_i = u_i on the boundary,
//!                                    q_i ≥ ψ_i at interior nodes.
//! ```
//!
//! [`solve_obstacle`] is a primal-dual active-set method with direct sparse
//! solves; [`psor_oracle`] is projected SOR, kept as an independent check.

use std::collections::HashSet;

use crate::error::{Error, ObstacleSolveError, Result, SolveFailure};
use crate::fem::DiscreteObstacleProblem;
use crate::sparse::MaskedFactor;

/// Tolerances and limits of the active-set iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Residual tolerance, relative to [`kkt_scale`].
    pub tol_r: f64,
    /// Contact tolerance, relative to `max(1, |ψ_i|)`.
    pub tol_c: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            tol_r: 1e-10,
            tol_c: 1e-12,
        }
    }
}

/// Discrete state with its contact set and multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSolution {
    pub q: Vec<f64>,
    /// Sorted interior nodes held at the obstacle.
    pub contact_set: Vec<usize>,
    /// `(Kq − f)_i` at interior nodes, zero on the boundary.
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// Largest scaled violation of stationarity and dual feasibility.
    pub kkt_residual: f64,
    /// Energy and primal feasibility of every iterate.
    pub energy_history: Vec<(f64, bool)>,
}

/// Scale for the residual tolerance: `max(1, ‖f‖∞, ‖K‖∞‖q‖∞)`.
pub fn kkt_scale(problem: &DiscreteObstacleProblem, q: &[f64]) -> f64 {
    let f_inf = problem.load.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let q_inf = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    1f64.max(f_inf).max(problem.stiffness.inf_norm() * q_inf)
}

/// Interior nodes with `q_i − ψ_i ≤ tol_c·max(1, |ψ_i|)`.
pub fn contact_set(problem: &DiscreteObstacleProblem, q: &[f64], tol_c: f64) -> Vec<usize> {
    let boundary = problem.boundary_mask();
    (0..problem.num_nodes())
        .filter(|&i| {
            let psi = problem.obstacle[i];
            !boundary[i] && q[i] - psi <= tol_c * psi.abs().max(1.0)
        })
        .collect()
}

fn primal_feasible(problem: &DiscreteObstacleProblem, q: &[f64], tol_c: f64) -> bool {
    let boundary = problem.boundary_mask();
    (0..problem.num_nodes()).all(|i| {
        let psi = problem.obstacle[i];
        boundary[i] || q[i] >= psi - tol_c * psi.abs().max(1.0)
    })
}

/// Multipliers and the scaled residual of `q`: stationarity off the contact
/// set, dual feasibility on it. Complementarity follows because contact
/// nodes sit on the obstacle.
fn kkt(problem: &DiscreteObstacleProblem, q: &[f64], in_contact: &[bool]) -> (Vec<f64>, f64) {
    let boundary = problem.boundary_mask();
    let mut lambda = problem.residual(q);
    let scale = kkt_scale(problem, q);
    let mut worst = 0.0_f64;
    for i in 0..q.len() {
        if boundary[i] {
            lambda[i] = 0.0;
            continue;
        }
        let l = lambda[i];
        let violation = if in_contact[i] { (-l).max(0.0) } else { l.abs() };
        worst = worst.max(violation);
    }
    (lambda, worst / scale)
}

impl StateSolution {
    /// Checks every KKT condition at the given tolerances. The
    /// complementarity bound is scaled by `max(1, |ψ_i|)` like the contact
    /// tolerance, so that a far-away obstacle does not amplify rounding in
    /// the multiplier.
    pub fn check_kkt(
        &self,
        problem: &DiscreteObstacleProblem,
        u_d: &[f64],
        tol_r: f64,
        tol_c: f64,
    ) -> std::result::Result<(), String> {
        let boundary = problem.boundary_mask();
        for (&(i, _), &u) in problem.dirichlet.iter().zip(u_d) {
            if self.q[i] != u {
                return Err(format!("boundary node {i}: q = {} but u = {u}", self.q[i]));
            }
        }
        let scale = kkt_scale(problem, &self.q);
        let r = problem.residual(&self.q);
        let mut in_contact = vec![false; self.q.len()];
        for &i in &self.contact_set {
            in_contact[i] = true;
        }
        for i in 0..self.q.len() {
            if boundary[i] {
                continue;
            }
            let psi = problem.obstacle[i];
            if self.q[i] < psi - tol_c {
                return Err(format!("node {i} below obstacle by {:e}", psi - self.q[i]));
            }
            if in_contact[i] {
                if r[i] < -tol_r * scale {
                    return Err(format!("node {i}: negative multiplier {:e}", r[i]));
                }
                if self.q[i] - psi > tol_c * psi.abs().max(1.0) {
                    return Err(format!("contact node {i} is off the obstacle"));
                }
            } else if r[i].abs() > tol_r * scale {
                return Err(format!("node {i}: stationarity residual {:e}", r[i]));
            }
            let product = r[i] * (self.q[i] - psi);
            if product > tol_r * scale * psi.abs().max(1.0) {
                return Err(format!("node {i}: complementarity {product:e}"));
            }
        }
        Ok(())
    }
}

/// Solves the obstacle problem with boundary values `u_d` (Dirichlet
/// order), optionally starting from a guessed contact set.
pub fn solve_obstacle(
    problem: &DiscreteObstacleProblem,
    u_d: &[f64],
    warm_start: Option<&[usize]>,
) -> Result<StateSolution> {
    solve_obstacle_factored(problem, u_d, warm_start, &SolverOptions::default()).map(|(s, _)| s)
}

/// Active-set solve returning also the Cholesky factor of the final masked
/// system, reusable for adjoint solves with the same contact set.
///
/// Each iteration solves the equality-constrained problem with `q = ψ` on
/// the current contact set, then moves every free node below the obstacle
/// into the set and every contact node with a negative multiplier out of it.
pub fn solve_obstacle_factored(
    problem: &DiscreteObstacleProblem,
    u_d: &[f64],
    warm_start: Option<&[usize]>,
    opts: &SolverOptions,
) -> Result<(StateSolution, MaskedFactor)> {
    if u_d.len() != problem.dirichlet.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} boundary values, got {}",
            problem.dirichlet.len(),
            u_d.len()
        )));
    }
    if u_d.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("boundary values must be finite".into()));
    }
    let n = problem.num_nodes();
    let boundary = problem.boundary_mask();
    let psi = &problem.obstacle;

    let mut in_contact = vec![false; n];
    for &i in warm_start.unwrap_or(&[]) {
        if i < n && !boundary[i] {
            in_contact[i] = true;
        }
    }
    let mut values = problem.scatter_boundary(u_d);
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut history = Vec::new();
    let mut last_q = Vec::new();
    let mut last_residual = f64::INFINITY;

    for iteration in 1..=opts.max_iter {
        let current: Vec<usize> = (0..n).filter(|&i| in_contact[i]).collect();
        seen.insert(current.clone());
        let fixed: Vec<bool> = (0..n).map(|i| boundary[i] || in_contact[i]).collect();
        for &i in &current {
            values[i] = psi[i];
        }
        let factor = problem.cholesky().factor(&problem.stiffness, &fixed)?;
        let q = factor.solve_dirichlet(&problem.stiffness, &problem.load, &values);
        let (lambda, residual) = kkt(problem, &q, &in_contact);
        history.push((problem.energy(&q), primal_feasible(problem, &q, opts.tol_c)));

        let scale = kkt_scale(problem, &q);
        let mut changed = false;
        for i in 0..n {
            if boundary[i] {
                continue;
            }
            if in_contact[i] {
                if lambda[i] < -opts.tol_r * scale {
                    in_contact[i] = false;
                    changed = true;
                }
            } else if q[i] < psi[i] - opts.tol_c * psi[i].abs().max(1.0) {
                in_contact[i] = true;
                changed = true;
            }
        }

        if !changed {
            if residual > opts.tol_r {
                return Err(ObstacleSolveError {
                    reason: SolveFailure::NotConverged,
                    iterations: iteration,
                    kkt_residual: residual,
                    last_iterate: q,
                }
                .into());
            }
            let solution = StateSolution {
                q,
                contact_set: current,
                lambda,
                iterations: iteration,
                kkt_residual: residual,
                energy_history: history,
            };
            return Ok((solution, factor));
        }

        let next: Vec<usize> = (0..n).filter(|&i| in_contact[i]).collect();
        if seen.contains(&next) {
            return Err(ObstacleSolveError {
                reason: SolveFailure::Cycling,
                iterations: iteration,
                kkt_residual: residual,
                last_iterate: q,
            }
            .into());
        }
        last_q = q;
        last_residual = residual;
    }
    Err(ObstacleSolveError {
        reason: SolveFailure::IterationCap,
        iterations: opts.max_iter,
        kkt_residual: last_residual,
        last_iterate: last_q,
    }
    .into())
}

/// Projected SOR: Gauss–Seidel sweeps over the interior nodes, each update
/// relaxed by `omega` and projected onto `q_i ≥ ψ_i`, until the largest
/// change in a sweep is at most `tol`.
pub fn psor_oracle(
    problem: &DiscreteObstacleProblem,
    u_d: &[f64],
    omega: f64,
    tol: f64,
    max_iter: usize,
) -> Result<StateSolution> {
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::InvalidInput(format!("relaxation must lie in (0, 2), got {omega}")));
    }
    if u_d.len() != problem.dirichlet.len() {
        return Err(Error::InvalidInput("wrong number of boundary values".into()));
    }
    let n = problem.num_nodes();
    let boundary = problem.boundary_mask();
    let k = &problem.stiffness;
    let psi = &problem.obstacle;
    let mut q = problem.scatter_boundary(u_d);
    for i in 0..n {
        if !boundary[i] {
            q[i] = psi[i].max(0.0);
        }
    }
    let interior: Vec<usize> = (0..n).filter(|&i| !boundary[i]).collect();
    let diag: Vec<f64> = (0..n).map(|i| k.diag(i)).collect();

    let mut sweeps = 0;
    loop {
        sweeps += 1;
        let mut change = 0.0_f64;
        for &i in &interior {
            let (cols, vals) = k.row(i);
            let mut sigma = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j != i {
                    sigma += v * q[j];
                }
            }
            let gs = (problem.load[i] - sigma) / diag[i];
            let updated = psi[i].max(q[i] + omega * (gs - q[i]));
            change = change.max((updated - q[i]).abs());
            q[i] = updated;
        }
        if change <= tol {
            break;
        }
        if sweeps >= max_iter {
            let contact: Vec<bool> = (0..n).map(|i| !boundary[i] && q[i] <= psi[i]).collect();
            let (_, residual) = kkt(problem, &q, &contact);
            return Err(ObstacleSolveError {
                reason: SolveFailure::IterationCap,
                iterations: sweeps,
                kkt_residual: residual,
                last_iterate: q,
            }
            .into());
        }
    }

    let opts = SolverOptions::default();
    let contact = contact_set(problem, &q, opts.tol_c);
    let mut in_contact = vec![false; n];
    for &i in &contact {
        in_contact[i] = true;
    }
    let (lambda, residual) = kkt(problem, &q, &in_contact);
    Ok(StateSolution {
        energy_history: vec![(problem.energy(&q), true)],
        q,
        contact_set: contact,
        lambda,
        iterations: sweeps,
        kkt_residual: residual,
    })
}
