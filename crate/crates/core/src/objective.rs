//! Reduced cost `a ↦ J(a)` of the boundary control problem and its adjoint
//! gradient.
//!
//! ```text
//! J(a) = ∫ (1 − H_β(y)) + (1/ε) ∫_{Ω0} (y − ψ)² + (γ/2) Σ_k [(a_k − u_max)₊² + (u_min − a_k)₊²]
//! ```
//!
//! where `y` solves the obstacle problem with boundary trace `u_a`. Both
//! integrals use the edge-midpoint rule on the P1 fields, and the gradient
//! differentiates that discrete functional exactly.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::control::{control_jacobian, control_trace, ControlVector};
use crate::error::{Error, Result};
use crate::fem::DiscreteObstacleProblem;
use crate::obstacle::{solve_obstacle_factored, SolverOptions, StateSolution};
use crate::sparse::MaskedFactor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub beta: f64,
    pub eps: f64,
    pub gamma: f64,
    pub u_min: f64,
    pub u_max: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        Self {
            beta: 1e-3,
            eps: 1e-3,
            gamma: 1e-3,
            u_min: 0.01,
            u_max: 10.0,
        }
    }
}

impl ObjectiveConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta > 0.0
            && self.eps > 0.0
            && self.gamma >= 0.0
            && self.u_min < self.u_max
            && [self.beta, self.eps, self.gamma, self.u_min, self.u_max]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "objective needs beta > 0, eps > 0, gamma >= 0, u_min < u_max; got {self:?}"
            )))
        }
    }
}

/// `H_β(x) = ½tanh(x/β) + ½` and its derivative.
///
/// Evaluated as a logistic function of `2x/β` so that both tails saturate
/// to exactly 0 or 1 and the derivative underflows to 0 instead of
/// overflowing.
pub fn heaviside_smooth(x: f64, beta: f64) -> (f64, f64) {
    let z = x / beta;
    if z == 0.0 {
        return (0.5, 0.5 / beta);
    }
    let e = (-2.0 * z.abs()).exp();
    let value = if z > 0.0 { 1.0 / (1.0 + e) } else { e / (1.0 + e) };
    // sech²(z) = 4e / (1 + e)²
    let deriv = 2.0 * e / ((1.0 + e) * (1.0 + e) * beta);
    (value, deriv)
}

/// Area and contact terms of the state `q` and their gradient with respect
/// to the nodal values.
pub fn state_functional(
    problem: &DiscreteObstacleProblem,
    cfg: &ObjectiveConfig,
    q: &[f64],
) -> (f64, f64, Vec<f64>) {
    let mesh = &problem.mesh;
    let psi = &problem.obstacle;
    let mut area = 0.0;
    let mut contact = 0.0;
    let mut grad = vec![0.0; q.len()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let w = mesh.area(t) / 3.0;
        let in_omega0 = mesh.omega0_triangles[t];
        for m in 0..3 {
            let (i, j) = (tri[m], tri[(m + 1) % 3]);
            let y = 0.5 * (q[i] + q[j]);
            let (h, dh) = heaviside_smooth(y, cfg.beta);
            area += w * (1.0 - h);
            let mut dy = -w * dh;
            if in_omega0 {
                let gap = y - 0.5 * (psi[i] + psi[j]);
                contact += w * gap * gap / cfg.eps;
                dy += 2.0 * w * gap / cfg.eps;
            }
            grad[i] += 0.5 * dy;
            grad[j] += 0.5 * dy;
        }
    }
    (area, contact, grad)
}

/// Box penalty on the control coefficients and its gradient.
pub fn box_penalty(a: &[f64], cfg: &ObjectiveConfig) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let grad = a
        .iter()
        .map(|&ak| {
            let over = (ak - cfg.u_max).max(0.0);
            let under = (cfg.u_min - ak).max(0.0);
            value += 0.5 * cfg.gamma * (over * over + under * under);
            cfg.gamma * (over - under)
        })
        .collect();
    (value, grad)
}

/// One evaluation of the reduced cost.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub value: f64,
    pub area_term: f64,
    pub contact_term: f64,
    pub box_term: f64,
    pub grad: Vec<f64>,
    pub state: StateSolution,
    pub feval_index: usize,
}

impl EvalRecord {
    pub fn grad_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Row of the per-evaluation log, matching [`EVAL_LOG_HEADER`].
    pub fn log_line(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{}",
            self.feval_index,
            self.value,
            self.area_term,
            self.contact_term,
            self.box_term,
            self.grad_norm(),
            self.state.contact_set.len()
        )
    }
}

pub const EVAL_LOG_HEADER: &str = "feval,J,area_term,contact_term,box_term,grad_norm,n_contact";

/// Adjoint gradient `Bᵀ(g_D − K_DF p) + ∇box` with `K_FF p = g_F`, where
/// `g = ∂J/∂q` and `factor` is the masked factorization with the boundary
/// and contact nodes fixed.
fn adjoint_gradient(
    ctrl: &ControlVector,
    problem: &DiscreteObstacleProblem,
    cfg: &ObjectiveConfig,
    dj_dq: &[f64],
    factor: &MaskedFactor,
) -> Vec<f64> {
    let fixed = factor.fixed();
    let mut p: Vec<f64> = dj_dq.iter().zip(fixed).map(|(&g, &x)| if x { 0.0 } else { g }).collect();
    factor.solve_in_place(&mut p);
    for (pi, &x) in p.iter_mut().zip(fixed) {
        if x {
            *pi = 0.0;
        }
    }
    let kp = problem.stiffness.matvec(&p);
    let dj_du: Vec<f64> = problem.dirichlet.iter().map(|&(i, _)| dj_dq[i] - kp[i]).collect();
    let jac = control_jacobian(ctrl, &problem.boundary_thetas());
    let mut grad = jac.transpose_mul(&dj_du);
    let (_, box_grad) = box_penalty(ctrl.values(), cfg);
    for (g, b) in grad.iter_mut().zip(box_grad) {
        *g += b;
    }
    grad
}

/// Solves the state for control `ctrl` and returns the cost, its parts and
/// the adjoint gradient for the resulting contact set.
pub fn evaluate(
    ctrl: &ControlVector,
    problem: &DiscreteObstacleProblem,
    cfg: &ObjectiveConfig,
    warm_start: Option<&[usize]>,
) -> Result<EvalRecord> {
    cfg.validate()?;
    let u_d = control_trace(ctrl, &problem.boundary_thetas());
    let (state, factor) =
        solve_obstacle_factored(problem, &u_d, warm_start, &SolverOptions::default())?;
    let (area_term, contact_term, dj_dq) = state_functional(problem, cfg, &state.q);
    let (box_term, _) = box_penalty(ctrl.values(), cfg);
    let grad = adjoint_gradient(ctrl, problem, cfg, &dj_dq, &factor);
    Ok(EvalRecord {
        value: area_term + contact_term + box_term,
        area_term,
        contact_term,
        box_term,
        grad,
        state,
        feval_index: 0,
    })
}

/// Adjoint gradient at a solved state, freezing its contact set. At controls
/// where the contact set changes this is one element of the generalized
/// gradient.
pub fn gradient(
    ctrl: &ControlVector,
    problem: &DiscreteObstacleProblem,
    cfg: &ObjectiveConfig,
    state: &StateSolution,
) -> Result<Vec<f64>> {
    let mut fixed = problem.boundary_mask().to_vec();
    for &i in &state.contact_set {
        fixed[i] = true;
    }
    let factor = problem.cholesky().factor(&problem.stiffness, &fixed)?;
    let (_, _, dj_dq) = state_functional(problem, cfg, &state.q);
    Ok(adjoint_gradient(ctrl, problem, cfg, &dj_dq, &factor))
}

/// Reduced cost as a callback for the optimizer: counts evaluations, warm
/// starts each state solve from the previous contact set and keeps the
/// per-evaluation log.
#[derive(Debug)]
pub struct ReducedObjective<'a> {
    pub problem: &'a DiscreteObstacleProblem,
    pub config: ObjectiveConfig,
    template: ControlVector,
    fevals: AtomicUsize,
    warm_start: Mutex<Option<Vec<usize>>>,
    log: Mutex<Vec<String>>,
}

impl<'a> ReducedObjective<'a> {
    pub fn new(problem: &'a DiscreteObstacleProblem, config: ObjectiveConfig, n: usize) -> Result<Self> {
        config.validate()?;
        let template = ControlVector::constant(n, 1.0, config.u_min, config.u_max)?;
        Ok(Self {
            problem,
            config,
            template,
            fevals: AtomicUsize::new(0),
            warm_start: Mutex::new(None),
            log: Mutex::new(Vec::new()),
        })
    }

    pub fn n(&self) -> usize {
        self.template.n()
    }

    pub fn fevals(&self) -> usize {
        self.fevals.load(Ordering::SeqCst)
    }

    pub fn control(&self, a: &[f64]) -> Result<ControlVector> {
        self.template.with_values(a.to_vec())
    }

    pub fn evaluate(&self, a: &[f64]) -> Result<EvalRecord> {
        let ctrl = self.control(a)?;
        let warm = self.warm_start.lock().expect("warm start lock").clone();
        let mut record = evaluate(&ctrl, self.problem, &self.config, warm.as_deref())?;
        record.feval_index = self.fevals.fetch_add(1, Ordering::SeqCst) + 1;
        *self.warm_start.lock().expect("warm start lock") = Some(record.state.contact_set.clone());
        self.log.lock().expect("log lock").push(record.log_line());
        Ok(record)
    }

    /// Per-evaluation log as CSV text with header.
    pub fn log_csv(&self) -> String {
        let mut out = String::from(EVAL_LOG_HEADER);
        out.push('\n');
        for line in self.log.lock().expect("log lock").iter() {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}
