//! The slow planner: footstep positions and durations optimized jointly,
//! with the pendulum discretized by six RK4 substeps per footstep.
//!
//! The nonlinear program is solved by a small dense SQP loop. Derivatives
//! come from finite differences of the rollout (seven variables, so this is
//! cheap), the Hessian of the Lagrangian is regularized until positive
//! definite, and steps are globalized with an l1 merit line search inside a
//! box trust region. Subproblems go to [`crate::qp::solve_qp`]; when the
//! linearized constraints are inconsistent an elastic variant with l1 slack
//! is solved instead.

use std::time::Instant;

use crate::lip::{ComState, Propagator};
use crate::problem::{
    cost, hard_constraints, max_violation, nominal_plan, penalty_parameters, rollout,
    visit_constraints, ConstraintId, FootstepPlan, PlanSource, PlanningProblem, PlanningState,
    Reference,
};
use crate::qp::{cholesky, solve_qp};
use crate::warm_start::{warm_start_plan, WarmStart};

/// A smooth NLP `min f(z) s.t. c(z) <= 0`.
pub trait NlpModel {
    fn dimension(&self) -> usize;
    fn constraint_count(&self) -> usize;
    /// Objective and constraint values, or `None` if the point is not
    /// evaluable (non-finite rollout).
    fn evaluate(&self, z: &[f64]) -> Option<(f64, Vec<f64>)>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqpSettings {
    pub max_iterations: usize,
    pub feasibility_tol: f64,
    pub optimality_tol: f64,
    /// Leg-reach constraints are tightened by this much (m) inside the
    /// solver so that plans stay feasible under the exact dynamics too.
    pub reach_margin: f64,
    /// Every constraint except a relaxed `d0 >= 0` is also tightened by this many of
    /// its penalty scales, so solutions sit where the descent's penalized
    /// cost is close to its own minimum.
    pub margin_scales: f64,
    pub initial_box: f64,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            feasibility_tol: 1e-6,
            optimality_tol: 1e-6,
            reach_margin: 0.005,
            margin_scales: 6.0,
            initial_box: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpOutcome {
    pub z: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, objective, max residual)` per iterate.
    pub history: Vec<(usize, f64, f64)>,
}

fn fd_step(v: f64) -> f64 {
    1e-6 * v.abs().max(1.0)
}

fn violation(c: &[f64]) -> f64 {
    c.iter().fold(0.0f64, |m, &v| m.max(v))
}

fn l1_violation(c: &[f64]) -> f64 {
    c.iter().map(|&v| v.max(0.0)).sum()
}

struct Linearization {
    f: f64,
    c: Vec<f64>,
    grad: Vec<f64>,
    /// `m x n` row-major.
    jac: Vec<f64>,
}

fn linearize<M: NlpModel + ?Sized>(model: &M, z: &[f64]) -> Option<Linearization> {
    let n = model.dimension();
    let m = model.constraint_count();
    let (f, c) = model.evaluate(z)?;
    let mut grad = vec![0.0; n];
    let mut jac = vec![0.0; m * n];
    let mut zp = z.to_vec();
    for i in 0..n {
        let h = fd_step(z[i]);
        zp[i] = z[i] + h;
        let (fp, cp) = model.evaluate(&zp)?;
        zp[i] = z[i] - h;
        let (fm, cm) = model.evaluate(&zp)?;
        zp[i] = z[i];
        grad[i] = (fp - fm) / (2.0 * h);
        for r in 0..m {
            jac[r * n + i] = (cp[r] - cm[r]) / (2.0 * h);
        }
    }
    Some(Linearization { f, c, grad, jac })
}

/// Hessian of `f + lambda' c` by second-order central differences.
fn lagrangian_hessian<M: NlpModel + ?Sized>(
    model: &M,
    z: &[f64],
    lambda: &[f64],
) -> Option<Vec<f64>> {
    let n = model.dimension();
    let lag = |p: &[f64]| -> Option<f64> {
        let (f, c) = model.evaluate(p)?;
        Some(f + lambda.iter().zip(&c).map(|(l, v)| l * v).sum::<f64>())
    };
    let l0 = lag(z)?;
    let hs: Vec<f64> = z.iter().map(|v| 1e-4 * v.abs().max(1.0)).collect();
    let mut h = vec![0.0; n * n];
    let mut p = z.to_vec();
    for i in 0..n {
        p[i] = z[i] + hs[i];
        let lp = lag(&p)?;
        p[i] = z[i] - hs[i];
        let lm = lag(&p)?;
        p[i] = z[i];
        h[i * n + i] = (lp - 2.0 * l0 + lm) / (hs[i] * hs[i]);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| -> Option<f64> {
                p[i] = z[i] + si * hs[i];
                p[j] = z[j] + sj * hs[j];
                let v = lag(&p);
                p[i] = z[i];
                p[j] = z[j];
                v
            };
            let v = (corner(1.0, 1.0)? - corner(1.0, -1.0)? - corner(-1.0, 1.0)?
                + corner(-1.0, -1.0)?)
                / (4.0 * hs[i] * hs[j]);
            h[i * n + j] = v;
            h[j * n + i] = v;
        }
    }
    Some(h)
}

/// Adds a multiple of the identity until the matrix factors.
fn make_positive_definite(h: &mut [f64], n: usize) {
    let scale = (0..n).map(|i| h[i * n + i].abs()).fold(1.0f64, f64::max);
    let mut tau = 0.0;
    loop {
        let mut trial = h.to_vec();
        for i in 0..n {
            trial[i * n + i] += tau;
        }
        // Require a comfortably positive smallest pivot.
        if let Some(l) = cholesky(&trial, n) {
            let min_pivot = (0..n).map(|i| l[i * n + i]).fold(f64::INFINITY, f64::min);
            if min_pivot * min_pivot > 1e-8 * scale {
                h.copy_from_slice(&trial);
                return;
            }
        }
        tau = if tau == 0.0 { 1e-6 * scale } else { tau * 10.0 };
    }
}

/// Solves the SQP subproblem inside a box of half-width `radius`. Returns the
/// step and the multipliers of the linearized constraints.
fn subproblem(
    lin: &Linearization,
    b: &[f64],
    n: usize,
    radius: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let m = lin.c.len();
    // Plain QP: J d <= -c, |d_i| <= radius.
    let mut a = Vec::with_capacity((m + 2 * n) * n);
    let mut rhs = Vec::with_capacity(m + 2 * n);
    a.extend_from_slice(&lin.jac);
    rhs.extend(lin.c.iter().map(|v| -v));
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = 1.0;
        a.extend_from_slice(&row);
        rhs.push(radius);
        row[i] = -1.0;
        a.extend_from_slice(&row);
        rhs.push(radius);
    }
    if let Ok(sol) = solve_qp(b, &lin.grad, &a, &rhs) {
        return Some((sol.x, sol.multipliers[..m].to_vec()));
    }

    // Elastic: variables (d, t), J d - t <= -c, t >= 0.
    let rho = 1e4;
    let dim = n + m;
    let mut h = vec![0.0; dim * dim];
    for i in 0..n {
        h[i * dim..i * dim + n].copy_from_slice(&b[i * n..(i + 1) * n]);
    }
    for k in 0..m {
        h[(n + k) * dim + n + k] = 1e-6;
    }
    let mut g = lin.grad.clone();
    g.extend(std::iter::repeat(rho).take(m));
    let rows = m + m + 2 * n;
    let mut a = vec![0.0; rows * dim];
    let mut rhs = vec![0.0; rows];
    for r in 0..m {
        a[r * dim..r * dim + n].copy_from_slice(&lin.jac[r * n..(r + 1) * n]);
        a[r * dim + n + r] = -1.0;
        rhs[r] = -lin.c[r];
        a[(m + r) * dim + n + r] = -1.0;
    }
    for i in 0..n {
        let r = 2 * m + 2 * i;
        a[r * dim + i] = 1.0;
        rhs[r] = radius;
        a[(r + 1) * dim + i] = -1.0;
        rhs[r + 1] = radius;
    }
    let sol = solve_qp(&h, &g, &a, &rhs).ok()?;
    Some((sol.x[..n].to_vec(), sol.multipliers[..m].to_vec()))
}

/// Runs SQP from `z0`. `accept` decides whether an iterate may be returned
/// as the answer (the caller's own feasibility notion); the lowest-objective
/// accepted iterate wins, otherwise the final iterate is returned.
pub fn sqp<M: NlpModel + ?Sized>(
    model: &M,
    z0: &[f64],
    settings: &SqpSettings,
    mut accept: impl FnMut(&[f64]) -> bool,
) -> Option<SqpOutcome> {
    let n = model.dimension();
    let m = model.constraint_count();
    let mut z = z0.to_vec();
    let mut lambda = vec![0.0; m];
    let mut mu = 10.0_f64;
    let mut radius = settings.initial_box;
    let mut history = Vec::new();
    let mut best: Option<(f64, Vec<f64>, f64)> = None;
    let mut converged = false;
    let mut iterations = 0;
    let mut last = linearize(model, &z)?;

    for it in 0..settings.max_iterations {
        iterations = it + 1;
        let lin = &last;
        let viol = violation(&lin.c);
        history.push((it, lin.f, viol));
        if accept(&z) && best.as_ref().map_or(true, |(f, _, _)| lin.f < *f) {
            best = Some((lin.f, z.clone(), viol));
        }

        let mut b = lagrangian_hessian(model, &z, &lambda)?;
        make_positive_definite(&mut b, n);
        let (d, lam_qp) = subproblem(lin, &b, n, radius)?;

        // KKT check at the current point.
        let bd: Vec<f64> = (0..n)
            .map(|i| (0..n).map(|k| b[i * n + k] * d[k]).sum())
            .collect();
        let stationarity = bd.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        let complementarity: f64 = lam_qp.iter().zip(&lin.c).map(|(l, c)| (l * c).abs()).sum();
        let step_inf = d.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        if viol <= settings.feasibility_tol
            && ((stationarity <= settings.optimality_tol
                && complementarity <= settings.optimality_tol)
                || step_inf <= 1e-12)
        {
            converged = true;
            lambda = lam_qp;
            break;
        }

        // l1 merit line search.
        let lam_max = lam_qp.iter().fold(0.0f64, |mx, v| mx.max(v.abs()));
        mu = mu.max(1.5 * lam_max + 1.0);
        let phi0 = lin.f + mu * l1_violation(&lin.c);
        let gd: f64 = lin.grad.iter().zip(&d).map(|(g, s)| g * s).sum();
        let lin_c: Vec<f64> = (0..m)
            .map(|r| lin.c[r] + (0..n).map(|i| lin.jac[r * n + i] * d[i]).sum::<f64>())
            .collect();
        let predicted = gd + mu * (l1_violation(&lin_c) - l1_violation(&lin.c));
        let slope = predicted.min(-1e-16);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-10 {
            let trial: Vec<f64> = z.iter().zip(&d).map(|(a, s)| a + alpha * s).collect();
            if let Some((ft, ct)) = model.evaluate(&trial) {
                let phi = ft + mu * l1_violation(&ct);
                if phi <= phi0 + 1e-4 * alpha * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }
        lambda = lam_qp;
        match accepted {
            Some(next) => {
                if alpha == 1.0 && step_inf >= 0.99 * radius {
                    radius = (radius * 2.0).min(2.0);
                }
                let Some(l) = linearize(model, &next) else {
                    return None;
                };
                z = next;
                last = l;
            }
            None => {
                radius *= 0.25;
                if radius < 1e-12 {
                    break;
                }
            }
        }
    }

    let final_viol = violation(&last.c);
    if converged {
        history.push((iterations, last.f, final_viol));
    }
    if accept(&z) && best.as_ref().map_or(true, |(f, _, _)| last.f <= *f) {
        best = Some((last.f, z.clone(), final_viol));
    }
    let _ = lambda;
    Some(match best {
        Some((f, zb, v)) => SqpOutcome {
            converged: converged && zb == z,
            z: zb,
            objective: f,
            max_violation: v,
            iterations,
            history,
        },
        None => SqpOutcome {
            z,
            objective: last.f,
            max_violation: final_viol,
            iterations,
            converged: false,
            history,
        },
    })
}

/// The footstep NLP seen by the SQP loop.
pub struct FootstepNlp<'a> {
    pub template: &'a FootstepPlan,
    pub state: &'a PlanningState,
    pub reference: &'a Reference,
    pub problem: &'a PlanningProblem,
    pub propagator: Propagator,
    pub reach_margin: f64,
    pub margin_scales: f64,
}

impl NlpModel for FootstepNlp<'_> {
    fn dimension(&self) -> usize {
        self.problem.dimension()
    }

    fn constraint_count(&self) -> usize {
        self.problem.constraint_count()
    }

    fn evaluate(&self, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        let plan = self.template.with_decision_vector(z);
        let b = rollout(&plan, self.state, &self.problem.lip, self.propagator);
        if !b.iter().all(ComState::is_finite) {
            return None;
        }
        let p = self.problem;
        let f = b[1..]
            .iter()
            .map(|s| {
                let (ex, ey) = (s.vx - self.reference.vx, s.vy - self.reference.vy);
                p.weights.wx * ex * ex + p.weights.wy * ey * ey
            })
            .sum();
        let mut c = Vec::with_capacity(p.constraint_count());
        visit_constraints(&plan, self.state, &b, &p.constraints, |id, r| {
            let scaled = self.margin_scales
                * penalty_parameters(id, &p.constraints, self.state.time_in_step).1;
            let tightened = match id {
                ConstraintId::ReachAtTouchdown(_) | ConstraintId::ReachAtLiftoff(_) => {
                    r + scaled.max(self.reach_margin)
                }
                // Ending the step now must stay possible.
                ConstraintId::DurationLower(0)
                    if p.constraints.duration_lower(0, self.state.time_in_step) == 0.0 =>
                {
                    r
                }
                _ => r + scaled,
            };
            c.push(tightened);
        });
        Some((f, c))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NlpSolution {
    pub plan: FootstepPlan,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Wall-clock seconds spent in the solve.
    pub solve_time: f64,
    /// `(iteration, objective, max residual)` per iterate.
    pub history: Vec<(usize, f64, f64)>,
}

/// A plan may be handed out only if it satisfies the hard constraints under
/// both the solver's dynamics and the exact dynamics.
pub fn plan_is_feasible(
    plan: &FootstepPlan,
    state: &PlanningState,
    problem: &PlanningProblem,
    tol: f64,
) -> bool {
    plan.is_finite()
        && max_violation(&hard_constraints(plan, state, problem, Propagator::RK4_6)) <= tol
        && max_violation(&hard_constraints(plan, state, problem, Propagator::Exact)) <= tol
}

/// Nominal stepping-in-place guess used when no usable warm start exists.
pub fn default_guess(
    state: &PlanningState,
    problem: &PlanningProblem,
    half_width: f64,
) -> FootstepPlan {
    let nominal = 0.5 * (problem.constraints.t_lower + problem.constraints.t_upper);
    nominal_plan(state, problem, half_width, nominal)
}

/// Solves from an explicit initial plan with the given dynamics.
pub fn solve_from(
    initial: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    propagator: Propagator,
    settings: &SqpSettings,
) -> Option<NlpSolution> {
    let started = Instant::now();
    let model = FootstepNlp {
        template: initial,
        state,
        reference,
        problem,
        propagator,
        reach_margin: settings.reach_margin,
        margin_scales: settings.margin_scales,
    };
    let tol = settings.feasibility_tol;
    let out = sqp(&model, &initial.decision_vector(), settings, |z| {
        plan_is_feasible(&initial.with_decision_vector(z), state, problem, tol)
    })?;
    let mut plan = initial.with_decision_vector(&out.z);
    plan.feasible = plan_is_feasible(&plan, state, problem, tol);
    let objective = cost(
        &plan,
        state,
        reference,
        &problem.weights,
        &problem.lip,
        propagator,
    )
    .ok()?;
    Some(NlpSolution {
        converged: out.converged && plan.feasible,
        plan,
        objective,
        iterations: out.iterations,
        solve_time: started.elapsed().as_secs_f64(),
        history: out.history,
    })
}

/// One RK4-optimizer solve, warm-started from the previous solution. Falls
/// back to (and restarts from) the nominal plan if the warm start is unusable
/// or the iteration produces non-finite values.
pub fn solve(
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    warm: Option<&WarmStart>,
    half_width: f64,
    settings: &SqpSettings,
) -> NlpSolution {
    let started = Instant::now();
    let mut guess = warm
        .filter(|w| w.previous.check_shape(problem.horizon).is_ok() && w.previous.is_finite())
        .map(|w| warm_start_plan(w, state.foot).plan)
        .unwrap_or_else(|| default_guess(state, problem, half_width));
    guess.stance = state.stance;
    guess.source = PlanSource::Rk4;

    let first = solve_from(
        &guess,
        state,
        reference,
        problem,
        Propagator::RK4_6,
        settings,
    );
    let mut sol = match first {
        Some(s) if s.plan.feasible => s,
        other => {
            let restart = default_guess(state, problem, half_width);
            match solve_from(
                &restart,
                state,
                reference,
                problem,
                Propagator::RK4_6,
                settings,
            ) {
                Some(s) if s.plan.feasible || other.is_none() => s,
                Some(s) => match other {
                    Some(o) if o.plan.is_finite() => o,
                    _ => s,
                },
                None => other.unwrap_or_else(|| NlpSolution {
                    plan: FootstepPlan {
                        feasible: false,
                        ..restart
                    },
                    objective: f64::INFINITY,
                    iterations: 0,
                    converged: false,
                    solve_time: 0.0,
                    history: Vec::new(),
                }),
            }
        }
    };
    sol.plan.source = PlanSource::Rk4;
    sol.solve_time = started.elapsed().as_secs_f64();
    sol
}
