//! The fast planner: gradient descent on the penalized cost using the
//! analytical gradient, with a backtracking Armijo line search.

use std::time::Instant;

use crate::gradient::gradient_with_value;
use crate::lip::Propagator;
use crate::nlp::NlpSolution;
use crate::problem::{
    cost, hard_constraints, max_violation, soft_cost, FootstepPlan, PlanSource, PlanningProblem,
    PlanningState, Reference,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentSettings {
    pub max_steps: usize,
    pub initial_step: f64,
    pub shrink: f64,
    pub armijo: f64,
    /// Line search gives up after this many halvings.
    pub max_backtracks: usize,
    /// Any gradient component above this rejects the gradient.
    pub grad_reject: f64,
    pub grad_tol: f64,
    pub feasibility_tol: f64,
}

impl Default for DescentSettings {
    fn default() -> Self {
        Self {
            max_steps: 100,
            initial_step: 0.01,
            shrink: 0.5,
            armijo: 1e-4,
            max_backtracks: 30,
            grad_reject: 1e3,
            grad_tol: 1e-6,
            feasibility_tol: 1e-6,
        }
    }
}

/// One row of the optional iterate trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentRecord {
    pub step: usize,
    pub tracking: f64,
    pub penalized: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Descent {
    pub solution: NlpSolution,
    /// The gradient at the starting plan was rejected; the plan is returned
    /// unchanged and marked infeasible.
    pub rejected: bool,
    pub records: Vec<DescentRecord>,
}

fn rejected(plan: &FootstepPlan, started: Instant) -> Descent {
    let mut plan = plan.clone();
    plan.feasible = false;
    plan.source = PlanSource::GradientDescent;
    Descent {
        solution: NlpSolution {
            plan,
            objective: f64::INFINITY,
            iterations: 0,
            converged: false,
            solve_time: started.elapsed().as_secs_f64(),
            history: Vec::new(),
        },
        rejected: true,
        records: Vec::new(),
    }
}

/// Runs up to `settings.max_steps` descent steps from `plan`.
pub fn descend(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    settings: &DescentSettings,
) -> Descent {
    let started = Instant::now();
    if plan.check_shape(problem.horizon).is_err() || !plan.is_finite() {
        return rejected(plan, started);
    }
    let Ok((mut value, mut grad)) =
        gradient_with_value(plan, state, reference, problem, settings.grad_reject)
    else {
        return rejected(plan, started);
    };
    if !grad.valid {
        return rejected(plan, started);
    }

    let mut z = plan.decision_vector();
    let mut g = grad.to_vector();
    let mut records = vec![DescentRecord {
        step: 0,
        tracking: value.tracking,
        penalized: value.value,
        grad_norm: grad.norm(),
    }];
    let mut steps = 0;
    let mut converged = false;
    let mut trial = plan.clone();

    while steps < settings.max_steps {
        let g2: f64 = g.iter().map(|v| v * v).sum();
        if g2.sqrt() <= settings.grad_tol {
            converged = true;
            break;
        }
        let mut alpha = settings.initial_step;
        let mut next = None;
        for _ in 0..=settings.max_backtracks {
            let zt: Vec<f64> = z.iter().zip(&g).map(|(a, d)| a - alpha * d).collect();
            trial.set_decision_vector(&zt);
            if let Ok(v) = soft_cost(&trial, state, reference, problem) {
                if !v.saturated && v.value <= value.value - settings.armijo * alpha * g2 {
                    next = Some((zt, v));
                    break;
                }
            }
            alpha *= settings.shrink;
        }
        let Some((zt, _)) = next else { break };
        trial.set_decision_vector(&zt);
        let Ok((v, gr)) =
            gradient_with_value(&trial, state, reference, problem, settings.grad_reject)
        else {
            break;
        };
        // Keep the step even if the new gradient is unusable: its value
        // already passed the Armijo test. Stop iterating from there.
        z = zt;
        value = v;
        steps += 1;
        records.push(DescentRecord {
            step: steps,
            tracking: value.tracking,
            penalized: value.value,
            grad_norm: gr.norm(),
        });
        if !gr.valid {
            break;
        }
        grad = gr;
        g = grad.to_vector();
    }

    let mut out = plan.with_decision_vector(&z);
    out.source = PlanSource::GradientDescent;
    out.feasible = max_violation(&hard_constraints(&out, state, problem, Propagator::Exact))
        <= settings.feasibility_tol;
    let objective = cost(
        &out,
        state,
        reference,
        &problem.weights,
        &problem.lip,
        Propagator::Exact,
    )
    .unwrap_or(f64::INFINITY);
    Descent {
        solution: NlpSolution {
            plan: out,
            objective,
            iterations: steps,
            converged,
            solve_time: started.elapsed().as_secs_f64(),
            history: Vec::new(),
        },
        rejected: false,
        records,
    }
}
