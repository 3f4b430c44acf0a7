//! Analytical derivatives of the boundary states and of the penalized cost
//! with respect to the footstep plan, on the exact pendulum solution.
//!
//! Each boundary `b_j` depends only on decisions made before it, so the
//! tables are lower triangular and are filled by a forward chain rule:
//! a perturbation present at `b_{j-1}` is carried through segment `j - 1` by
//! the homogeneous map `[cosh, sinh/w; w sinh, cosh]`.

use crate::error::Result;
use crate::lip::{ComState, LipParams, Propagator};
use crate::problem::{
    penalty, penalty_parameters, rollout, soft_cost_from_rollout, visit_constraints, ConstraintId,
    FootstepPlan, PlanningProblem, PlanningState, Reference, SoftCost,
};

/// Sensitivities of boundary positions and velocities.
///
/// Foot derivatives are identical on both axes (a foot coordinate only moves
/// its own axis), so they are stored once. Duration derivatives are stored
/// per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityTable {
    horizon: usize,
    pos_foot: Vec<f64>,
    vel_foot: Vec<f64>,
    pos_dur: Vec<[f64; 2]>,
    vel_dur: Vec<[f64; 2]>,
}

impl SensitivityTable {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of boundary states, `N + 2`.
    pub fn boundaries(&self) -> usize {
        self.horizon + 2
    }

    fn foot_index(&self, j: usize, k: usize) -> usize {
        debug_assert!((1..=self.horizon).contains(&k));
        j * self.horizon + (k - 1)
    }

    fn dur_index(&self, j: usize, s: usize) -> usize {
        debug_assert!(s <= self.horizon);
        j * (self.horizon + 1) + s
    }

    /// `d x_j / d u_{x,k}` (equal to `d y_j / d u_{y,k}`), `k` in `1..=N`.
    pub fn position_wrt_foot(&self, j: usize, k: usize) -> f64 {
        self.pos_foot[self.foot_index(j, k)]
    }

    /// `d xdot_j / d u_{x,k}`.
    pub fn velocity_wrt_foot(&self, j: usize, k: usize) -> f64 {
        self.vel_foot[self.foot_index(j, k)]
    }

    /// `[d x_j / d dt_s, d y_j / d dt_s]`, `s` in `0..=N`.
    pub fn position_wrt_duration(&self, j: usize, s: usize) -> [f64; 2] {
        self.pos_dur[self.dur_index(j, s)]
    }

    pub fn velocity_wrt_duration(&self, j: usize, s: usize) -> [f64; 2] {
        self.vel_dur[self.dur_index(j, s)]
    }
}

/// Fills the sensitivity table for `plan` starting from `state`.
pub fn sensitivities(
    plan: &FootstepPlan,
    state: &PlanningState,
    params: &LipParams,
) -> SensitivityTable {
    let b = rollout(plan, state, params, Propagator::Exact);
    sensitivities_from_rollout(plan, state, params, &b)
}

fn sensitivities_from_rollout(
    plan: &FootstepPlan,
    state: &PlanningState,
    params: &LipParams,
    b: &[ComState],
) -> SensitivityTable {
    let n = plan.horizon();
    let nb = n + 2;
    let w = params.omega();
    let w2 = params.omega_sq();
    let mut t = SensitivityTable {
        horizon: n,
        pos_foot: vec![0.0; nb * n],
        vel_foot: vec![0.0; nb * n],
        pos_dur: vec![[0.0; 2]; nb * (n + 1)],
        vel_dur: vec![[0.0; 2]; nb * (n + 1)],
    };
    // cosh / sinh of every segment.
    let hyp: Vec<(f64, f64)> = plan
        .durations
        .iter()
        .map(|&d| ((w * d).cosh(), (w * d).sinh()))
        .collect();

    for k in 1..=n {
        let (c, s) = hyp[k];
        let i = t.foot_index(k + 1, k);
        t.pos_foot[i] = 1.0 - c;
        t.vel_foot[i] = -w * s;
        for j in (k + 2)..nb {
            let (c, s) = hyp[j - 1];
            let prev = t.foot_index(j - 1, k);
            let (p, v) = (t.pos_foot[prev], t.vel_foot[prev]);
            let i = t.foot_index(j, k);
            t.pos_foot[i] = p * c + v / w * s;
            t.vel_foot[i] = w * p * s + v * c;
        }
    }

    for seg in 0..=n {
        let end = &b[seg + 1];
        let foot = plan.segment_foot(state.foot, seg);
        let i = t.dur_index(seg + 1, seg);
        t.pos_dur[i] = [end.vx, end.vy];
        t.vel_dur[i] = [w2 * (end.x - foot.x), w2 * (end.y - foot.y)];
        for j in (seg + 2)..nb {
            let (c, s) = hyp[j - 1];
            let prev = t.dur_index(j - 1, seg);
            let (p, v) = (t.pos_dur[prev], t.vel_dur[prev]);
            let i = t.dur_index(j, seg);
            for a in 0..2 {
                t.pos_dur[i][a] = p[a] * c + v[a] / w * s;
                t.vel_dur[i][a] = w * p[a] * s + v[a] * c;
            }
        }
    }
    t
}

/// Gradient of the penalized cost with respect to the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector {
    /// `[d/du_x, d/du_y]` per future foot.
    pub d_foot: Vec<[f64; 2]>,
    pub d_dt: Vec<f64>,
    /// False when a component exceeded the rejection threshold, an exponent
    /// saturated or the value was not finite.
    pub valid: bool,
}

impl GradientVector {
    /// Same layout as [`FootstepPlan::decision_vector`].
    pub fn to_vector(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(3 * self.d_foot.len() + 1);
        for f in &self.d_foot {
            z.extend_from_slice(f);
        }
        z.extend_from_slice(&self.d_dt);
        z
    }

    pub fn max_abs(&self) -> f64 {
        self.to_vector().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn norm(&self) -> f64 {
        self.to_vector().iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Variable a derivative is taken with respect to.
#[derive(Clone, Copy)]
enum Var {
    Foot { k: usize, axis: usize },
    Duration(usize),
}

/// Value of the penalized cost and its analytical gradient.
pub fn gradient_with_value(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    reject_threshold: f64,
) -> Result<(SoftCost, GradientVector)> {
    let b = rollout(plan, state, &problem.lip, Propagator::Exact);
    let value = soft_cost_from_rollout(plan, state, reference, problem, &b)?;
    let table = sensitivities_from_rollout(plan, state, &problem.lip, &b);
    let n = plan.horizon();
    let nb = n + 2;
    let wts = [problem.weights.wx, problem.weights.wy];
    let vref = [reference.vx, reference.vy];

    // Derivative of boundary j's position (axis a) with respect to a variable.
    let dpos = |j: usize, a: usize, v: Var| -> f64 {
        match v {
            Var::Foot { k, axis } => {
                if axis == a && j > k {
                    table.position_wrt_foot(j, k)
                } else {
                    0.0
                }
            }
            Var::Duration(s) => {
                if j > s {
                    table.position_wrt_duration(j, s)[a]
                } else {
                    0.0
                }
            }
        }
    };
    let dvel = |j: usize, a: usize, v: Var| -> f64 {
        match v {
            Var::Foot { k, axis } => {
                if axis == a && j > k {
                    table.velocity_wrt_foot(j, k)
                } else {
                    0.0
                }
            }
            Var::Duration(s) => {
                if j > s {
                    table.velocity_wrt_duration(j, s)[a]
                } else {
                    0.0
                }
            }
        }
    };

    let vars: Vec<Var> = (1..=n)
        .flat_map(|k| [Var::Foot { k, axis: 0 }, Var::Foot { k, axis: 1 }])
        .chain((0..=n).map(Var::Duration))
        .collect();
    let mut grad = vec![0.0; vars.len()];

    // Tracking term.
    for (g, &v) in grad.iter_mut().zip(&vars) {
        for (j, bj) in b.iter().enumerate().take(nb).skip(1) {
            let vel = [bj.vx, bj.vy];
            for a in 0..2 {
                *g += 2.0 * wts[a] * (vel[a] - vref[a]) * dvel(j, a, v);
            }
        }
    }

    // Penalty terms: chain through d(residual)/d(var).
    let limits = &problem.constraints;
    let mut saturated = false;
    let mut per_constraint: Vec<(ConstraintId, f64)> =
        Vec::with_capacity(problem.constraint_count());
    visit_constraints(plan, state, &b, limits, |id, r| {
        let (w, s) = penalty_parameters(id, limits, state.time_in_step);
        let (_, dp, sat) = penalty(r, w, s);
        saturated |= sat;
        per_constraint.push((id, dp));
    });
    for (id, dp) in per_constraint {
        match id {
            ConstraintId::ReachAtTouchdown(s) | ConstraintId::ReachAtLiftoff(s) => {
                let j = if matches!(id, ConstraintId::ReachAtTouchdown(_)) {
                    s
                } else {
                    s + 1
                };
                let foot = plan.segment_foot(state.foot, s);
                let (ex, ey) = (b[j].x - foot.x, b[j].y - foot.y);
                let dist = ex.hypot(ey);
                if dist == 0.0 {
                    continue;
                }
                let e = [ex / dist, ey / dist];
                for (g, &v) in grad.iter_mut().zip(&vars) {
                    let mut d = 0.0;
                    for a in 0..2 {
                        let own = matches!(v, Var::Foot { k, axis } if k == s && axis == a);
                        d += e[a] * (dpos(j, a, v) - if own { 1.0 } else { 0.0 });
                    }
                    *g += dp * d;
                }
            }
            ConstraintId::FootCrossing(s) => {
                let (cur, prev) = (
                    plan.segment_foot(state.foot, s),
                    plan.segment_foot(state.foot, s - 1),
                );
                let sign = (cur.y - prev.y).signum();
                for (g, &v) in grad.iter_mut().zip(&vars) {
                    if let Var::Foot { k, axis: 1 } = v {
                        if k == s {
                            *g -= dp * sign;
                        } else if k == s - 1 {
                            *g += dp * sign;
                        }
                    }
                }
            }
            ConstraintId::DurationLower(s) => {
                grad[2 * n + s] -= dp;
            }
            ConstraintId::DurationUpper(s) => {
                grad[2 * n + s] += dp;
            }
        }
    }

    let finite = grad.iter().all(|g| g.is_finite());
    let too_big = grad.iter().any(|g| g.abs() > reject_threshold);
    let out = GradientVector {
        d_foot: (0..n).map(|k| [grad[2 * k], grad[2 * k + 1]]).collect(),
        d_dt: grad[2 * n..].to_vec(),
        valid: finite && !too_big && !saturated,
    };
    Ok((value, out))
}

/// Analytical gradient of the penalized cost.
pub fn gradient(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    reject_threshold: f64,
) -> GradientVector {
    match gradient_with_value(plan, state, reference, problem, reject_threshold) {
        Ok((_, g)) => g,
        Err(_) => GradientVector {
            d_foot: vec![[0.0; 2]; plan.horizon()],
            d_dt: vec![0.0; plan.horizon() + 1],
            valid: false,
        },
    }
}
