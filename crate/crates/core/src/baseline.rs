//! Comparison planner: footstep locations only, step timing fixed.
//!
//! With the durations fixed, every boundary state is affine in the future
//! foot positions, so the tracking cost is quadratic. Leg reach is
//! approximated by axis-aligned boxes inscribed in the reach disk and foot
//! crossing by a one-sided linear bound chosen from the stance side, which
//! leaves a small convex QP.

use crate::lip::{ComState, FootPosition, LipParams};
use crate::problem::{FootstepPlan, PlanSource, PlanningProblem, PlanningState, Reference, Side};
use crate::qp::solve_qp;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineConfig {
    pub fixed_dt: f64,
    /// Half-width of the reach boxes. `None` uses `l_max / sqrt(2)`.
    pub box_half_width: Option<f64>,
    pub assist_force: f64,
    pub assist_duration: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            fixed_dt: 0.5,
            box_half_width: None,
            assist_force: 40.0,
            assist_duration: 0.1,
        }
    }
}

/// Boundary state as `constant + sum_k coeff[k] * u_k` per axis. The
/// coefficients are shared by both axes.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineBoundary {
    pub constant: ComState,
    pub pos_coeff: Vec<f64>,
    pub vel_coeff: Vec<f64>,
}

impl AffineBoundary {
    pub fn evaluate(&self, feet: &[FootPosition]) -> ComState {
        let mut s = self.constant;
        for (k, f) in feet.iter().enumerate() {
            s.x += self.pos_coeff[k] * f.x;
            s.y += self.pos_coeff[k] * f.y;
            s.vx += self.vel_coeff[k] * f.x;
            s.vy += self.vel_coeff[k] * f.y;
        }
        s
    }
}

/// Affine form of the boundary states `b_0 ..= b_{N+1}` for fixed durations.
pub fn affine_rollout(
    state: &PlanningState,
    durations: &[f64],
    lip: &LipParams,
) -> Vec<AffineBoundary> {
    let n = durations.len() - 1;
    let w = lip.omega();
    let mut out = Vec::with_capacity(n + 2);
    let mut cur = AffineBoundary {
        constant: state.com,
        pos_coeff: vec![0.0; n],
        vel_coeff: vec![0.0; n],
    };
    out.push(cur.clone());
    for (s, &d) in durations.iter().enumerate() {
        let (sh, ch) = ((w * d).sinh(), (w * d).cosh());
        let c = cur.constant;
        // Constant part: propagate with the current foot, or about the origin
        // for future feet (their contribution is added through coefficients).
        let anchor = if s == 0 {
            state.foot
        } else {
            FootPosition::default()
        };
        let axis = |p: f64, v: f64, u: f64| {
            (
                p + v / w * sh + (p - u) * (ch - 1.0),
                v * ch + w * (p - u) * sh,
            )
        };
        let (x, vx) = axis(c.x, c.vx, anchor.x);
        let (y, vy) = axis(c.y, c.vy, anchor.y);
        let mut next = AffineBoundary {
            constant: ComState::new(x, y, vx, vy),
            pos_coeff: vec![0.0; n],
            vel_coeff: vec![0.0; n],
        };
        for k in 0..n {
            let (p, v) = (cur.pos_coeff[k], cur.vel_coeff[k]);
            next.pos_coeff[k] = p * ch + v / w * sh;
            next.vel_coeff[k] = v * ch + w * p * sh;
        }
        if s >= 1 {
            next.pos_coeff[s - 1] += 1.0 - ch;
            next.vel_coeff[s - 1] += -w * sh;
        }
        out.push(next.clone());
        cur = next;
    }
    out
}

/// Fixed durations for the current state.
pub fn fixed_durations(state: &PlanningState, horizon: usize, config: &BaselineConfig) -> Vec<f64> {
    let mut d = vec![config.fixed_dt; horizon + 1];
    d[0] = (config.fixed_dt - state.time_in_step).max(0.0);
    d
}

/// Solves the location-only QP. On an infeasible QP the returned plan keeps
/// nominal feet and is marked infeasible.
pub fn solve_baseline(
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    config: &BaselineConfig,
) -> FootstepPlan {
    let n = problem.horizon;
    let durations = fixed_durations(state, n, config);
    let rows = affine_rollout(state, &durations, &problem.lip);
    let nv = 2 * n;
    let (wx, wy) = (problem.weights.wx, problem.weights.wy);

    // Cost: sum over b_1..=b_{N+1} of w (v - vref)^2, axes interleaved.
    let mut h = vec![0.0; nv * nv];
    let mut g = vec![0.0; nv];
    for b in &rows[1..] {
        for (axis, w, e0) in [
            (0, wx, b.constant.vx - reference.vx),
            (1, wy, b.constant.vy - reference.vy),
        ] {
            for i in 0..n {
                let ai = b.vel_coeff[i];
                g[2 * i + axis] += 2.0 * w * e0 * ai;
                for k in 0..n {
                    h[(2 * i + axis) * nv + 2 * k + axis] += 2.0 * w * ai * b.vel_coeff[k];
                }
            }
        }
    }
    for i in 0..nv {
        h[i * nv + i] += 1e-9;
    }

    let half = config
        .box_half_width
        .unwrap_or(problem.constraints.l_max / std::f64::consts::SQRT_2);
    let mut a = Vec::new();
    let mut rhs = Vec::new();
    let mut push_row = |row: Vec<f64>, bound: f64| {
        if row.iter().any(|&v| v != 0.0) {
            a.extend(row);
            rhs.push(bound);
        }
    };
    // Reach boxes at touchdown and liftoff of every segment:
    // |pos_j - f_s| <= half on each axis.
    for s in 0..=n {
        for j in [s, s + 1] {
            if j == 0 {
                continue;
            }
            let b = &rows[j];
            for axis in 0..2 {
                let mut row = vec![0.0; nv];
                for k in 0..n {
                    row[2 * k + axis] = b.pos_coeff[k];
                }
                let c = if axis == 0 {
                    b.constant.x
                } else {
                    b.constant.y
                };
                let mut fixed = 0.0;
                if s == 0 {
                    fixed = if axis == 0 {
                        state.foot.x
                    } else {
                        state.foot.y
                    };
                } else {
                    row[2 * (s - 1) + axis] -= 1.0;
                }
                // row z + c - fixed <= half and -(row z + c - fixed) <= half
                push_row(row.clone(), half - c + fixed);
                push_row(row.iter().map(|v| -v).collect(), half + c - fixed);
            }
        }
    }
    // Crossing: foot k sits on side `side_k` of foot k-1 by at least r_foot.
    let mut side = state.stance;
    for k in 0..n {
        side = side.opposite();
        let sign = side.sign();
        let mut row = vec![0.0; nv];
        row[2 * k + 1] = -sign;
        let mut bound = -problem.constraints.r_foot;
        if k == 0 {
            bound -= sign * state.foot.y;
        } else {
            row[2 * (k - 1) + 1] = sign;
        }
        push_row(row, bound);
    }

    let feet_from = |z: &[f64]| {
        (0..n)
            .map(|k| FootPosition::new(z[2 * k], z[2 * k + 1]))
            .collect::<Vec<_>>()
    };
    match solve_qp(&h, &g, &a, &rhs) {
        Ok(sol) => FootstepPlan {
            feet: feet_from(&sol.x),
            durations,
            stance: state.stance,
            source: PlanSource::Baseline,
            feasible: true,
        },
        Err(_) => {
            let mut feet = Vec::with_capacity(n);
            let mut prev = state.foot;
            let mut side: Side = state.stance;
            for _ in 0..n {
                side = side.opposite();
                prev = FootPosition::new(
                    prev.x,
                    prev.y + side.sign() * 2.0 * problem.constraints.r_foot,
                );
                feet.push(prev);
            }
            FootstepPlan {
                feet,
                durations,
                stance: state.stance,
                source: PlanSource::Baseline,
                feasible: false,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lip::propagate_exact;
    use crate::lip::Propagator;
    use crate::problem::{hard_constraints, max_violation, ConstraintSet, CostWeights};
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn affine_rollout_matches_exact_propagation(
            x in -0.3..0.3f64, y in -0.3..0.3f64, vx in -1.0..1.0f64, vy in -1.0..1.0f64,
            fx in -0.3..0.3f64, fy in -0.3..0.3f64,
            u in prop::collection::vec(-0.5..0.5f64, 4),
            d in prop::collection::vec(0.0..0.8f64, 3),
        ) {
            let lip = LipParams::default();
            let state = PlanningState {
                com: ComState::new(x, y, vx, vy),
                foot: FootPosition::new(fx, fy),
                stance: Side::Left,
                time_in_step: 0.0,
            };
            let feet = [FootPosition::new(u[0], u[1]), FootPosition::new(u[2], u[3])];
            let rows = affine_rollout(&state, &d, &lip);
            let mut s = state.com;
            let supports = [state.foot, feet[0], feet[1]];
            for j in 0..3 {
                s = propagate_exact(s, supports[j], d[j], &lip);
                let a = rows[j + 1].evaluate(&feet);
                for (p, q) in a.to_array().iter().zip(s.to_array()) {
                    prop_assert!((p - q).abs() <= 1e-12 * q.abs().max(1.0), "{a:?} vs {s:?}");
                }
            }
        }
    }

    #[test]
    fn unconstrained_single_step_matches_hand_solution() {
        let problem = PlanningProblem {
            horizon: 1,
            weights: CostWeights { wx: 3.0, wy: 5.0 },
            constraints: ConstraintSet {
                l_max: 100.0,
                r_foot: -100.0,
                ..Default::default()
            },
            ..Default::default()
        };
        let state = PlanningState {
            com: ComState::new(0.02, -0.01, 0.15, -0.2),
            foot: FootPosition::new(0.0, 0.1),
            stance: Side::Left,
            time_in_step: 0.1,
        };
        let cfg = BaselineConfig {
            fixed_dt: 0.4,
            ..Default::default()
        };
        let r = Reference::new(0.1, 0.05);
        let plan = solve_baseline(&state, &r, &problem, &cfg);

        // b_1 is fixed; b_2's velocity is v_1 cosh + w (p_1 - u) sinh. Solve
        // the 2x2 system v_2(u) = vref for (ux, uy).
        let w = problem.lip.omega();
        let (d0, d1) = (0.4 - 0.1, 0.4);
        let hyper = |p: f64, v: f64, u: f64, t: f64| {
            (
                v / w * (w * t).sinh() + (p - u) * (w * t).cosh() + u,
                v * (w * t).cosh() + w * (p - u) * (w * t).sinh(),
            )
        };
        let (x1, vx1) = hyper(0.02, 0.15, 0.0, d0);
        let (y1, vy1) = hyper(-0.01, -0.2, 0.1, d0);
        let (c, s) = ((w * d1).cosh(), (w * d1).sinh());
        // [-w s, 0; 0, -w s] [ux; uy] = [vref_x - vx1 c - w x1 s; vref_y - vy1 c - w y1 s]
        let m = [[-w * s, 0.0], [0.0, -w * s]];
        let rhs = [0.1 - vx1 * c - w * x1 * s, 0.05 - vy1 * c - w * y1 * s];
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        let ux = (rhs[0] * m[1][1] - m[0][1] * rhs[1]) / det;
        let uy = (m[0][0] * rhs[1] - rhs[0] * m[1][0]) / det;
        assert!(
            (plan.feet[0].x - ux).abs() < 1e-6,
            "{} vs {ux}",
            plan.feet[0].x
        );
        assert!(
            (plan.feet[0].y - uy).abs() < 1e-6,
            "{} vs {uy}",
            plan.feet[0].y
        );
        assert_eq!(plan.durations, vec![d0, d1]);
    }

    #[test]
    fn plans_are_feasible_with_fixed_durations() {
        let problem = PlanningProblem::default();
        let cfg = BaselineConfig::default();
        let state = PlanningState {
            com: ComState::new(0.0, 0.0, 0.0, 0.1),
            foot: FootPosition::new(0.0, 0.15),
            stance: Side::Left,
            time_in_step: 0.2,
        };
        let plan = solve_baseline(&state, &Reference::default(), &problem, &cfg);
        assert!(plan.feasible);
        assert_eq!(plan.source, PlanSource::Baseline);
        assert_eq!(plan.durations, vec![0.3, 0.5, 0.5]);
        // Boxes lie inside the reach disk, so the true constraints hold.
        let res = hard_constraints(&plan, &state, &problem, Propagator::Exact);
        assert!(max_violation(&res) <= 1e-9, "{res:?}");
        assert!(plan.feet[0].y <= 0.15 - problem.constraints.r_foot + 1e-12);
        assert!(plan.feet[1].y >= plan.feet[0].y + problem.constraints.r_foot - 1e-12);
    }

    #[test]
    fn stepping_in_place_reaches_a_periodic_gait() {
        let problem = PlanningProblem::default();
        let cfg = BaselineConfig {
            fixed_dt: 0.3,
            ..Default::default()
        };
        let r = Reference::default();
        let mut state = PlanningState {
            com: ComState::new(0.0, 0.05, 0.0, -0.3),
            foot: FootPosition::new(0.0, 0.15),
            stance: Side::Left,
            time_in_step: 0.0,
        };
        let mut feet_y = Vec::new();
        for _ in 0..40 {
            let plan = solve_baseline(&state, &r, &problem, &cfg);
            assert!(plan.feasible);
            state.com = propagate_exact(state.com, state.foot, plan.durations[0], &problem.lip);
            state.foot = plan.feet[0];
            state.stance = state.stance.opposite();
            feet_y.push(state.foot.y);
        }
        let k = feet_y.len();
        // Period two: every other foot lands at the same place.
        assert!((feet_y[k - 1] - feet_y[k - 3]).abs() < 1e-6, "{feet_y:?}");
        assert!((feet_y[k - 2] - feet_y[k - 4]).abs() < 1e-6, "{feet_y:?}");
    }
}
