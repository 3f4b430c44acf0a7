//! Time shifting of a previous solution so it can seed the next solve.

use crate::lip::FootPosition;
use crate::problem::FootstepPlan;

/// A previous solution plus the time that has passed since it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStart {
    pub previous: FootstepPlan,
    /// Seconds since `previous` was computed.
    pub elapsed: f64,
    /// A support exchange happened in between. The exchange is taken to have
    /// occurred `previous.durations[0]` seconds after the plan was computed.
    pub step_taken: bool,
}

/// Result of shifting a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftedPlan {
    pub plan: FootstepPlan,
    /// The current step's remaining time was clamped at zero: the support
    /// exchange is due now.
    pub handover_due: bool,
}

/// Mirrors the displacement `last - penultimate` in `y` and applies it to
/// `anchor`.
pub fn mirrored_successor(
    anchor: FootPosition,
    penultimate: FootPosition,
    last: FootPosition,
) -> FootPosition {
    FootPosition::new(
        anchor.x + (last.x - penultimate.x),
        anchor.y - (last.y - penultimate.y),
    )
}

/// Drops the first foot and duration and synthesizes a new final step by
/// repeating the previous final displacement mirrored in `y`, with the final
/// duration repeated.
pub fn shift_after_step(plan: &FootstepPlan, current_foot: FootPosition) -> FootstepPlan {
    let n = plan.feet.len();
    let mut feet = Vec::with_capacity(n);
    feet.extend_from_slice(&plan.feet[1..]);
    let last = plan.feet[n - 1];
    let penultimate = if n >= 2 {
        plan.feet[n - 2]
    } else {
        current_foot
    };
    let anchor = *feet.last().unwrap_or(&last);
    feet.push(mirrored_successor(anchor, penultimate, last));

    let mut durations = Vec::with_capacity(n + 1);
    durations.extend_from_slice(&plan.durations[1..]);
    durations.push(plan.durations[n]);

    FootstepPlan {
        feet,
        durations,
        stance: plan.stance.opposite(),
        source: plan.source,
        feasible: plan.feasible,
    }
}

/// Initial guess for the next solve.
///
/// Without a step, the feet are kept and the current step's remaining time
/// shrinks by the elapsed time (clamped at zero). After a step, the plan is
/// shifted one slot and the time spent on the new foot is subtracted from its
/// duration.
///
/// `current_foot` is the support foot the previous plan started from; it is
/// only needed to synthesize a successor when the horizon is one step.
pub fn warm_start_plan(warm: &WarmStart, current_foot: FootPosition) -> ShiftedPlan {
    let prev = &warm.previous;
    if !warm.step_taken {
        let mut plan = prev.clone();
        let remaining = prev.durations[0] - warm.elapsed;
        plan.durations[0] = remaining.max(0.0);
        return ShiftedPlan {
            plan,
            handover_due: remaining <= 0.0,
        };
    }
    let mut plan = shift_after_step(prev, current_foot);
    let on_new_foot = (warm.elapsed - prev.durations[0]).max(0.0);
    let remaining = plan.durations[0] - on_new_foot;
    plan.durations[0] = remaining.max(0.0);
    ShiftedPlan {
        plan,
        handover_due: remaining <= 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{PlanSource, Side};

    fn plan() -> FootstepPlan {
        FootstepPlan {
            feet: vec![FootPosition::new(0.1, 0.15), FootPosition::new(0.2, -0.15)],
            durations: vec![0.3, 0.4, 0.5],
            stance: Side::Right,
            source: PlanSource::Rk4,
            feasible: true,
        }
    }

    #[test]
    fn zero_elapsed_without_step_is_identity() {
        let w = WarmStart {
            previous: plan(),
            elapsed: 0.0,
            step_taken: false,
        };
        let out = warm_start_plan(&w, FootPosition::default());
        assert_eq!(out.plan, plan());
        assert!(!out.handover_due);
    }

    #[test]
    fn elapsed_time_shrinks_current_step() {
        let w = WarmStart {
            previous: plan(),
            elapsed: 0.1,
            step_taken: false,
        };
        let out = warm_start_plan(&w, FootPosition::default());
        assert!((out.plan.durations[0] - 0.2).abs() < 1e-15);
        assert_eq!(out.plan.durations[1..], [0.4, 0.5]);
    }

    #[test]
    fn overdue_step_clamps_and_flags_handover() {
        let w = WarmStart {
            previous: plan(),
            elapsed: 0.45,
            step_taken: false,
        };
        let out = warm_start_plan(&w, FootPosition::default());
        assert_eq!(out.plan.durations[0], 0.0);
        assert!(out.handover_due);
    }

    #[test]
    fn step_shifts_and_mirrors_final_foot() {
        let w = WarmStart {
            previous: plan(),
            elapsed: 0.3,
            step_taken: true,
        };
        let out = warm_start_plan(&w, FootPosition::default());
        assert_eq!(out.plan.feet[0], FootPosition::new(0.2, -0.15));
        let f = out.plan.feet[1];
        assert!(
            (f.x - 0.3).abs() < 1e-15 && (f.y - 0.15).abs() < 1e-15,
            "{f:?}"
        );
        assert_eq!(out.plan.durations, vec![0.4, 0.5, 0.5]);
        assert_eq!(out.plan.stance, Side::Left);
    }

    #[test]
    fn time_on_new_foot_is_subtracted() {
        let w = WarmStart {
            previous: plan(),
            elapsed: 0.35,
            step_taken: true,
        };
        let out = warm_start_plan(&w, FootPosition::default());
        assert!((out.plan.durations[0] - 0.35).abs() < 1e-12);
    }

    #[test]
    fn single_step_horizon_mirrors_about_current_foot() {
        let p = FootstepPlan {
            feet: vec![FootPosition::new(0.1, -0.1)],
            durations: vec![0.2, 0.3],
            stance: Side::Left,
            source: PlanSource::Rk4,
            feasible: true,
        };
        let out = shift_after_step(&p, FootPosition::new(0.0, 0.1));
        assert_eq!(out.feet.len(), 1);
        assert!((out.feet[0].x - 0.2).abs() < 1e-15);
        assert!((out.feet[0].y - 0.1).abs() < 1e-15);
    }
}
