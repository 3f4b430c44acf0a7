//! Ground-truth plant: exact pendulum propagation, support exchange on the
//! active plan's schedule, external pushes and fall detection.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use crate::error::{invalid, Result};
use crate::lip::{propagate_exact, ComState, FootPosition, LipParams};
use crate::problem::{FootstepPlan, PlanningState, Side};
use crate::quintic::{SwingPose, SwingTrajectory};
use crate::warm_start::shift_after_step;

/// Mass the push forces act on, kg.
pub const PUSH_MASS: f64 = 15.0;

/// A constant horizontal force on the CoM for a fixed time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Impulse {
    /// Newtons.
    pub force: f64,
    /// Direction in the ground plane, radians from +x.
    pub angle: f64,
    pub duration: f64,
    pub start: f64,
    /// Kilograms.
    pub mass: f64,
}

impl Impulse {
    pub fn new(force: f64, angle: f64, duration: f64, start: f64, mass: f64) -> Result<Self> {
        if !(duration > 0.0) {
            return Err(invalid("impulse duration", "must be positive"));
        }
        if !(mass > 0.0) {
            return Err(invalid("mass", "must be positive"));
        }
        if !force.is_finite() || !angle.is_finite() || !start.is_finite() {
            return Err(invalid("impulse", "non-finite parameter"));
        }
        Ok(Self {
            force,
            angle,
            duration,
            start,
            mass,
        })
    }

    /// Lateral push toward +y.
    pub fn lateral(force: f64, start: f64) -> Self {
        Self {
            force,
            angle: FRAC_PI_2,
            duration: 0.1,
            start,
            mass: PUSH_MASS,
        }
    }

    /// Velocity change contributed over `[t0, t1]`.
    pub fn velocity_change(&self, t0: f64, t1: f64) -> (f64, f64) {
        let overlap = (t1.min(self.start + self.duration) - t0.max(self.start)).max(0.0);
        let dv = self.force / self.mass * overlap;
        (dv * self.angle.cos(), dv * self.angle.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FallReason {
    /// CoM out of leg reach of the support foot.
    Reach,
    /// CoM speed above the limit.
    Speed,
    /// No acceptable plan for too long.
    Degraded,
}

impl FallReason {
    pub fn name(self) -> &'static str {
        match self {
            FallReason::Reach => "reach",
            FallReason::Speed => "speed",
            FallReason::Degraded => "degraded",
        }
    }
}

impl fmt::Display for FallReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantConfig {
    pub lip: LipParams,
    pub l_max: f64,
    pub speed_limit: f64,
    pub degraded_limit: f64,
    pub swing_height: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            lip: LipParams::default(),
            l_max: 0.5,
            speed_limit: 5.0,
            degraded_limit: 0.5,
            swing_height: 0.05,
        }
    }
}

/// Fall test on a plant state. `degraded_for` is how long the planner has
/// been unable to supply an acceptable plan.
pub fn detect_fall(
    com: &ComState,
    support: FootPosition,
    degraded_for: f64,
    cfg: &PlantConfig,
) -> Option<FallReason> {
    if !com.is_finite() || (com.x - support.x).hypot(com.y - support.y) > cfg.l_max {
        Some(FallReason::Reach)
    } else if com.vx.hypot(com.vy) > cfg.speed_limit {
        Some(FallReason::Speed)
    } else if degraded_for > cfg.degraded_limit {
        Some(FallReason::Degraded)
    } else {
        None
    }
}

/// The plan being executed, anchored in absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivePlan {
    pub plan: FootstepPlan,
    /// Absolute time of the next support exchange.
    pub step_at: f64,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub time: f64,
    pub com: ComState,
    pub support: FootPosition,
    pub side: Side,
    pub time_in_step: f64,
    /// Extra time credited to the first support phase when starting at
    /// rest: a standing robot has no swing in flight, so its minimum swing
    /// time is already served. Cleared at the first support exchange.
    pub standing_credit: f64,
    /// Support exchanges so far.
    pub steps: usize,
    pub swing: SwingTrajectory,
    pub fallen: Option<FallReason>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlantEvent {
    Step {
        time: f64,
        foot: FootPosition,
        /// Duration of the step that just ended.
        duration: f64,
        com: ComState,
    },
    Fell {
        time: f64,
        reason: FallReason,
    },
}

#[derive(Debug, Clone)]
pub struct Plant {
    pub config: PlantConfig,
    pub state: PlantState,
    pub active: Option<ActivePlan>,
    pub impulses: Vec<Impulse>,
    degraded_since: Option<f64>,
}

impl Plant {
    pub fn new(config: PlantConfig, com: ComState, support: FootPosition, side: Side) -> Self {
        let swing_start = FootPosition::new(support.x, support.y - side.sign() * 0.3);
        let swing = SwingTrajectory::new(swing_start, swing_start, 1.0, config.swing_height)
            .expect("positive duration");
        Self {
            config,
            state: PlantState {
                time: 0.0,
                com,
                support,
                side,
                time_in_step: 0.0,
                standing_credit: 0.0,
                steps: 0,
                swing,
                fallen: None,
            },
            active: None,
            impulses: Vec::new(),
            degraded_since: None,
        }
    }

    pub fn planning_state(&self) -> PlanningState {
        PlanningState {
            com: self.state.com,
            foot: self.state.support,
            stance: self.state.side,
            time_in_step: self.state.time_in_step + self.state.standing_credit,
        }
    }

    /// Remaining time on the current support foot under the active plan.
    pub fn remaining(&self) -> f64 {
        self.active
            .as_ref()
            .map_or(f64::INFINITY, |a| (a.step_at - self.state.time).max(0.0))
    }

    /// The active plan re-expressed from the current time.
    pub fn current_plan(&self) -> Option<FootstepPlan> {
        self.active.as_ref().map(|a| {
            let mut p = a.plan.clone();
            p.durations[0] = (a.step_at - self.state.time).max(0.0);
            p
        })
    }

    pub fn swing_pose(&self) -> SwingPose {
        self.state.swing.pose(self.state.time_in_step)
    }

    /// Installs a plan computed at `computed_at` when the plant had taken
    /// `computed_steps` steps. Plans from before the latest support exchange
    /// are refused.
    pub fn accept(
        &mut self,
        plan: FootstepPlan,
        computed_at: f64,
        computed_steps: usize,
        seq: u64,
    ) -> bool {
        if computed_steps != self.state.steps || plan.feet.is_empty() {
            return false;
        }
        let step_at = computed_at + plan.durations[0];
        let remaining = (step_at - self.state.time).max(0.0);
        let _ = self
            .state
            .swing
            .retarget(self.state.time_in_step, plan.feet[0], remaining);
        self.active = Some(ActivePlan { plan, step_at, seq });
        self.degraded_since = None;
        true
    }

    pub fn set_degraded(&mut self, degraded: bool) {
        if !degraded {
            self.degraded_since = None;
        } else if self.degraded_since.is_none() {
            self.degraded_since = Some(self.state.time);
        }
    }

    pub fn degraded(&self) -> bool {
        self.degraded_since.is_some()
    }

    fn exchange_support(&mut self, events: &mut Vec<PlantEvent>) {
        let Some(active) = self.active.as_mut() else {
            return;
        };
        let old = self.state.support;
        let ended = self.state.time_in_step;
        self.state.support = active.plan.feet[0];
        self.state.side = self.state.side.opposite();
        self.state.steps += 1;
        self.state.time_in_step = 0.0;
        self.state.standing_credit = 0.0;
        active.plan = shift_after_step(&active.plan, old);
        // A non-positive next duration would step again in the same instant.
        let next = active.plan.durations[0].max(1e-3);
        active.step_at = self.state.time + next;
        if let Ok(s) =
            SwingTrajectory::new(old, active.plan.feet[0], next, self.config.swing_height)
        {
            self.state.swing = s;
        }
        events.push(PlantEvent::Step {
            time: self.state.time,
            foot: self.state.support,
            duration: ended,
            com: self.state.com,
        });
    }

    fn advance(&mut self, to: f64) {
        let dt = to - self.state.time;
        if dt <= 0.0 {
            return;
        }
        let t0 = self.state.time;
        self.state.com = propagate_exact(self.state.com, self.state.support, dt, &self.config.lip);
        for imp in &self.impulses {
            let (dvx, dvy) = imp.velocity_change(t0, to);
            self.state.com.vx += dvx;
            self.state.com.vy += dvy;
        }
        self.state.time = to;
        self.state.time_in_step += dt;
    }

    /// Advances the plant by `dt`, exchanging support exactly at the
    /// scheduled instant if it falls inside the tick.
    pub fn tick(&mut self, dt: f64) -> Vec<PlantEvent> {
        let mut events = Vec::new();
        if self.state.fallen.is_some() {
            return events;
        }
        let end = self.state.time + dt;
        let mut guard = 0;
        loop {
            let step_at = self.active.as_ref().map_or(f64::INFINITY, |a| a.step_at);
            if step_at <= end && guard < 8 {
                self.advance(step_at.max(self.state.time));
                self.exchange_support(&mut events);
                guard += 1;
            } else {
                self.advance(end);
                break;
            }
        }
        self.state.time = end;
        let degraded_for = self.degraded_since.map_or(0.0, |t| self.state.time - t);
        if let Some(reason) = detect_fall(
            &self.state.com,
            self.state.support,
            degraded_for,
            &self.config,
        ) {
            self.state.fallen = Some(reason);
            events.push(PlantEvent::Fell {
                time: self.state.time,
                reason,
            });
        }
        events
    }
}
