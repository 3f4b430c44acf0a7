//! The footstep planning problem shared by every planner: decision variables,
//! velocity-tracking cost, hard constraints and their exponential penalties.
//!
//! A plan with horizon `N` holds `N` future support feet and `N + 1`
//! durations. Segment `s` of the rollout is spent on foot `f_s` (where `f_0`
//! is the current support foot) for `durations[s]` seconds, so the rollout
//! produces boundary states `b_0` (now) through `b_{N+1}`. The cost sums the
//! weighted velocity error at `b_1 ..= b_{N+1}`.

use std::fmt;

use crate::error::{invalid, ArtoError, Result};
use crate::lip::{ComState, FootPosition, LipParams, Propagator};

/// Which foot is bearing weight. The left foot sits at larger `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    /// `+1` for left, `-1` for right.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which solver produced a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlanSource {
    Rk4,
    GradientDescent,
    Baseline,
}

impl PlanSource {
    pub fn name(self) -> &'static str {
        match self {
            PlanSource::Rk4 => "rk4",
            PlanSource::GradientDescent => "gd",
            PlanSource::Baseline => "baseline",
        }
    }
}

impl fmt::Display for PlanSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Desired CoM velocity, m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub vx: f64,
    pub vy: f64,
}

impl Reference {
    pub const fn new(vx: f64, vy: f64) -> Self {
        Self { vx, vy }
    }
}

/// Velocity-error weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostWeights {
    pub wx: f64,
    pub wy: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self { wx: 10.0, wy: 10.0 }
    }
}

/// Weights and length scales of the exponential penalties. A constraint with
/// residual `r` (feasible when `r <= 0`) and scale `s` is penalized by
/// `w * exp(1 + r / s)`, i.e. `w * exp(g / c)` with `g = r + s`, `c = s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltySettings {
    pub weight_reach: f64,
    pub weight_crossing: f64,
    pub weight_duration: f64,
    pub scale_reach: f64,
    pub scale_crossing: f64,
    pub scale_duration: f64,
    /// Scale for `d0 >= 0` once the current step has lasted `t_lower`.
    /// Small, so that the descent's equilibrium sits within a tick of the
    /// touchdown instead of postponing it.
    pub scale_remaining: f64,
}

impl Default for PenaltySettings {
    fn default() -> Self {
        Self {
            weight_reach: 1.0,
            weight_crossing: 1.0,
            weight_duration: 1.0,
            scale_reach: 0.01,
            scale_crossing: 0.005,
            scale_duration: 0.005,
            scale_remaining: 1e-4,
        }
    }
}

/// Physical limits of the walker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    /// Maximum horizontal CoM-to-foot distance, m.
    pub l_max: f64,
    /// Minimum lateral separation of consecutive feet, m.
    pub r_foot: f64,
    pub t_lower: f64,
    pub t_upper: f64,
    pub penalties: PenaltySettings,
}

impl Default for ConstraintSet {
    fn default() -> Self {
        Self {
            l_max: 0.5,
            r_foot: 0.1,
            t_lower: 0.2,
            t_upper: 0.8,
            penalties: PenaltySettings::default(),
        }
    }
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        if !(self.l_max > 0.0) {
            return Err(invalid("l_max", "must be positive"));
        }
        if !(self.r_foot >= 0.0) {
            return Err(invalid("r_foot", "must be non-negative"));
        }
        if !(self.t_lower > 0.0 && self.t_lower < self.t_upper) {
            return Err(invalid("t_lower", "need 0 < t_lower < t_upper"));
        }
        let p = &self.penalties;
        for (name, v) in [
            ("penalty_scale_reach", p.scale_reach),
            ("penalty_scale_crossing", p.scale_crossing),
            ("penalty_scale_duration", p.scale_duration),
            ("penalty_scale_remaining", p.scale_remaining),
        ] {
            if !(v > 0.0) {
                return Err(invalid(name, "must be positive"));
            }
        }
        Ok(())
    }

    /// Lower bound of duration slot `s`. Whole steps last at least
    /// `t_lower`, so the current one may end once that much has elapsed.
    pub fn duration_lower(&self, slot: usize, time_in_step: f64) -> f64 {
        if slot == 0 {
            (self.t_lower - time_in_step).max(0.0)
        } else {
            self.t_lower
        }
    }
}

/// Everything except the reference and the robot state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningProblem {
    pub lip: LipParams,
    pub weights: CostWeights,
    pub constraints: ConstraintSet,
    /// Number of future footsteps planned.
    pub horizon: usize,
}

impl Default for PlanningProblem {
    fn default() -> Self {
        Self {
            lip: LipParams::default(),
            weights: CostWeights::default(),
            constraints: ConstraintSet::default(),
            horizon: 2,
        }
    }
}

impl PlanningProblem {
    /// Length of the decision vector.
    pub fn dimension(&self) -> usize {
        3 * self.horizon + 1
    }

    pub fn constraint_count(&self) -> usize {
        5 * self.horizon + 3
    }
}

/// A footstep plan: `feet[k]` is the support foot of segment `k + 1`,
/// `durations[0]` is the remaining time on the current foot.
#[derive(Debug, Clone, PartialEq)]
pub struct FootstepPlan {
    pub feet: Vec<FootPosition>,
    pub durations: Vec<f64>,
    /// Side of the foot currently bearing weight.
    pub stance: Side,
    pub source: PlanSource,
    pub feasible: bool,
}

impl FootstepPlan {
    pub fn horizon(&self) -> usize {
        self.feet.len()
    }

    pub fn check_shape(&self, horizon: usize) -> Result<()> {
        if self.feet.len() != horizon || self.durations.len() != horizon + 1 {
            return Err(ArtoError::PlanShape {
                expected_feet: horizon,
                feet: self.feet.len(),
                durations: self.durations.len(),
            });
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.feet.iter().all(FootPosition::is_finite)
            && self.durations.iter().all(|d| d.is_finite())
    }

    /// Decision vector `[f1x, f1y, .., fNx, fNy, d0, .., dN]`.
    pub fn decision_vector(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(3 * self.feet.len() + 1);
        for f in &self.feet {
            z.push(f.x);
            z.push(f.y);
        }
        z.extend_from_slice(&self.durations);
        z
    }

    pub fn set_decision_vector(&mut self, z: &[f64]) {
        let n = self.feet.len();
        debug_assert_eq!(z.len(), 3 * n + 1);
        for (k, f) in self.feet.iter_mut().enumerate() {
            f.x = z[2 * k];
            f.y = z[2 * k + 1];
        }
        self.durations.copy_from_slice(&z[2 * n..]);
    }

    pub fn with_decision_vector(&self, z: &[f64]) -> FootstepPlan {
        let mut p = self.clone();
        p.set_decision_vector(z);
        p
    }

    /// Support foot of segment `s` (segment 0 is the current foot).
    pub fn segment_foot(&self, current: FootPosition, s: usize) -> FootPosition {
        if s == 0 {
            current
        } else {
            self.feet[s - 1]
        }
    }

    pub fn mirrored(&self) -> FootstepPlan {
        FootstepPlan {
            feet: self.feet.iter().map(|f| f.mirrored()).collect(),
            durations: self.durations.clone(),
            stance: self.stance.opposite(),
            source: self.source,
            feasible: self.feasible,
        }
    }
}

/// The robot configuration a plan starts from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanningState {
    pub com: ComState,
    pub foot: FootPosition,
    pub stance: Side,
    pub time_in_step: f64,
}

impl PlanningState {
    pub fn mirrored(&self) -> PlanningState {
        PlanningState {
            com: self.com.mirrored(),
            foot: self.foot.mirrored(),
            stance: self.stance.opposite(),
            time_in_step: self.time_in_step,
        }
    }
}

/// Identifies one hard constraint of a plan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintId {
    /// CoM within reach of foot `f_s` at the instant it lands (`s >= 1`).
    ReachAtTouchdown(usize),
    /// CoM within reach of foot `f_s` at the end of its segment.
    ReachAtLiftoff(usize),
    /// `f_s` and `f_{s-1}` laterally separated by at least `r_foot`.
    FootCrossing(usize),
    DurationLower(usize),
    DurationUpper(usize),
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::ReachAtTouchdown(s) => write!(f, "reach-touchdown({s})"),
            ConstraintId::ReachAtLiftoff(s) => write!(f, "reach-liftoff({s})"),
            ConstraintId::FootCrossing(s) => write!(f, "foot-crossing({s})"),
            ConstraintId::DurationLower(s) => write!(f, "duration-lower({s})"),
            ConstraintId::DurationUpper(s) => write!(f, "duration-upper({s})"),
        }
    }
}

/// `value <= 0` means the constraint is satisfied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub id: ConstraintId,
    pub value: f64,
}

/// Boundary states `b_0 ..= b_{N+1}` of a plan.
pub fn rollout(
    plan: &FootstepPlan,
    state: &PlanningState,
    lip: &LipParams,
    prop: Propagator,
) -> Vec<ComState> {
    let mut out = Vec::with_capacity(plan.durations.len() + 1);
    rollout_into(plan, state, lip, prop, &mut out);
    out
}

pub(crate) fn rollout_into(
    plan: &FootstepPlan,
    state: &PlanningState,
    lip: &LipParams,
    prop: Propagator,
    out: &mut Vec<ComState>,
) {
    out.clear();
    let mut s = state.com;
    out.push(s);
    for (seg, &d) in plan.durations.iter().enumerate() {
        s = prop.propagate(s, plan.segment_foot(state.foot, seg), d, lip);
        out.push(s);
    }
}

/// Calls `f` for every constraint in a fixed order: for each segment `s`,
/// touchdown reach (s >= 1), liftoff reach, crossing (s >= 1), then the two
/// duration bounds.
pub(crate) fn visit_constraints(
    plan: &FootstepPlan,
    state: &PlanningState,
    boundaries: &[ComState],
    limits: &ConstraintSet,
    mut f: impl FnMut(ConstraintId, f64),
) {
    let dist = |b: &ComState, u: &FootPosition| (b.x - u.x).hypot(b.y - u.y);
    for (s, &d) in plan.durations.iter().enumerate() {
        let foot = plan.segment_foot(state.foot, s);
        if s >= 1 {
            f(
                ConstraintId::ReachAtTouchdown(s),
                dist(&boundaries[s], &foot) - limits.l_max,
            );
        }
        f(
            ConstraintId::ReachAtLiftoff(s),
            dist(&boundaries[s + 1], &foot) - limits.l_max,
        );
        if s >= 1 {
            let prev = plan.segment_foot(state.foot, s - 1);
            f(
                ConstraintId::FootCrossing(s),
                limits.r_foot - (foot.y - prev.y).abs(),
            );
        }
        f(
            ConstraintId::DurationLower(s),
            limits.duration_lower(s, state.time_in_step) - d,
        );
        f(ConstraintId::DurationUpper(s), d - limits.t_upper);
    }
}

fn tracking(boundaries: &[ComState], reference: &Reference, weights: &CostWeights) -> f64 {
    boundaries[1..]
        .iter()
        .map(|b| {
            let (ex, ey) = (b.vx - reference.vx, b.vy - reference.vy);
            weights.wx * ex * ex + weights.wy * ey * ey
        })
        .sum()
}

/// Weighted squared velocity error summed over the predicted step boundaries.
pub fn cost(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    weights: &CostWeights,
    lip: &LipParams,
    prop: Propagator,
) -> Result<f64> {
    let b = rollout(plan, state, lip, prop);
    if !b.iter().all(ComState::is_finite) {
        return Err(ArtoError::NonFiniteRollout);
    }
    Ok(tracking(&b, reference, weights))
}

/// Hard constraint residuals of a plan under the given dynamics.
pub fn hard_constraints(
    plan: &FootstepPlan,
    state: &PlanningState,
    problem: &PlanningProblem,
    prop: Propagator,
) -> Vec<Residual> {
    let b = rollout(plan, state, &problem.lip, prop);
    let mut out = Vec::with_capacity(problem.constraint_count());
    visit_constraints(plan, state, &b, &problem.constraints, |id, value| {
        out.push(Residual { id, value })
    });
    out
}

/// Largest residual, or `+inf` if any residual is NaN.
pub fn max_violation(residuals: &[Residual]) -> f64 {
    residuals.iter().fold(f64::NEG_INFINITY, |m, r| {
        if r.value.is_nan() {
            f64::INFINITY
        } else {
            m.max(r.value)
        }
    })
}

/// Penalty arguments above this saturate.
pub const PENALTY_ARGUMENT_LIMIT: f64 = 50.0;

/// Weight and scale of the penalty attached to a constraint. The bound on
/// `d0` switches to the sharp scale once the current step may end.
pub fn penalty_parameters(
    id: ConstraintId,
    limits: &ConstraintSet,
    time_in_step: f64,
) -> (f64, f64) {
    let p = &limits.penalties;
    match id {
        ConstraintId::DurationLower(0) if limits.duration_lower(0, time_in_step) == 0.0 => {
            (p.weight_duration, p.scale_remaining)
        }
        ConstraintId::ReachAtTouchdown(_) | ConstraintId::ReachAtLiftoff(_) => {
            (p.weight_reach, p.scale_reach)
        }
        ConstraintId::FootCrossing(_) => (p.weight_crossing, p.scale_crossing),
        ConstraintId::DurationLower(_) | ConstraintId::DurationUpper(_) => {
            (p.weight_duration, p.scale_duration)
        }
    }
}

/// Penalty value, its derivative with respect to the residual, and whether
/// the exponent saturated.
#[inline]
pub(crate) fn penalty(residual: f64, weight: f64, scale: f64) -> (f64, f64, bool) {
    let arg = 1.0 + residual / scale;
    if arg > PENALTY_ARGUMENT_LIMIT || arg.is_nan() {
        let v = weight * PENALTY_ARGUMENT_LIMIT.exp();
        return (v, v / scale, true);
    }
    let v = weight * arg.exp();
    (v, v / scale, false)
}

/// Penalized cost split into its parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftCost {
    pub value: f64,
    pub tracking: f64,
    pub penalty: f64,
    /// An exponent saturated; gradients at this point are not trustworthy.
    pub saturated: bool,
}

/// Tracking cost plus exponential penalties, using the exact rollout.
pub fn soft_cost(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
) -> Result<SoftCost> {
    let b = rollout(plan, state, &problem.lip, Propagator::Exact);
    soft_cost_from_rollout(plan, state, reference, problem, &b)
}

pub(crate) fn soft_cost_from_rollout(
    plan: &FootstepPlan,
    state: &PlanningState,
    reference: &Reference,
    problem: &PlanningProblem,
    b: &[ComState],
) -> Result<SoftCost> {
    if !b.iter().all(ComState::is_finite) {
        return Err(ArtoError::NonFiniteRollout);
    }
    let track = tracking(b, reference, &problem.weights);
    let mut pen = 0.0;
    let mut saturated = false;
    visit_constraints(plan, state, b, &problem.constraints, |id, r| {
        let (w, s) = penalty_parameters(id, &problem.constraints, state.time_in_step);
        let (v, _, sat) = penalty(r, w, s);
        pen += v;
        saturated |= sat;
    });
    Ok(SoftCost {
        value: track + pen,
        tracking: track,
        penalty: pen,
        saturated,
    })
}

/// A plan that steps in place around the current foot: feet alternate
/// `2 * half_width` apart laterally, durations at `nominal` seconds.
pub fn nominal_plan(
    state: &PlanningState,
    problem: &PlanningProblem,
    half_width: f64,
    nominal: f64,
) -> FootstepPlan {
    let mut feet = Vec::with_capacity(problem.horizon);
    let mut prev = state.foot;
    let mut side = state.stance;
    for _ in 0..problem.horizon {
        side = side.opposite();
        let next = FootPosition::new(state.com.x, prev.y + side.sign() * 2.0 * half_width);
        feet.push(next);
        prev = next;
    }
    let mut durations = vec![nominal; problem.horizon + 1];
    durations[0] = (nominal - state.time_in_step).max(0.0);
    FootstepPlan {
        feet,
        durations,
        stance: state.stance,
        source: PlanSource::Rk4,
        feasible: false,
    }
}
