//! Drives the plant and the planners, and decides which plan the plant
//! executes.
//!
//! In virtual mode everything runs on one thread from an integer tick
//! counter: on each tick the plant goes first (receiving any solver results
//! due on that tick), then the descent worker, then the RK4 worker. A solve
//! starts from a snapshot of the plant and its result is delivered a fixed
//! number of ticks later, which models solve latency deterministically.
//!
//! In wall mode the workers are real threads that poll the plant snapshot and
//! publish into the lock-free [`PlanExchange`].

use std::fmt;
use std::io::{self, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crate::baseline::{solve_baseline, BaselineConfig};
use crate::descent::{descend, DescentSettings};
use crate::error::{ArtoError, Result};
use crate::exchange::{AcceptedPlan, LatestSlot, PlanExchange, SolverResult};
use crate::lip::{ComState, FootPosition, Propagator};
use crate::nlp::{solve as rk4_solve, SqpSettings};
use crate::problem::{
    cost, FootstepPlan, PlanSource, PlanningProblem, PlanningState, Reference, Side,
};
use crate::sim::{FallReason, Impulse, Plant, PlantConfig, PlantEvent, PUSH_MASS};
use crate::warm_start::{warm_start_plan, WarmStart};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    Arto,
    Rk4Only,
    Baseline,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [
        PlannerKind::Arto,
        PlannerKind::Rk4Only,
        PlannerKind::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Arto => "arto",
            PlannerKind::Rk4Only => "rk4",
            PlannerKind::Baseline => "baseline",
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = ArtoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "arto" => Ok(PlannerKind::Arto),
            "rk4" | "rk4-only" | "rk4_only" => Ok(PlannerKind::Rk4Only),
            "baseline" | "mpc" => Ok(PlannerKind::Baseline),
            other => Err(ArtoError::Config(format!("unknown planner '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClockMode {
    Virtual,
    Wall,
}

impl FromStr for ClockMode {
    type Err = ArtoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "virtual" => Ok(ClockMode::Virtual),
            "wall" => Ok(ClockMode::Wall),
            other => Err(ArtoError::Config(format!("unknown clock mode '{other}'"))),
        }
    }
}

/// Periods and latencies in plant ticks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockConfig {
    pub mode: ClockMode,
    /// Seconds per plant tick.
    pub plant_period: f64,
    pub gd_period: u64,
    pub rk4_period: u64,
    pub baseline_period: u64,
    pub gd_latency: u64,
    pub rk4_latency: u64,
    pub baseline_latency: u64,
}

impl Default for ClockConfig {
    fn default() -> Self {
        Self {
            mode: ClockMode::Virtual,
            plant_period: 1e-3,
            gd_period: 4,
            rk4_period: 40,
            baseline_period: 2,
            gd_latency: 1,
            rk4_latency: 40,
            baseline_latency: 1,
        }
    }
}

impl ClockConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.plant_period > 0.0
            && self.gd_period > 0
            && self.rk4_period > 0
            && self.baseline_period > 0
            && self.gd_latency > 0
            && self.rk4_latency > 0
            && self.baseline_latency > 0;
        if ok {
            Ok(())
        } else {
            Err(ArtoError::Config(
                "clock periods and latencies must be positive".into(),
            ))
        }
    }
}

/// Deliberate faults for testing the arbitration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FaultInjection {
    pub disable_gd: bool,
    pub disable_rk4: bool,
    /// Descent results computed inside this window are treated as if their
    /// gradient had exploded.
    pub reject_gd: Option<(f64, f64)>,
    /// The RK4 worker panics on its first solve at or after this time.
    pub panic_rk4_at: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannerConfig {
    pub problem: PlanningProblem,
    pub sqp: SqpSettings,
    pub descent: DescentSettings,
    pub baseline: BaselineConfig,
    /// Half the lateral foot separation of the nominal stepping-in-place gait.
    pub half_width: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            problem: PlanningProblem::default(),
            sqp: SqpSettings::default(),
            descent: DescentSettings::default(),
            baseline: BaselineConfig::default(),
            half_width: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub planner: PlannerKind,
    /// Simulated seconds.
    pub duration: f64,
    pub com: ComState,
    pub foot: FootPosition,
    pub side: Side,
    /// `(start time, reference)`, sorted by time.
    pub references: Vec<(f64, Reference)>,
    pub impulses: Vec<Impulse>,
    /// Apply the baseline's stationary-start assist push.
    pub assist: bool,
    /// Start standing: the first step may lift off without serving the
    /// minimum step time again.
    pub standing: bool,
}

impl Scenario {
    /// At rest with the CoM midway between the feet, left foot in support.
    pub fn stationary(planner: PlannerKind, duration: f64, half_width: f64) -> Self {
        Self {
            planner,
            duration,
            com: ComState::default(),
            foot: FootPosition::new(0.0, half_width),
            side: Side::Left,
            references: vec![(0.0, Reference::default())],
            impulses: Vec::new(),
            assist: false,
            standing: true,
        }
    }

    pub fn reference_at(&self, t: f64) -> Reference {
        self.references
            .iter()
            .take_while(|(start, _)| *start <= t)
            .last()
            .map_or(Reference::default(), |(_, r)| *r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub planner: PlannerConfig,
    pub plant: PlantConfig,
    pub clock: ClockConfig,
    pub faults: FaultInjection,
    /// Emit a `state` trace row on every plant tick.
    pub record_states: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            planner: PlannerConfig::default(),
            plant: PlantConfig::default(),
            clock: ClockConfig::default(),
            faults: FaultInjection::default(),
            record_states: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    State,
    Accept,
    /// A solver result that could not be used (infeasible or rejected).
    Reject,
    /// A usable result computed before the latest support exchange.
    Stale,
    Fallback,
    Degraded,
    Step,
    Fall,
    WorkerFailure,
}

impl TraceEvent {
    pub fn name(self) -> &'static str {
        match self {
            TraceEvent::State => "state",
            TraceEvent::Accept => "accept",
            TraceEvent::Reject => "reject",
            TraceEvent::Stale => "stale",
            TraceEvent::Fallback => "fallback",
            TraceEvent::Degraded => "degraded",
            TraceEvent::Step => "step",
            TraceEvent::Fall => "fall",
            TraceEvent::WorkerFailure => "worker_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub tick: u64,
    pub time: f64,
    pub event: TraceEvent,
    pub source: Option<PlanSource>,
    pub seq: Option<u64>,
    pub feasible: Option<bool>,
    pub objective: Option<f64>,
    pub com: ComState,
    /// Support foot for state/step rows, planned next foot for plan rows.
    pub foot: FootPosition,
    pub dt_remaining: f64,
}

pub const TRACE_HEADER: &str =
    "tick,time_s,event,source,seq,feasible,J,com_x,com_y,com_vx,com_vy,foot_x,foot_y,dt_remaining";

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], mut out: W) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.time,
            r.event.name(),
            r.source.map_or("", PlanSource::name),
            r.seq.map(|s| s.to_string()).unwrap_or_default(),
            r.feasible.map(|f| f.to_string()).unwrap_or_default(),
            r.objective.map(|j| j.to_string()).unwrap_or_default(),
            r.com.x,
            r.com.y,
            r.com.vx,
            r.com.vy,
            r.foot.x,
            r.foot.y,
            r.dt_remaining,
        )?;
    }
    Ok(())
}

/// One completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSummary {
    pub index: usize,
    /// Touchdown time of the new support foot.
    pub time: f64,
    /// Duration of the step that ended.
    pub duration: f64,
    pub foot: FootPosition,
    /// CoM state at touchdown.
    pub com: ComState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub trace: Vec<TraceRecord>,
    pub steps: Vec<StepSummary>,
    pub fall: Option<(f64, FallReason)>,
    /// Every plan the plant accepted, in order.
    pub accepted: Vec<AcceptedPlan>,
    pub worker_failure: Option<String>,
    /// Wall mode: descent solves that finished within their period, and all
    /// descent solves.
    pub gd_budget: Option<(usize, usize)>,
    pub final_com: ComState,
}

impl RunOutcome {
    pub fn accepted_from(&self, source: PlanSource) -> usize {
        self.accepted.iter().filter(|a| a.source == source).count()
    }
}

/// The best plan among results delivered together: newest snapshot wins,
/// descent wins ties.
pub fn arbitrate<'a>(candidates: &[&'a SolverResult]) -> Option<&'a SolverResult> {
    let rank = |s: PlanSource| match s {
        PlanSource::GradientDescent => 2,
        PlanSource::Rk4 => 1,
        PlanSource::Baseline => 0,
    };
    candidates
        .iter()
        .copied()
        .filter(|r| r.usable())
        .max_by(|a, b| {
            a.computed_at
                .total_cmp(&b.computed_at)
                .then(rank(a.plan.source).cmp(&rank(b.plan.source)))
        })
}

fn snapshot(plant: &Plant) -> (PlanningState, f64, usize) {
    (plant.planning_state(), plant.state.time, plant.state.steps)
}

/// Warm start from a solver's own previous result, expressed relative to the
/// plant's current state. More than one step in between discards it.
fn own_warm_start(prev: &SolverResult, plant: &Plant) -> Option<WarmStart> {
    match plant.state.steps.checked_sub(prev.computed_steps)? {
        0 => Some(WarmStart {
            previous: prev.plan.clone(),
            elapsed: plant.state.time - prev.computed_at,
            step_taken: false,
        }),
        1 => Some(WarmStart {
            previous: prev.plan.clone(),
            // The step happened `time_in_step` ago, whatever the old plan said.
            elapsed: prev.plan.durations[0] + plant.state.time_in_step,
            step_taken: true,
        }),
        _ => None,
    }
}

struct Solvers<'a> {
    cfg: &'a RunConfig,
    scenario: &'a Scenario,
    last_rk4: Option<SolverResult>,
    last_gd: Option<SolverResult>,
}

impl Solvers<'_> {
    fn rk4(&mut self, plant: &Plant) -> SolverResult {
        let (state, t, steps) = snapshot(plant);
        let reference = self.scenario.reference_at(t);
        let p = &self.cfg.planner;
        let warm = self
            .last_rk4
            .as_ref()
            .and_then(|r| own_warm_start(r, plant));
        let sol = rk4_solve(
            &state,
            &reference,
            &p.problem,
            warm.as_ref(),
            p.half_width,
            &p.sqp,
        );
        let result = SolverResult {
            plan: sol.plan,
            computed_at: t,
            computed_steps: steps,
            objective: sol.objective,
            rejected: false,
        };
        if result.plan.is_finite() {
            self.last_rk4 = Some(result.clone());
        }
        result
    }

    fn gd(&mut self, plant: &Plant) -> Option<SolverResult> {
        let (state, t, steps) = snapshot(plant);
        let start = plant.current_plan()?;
        let reference = self.scenario.reference_at(t);
        let p = &self.cfg.planner;
        let mut d = descend(&start, &state, &reference, &p.problem, &p.descent);
        // An RK4 plan accepted from an older snapshot can start the descent
        // far outside the constraints after a disturbance; retry from this
        // worker's own last solution.
        if d.rejected {
            if let Some(warm) = self.last_gd.as_ref().and_then(|r| own_warm_start(r, plant)) {
                let retry = warm_start_plan(&warm, plant.state.support).plan;
                let again = descend(&retry, &state, &reference, &p.problem, &p.descent);
                if !again.rejected {
                    d = again;
                }
            }
        }
        let forced = self
            .cfg
            .faults
            .reject_gd
            .is_some_and(|(a, b)| t >= a && t <= b);
        let result = SolverResult {
            plan: d.solution.plan,
            computed_at: t,
            computed_steps: steps,
            objective: d.solution.objective,
            rejected: d.rejected || forced,
        };
        if result.usable() {
            self.last_gd = Some(result.clone());
        }
        Some(result)
    }

    fn baseline(&mut self, plant: &Plant) -> SolverResult {
        let (state, t, steps) = snapshot(plant);
        let reference = self.scenario.reference_at(t);
        let p = &self.cfg.planner;
        let plan = solve_baseline(&state, &reference, &p.problem, &p.baseline);
        let objective = cost(
            &plan,
            &state,
            &reference,
            &p.problem.weights,
            &p.problem.lip,
            Propagator::Exact,
        )
        .unwrap_or(f64::INFINITY);
        SolverResult {
            plan,
            computed_at: t,
            computed_steps: steps,
            objective,
            rejected: false,
        }
    }
}

fn initial_plant(scenario: &Scenario, cfg: &RunConfig) -> Plant {
    let mut plant = Plant::new(cfg.plant, scenario.com, scenario.foot, scenario.side);
    plant.impulses = scenario.impulses.clone();
    // The baseline keeps its fixed schedule from lift-off; only the
    // minimum step time of the timing optimizers is relaxed.
    if scenario.standing && scenario.planner != PlannerKind::Baseline {
        plant.state.standing_credit = cfg.planner.problem.constraints.t_lower;
    }
    if scenario.assist {
        let b = &cfg.planner.baseline;
        let angle = (scenario.foot.y - scenario.com.y).atan2(scenario.foot.x - scenario.com.x);
        plant.impulses.push(Impulse {
            force: b.assist_force,
            angle,
            duration: b.assist_duration,
            start: 0.0,
            mass: PUSH_MASS,
        });
    }
    plant
}

/// Shared bookkeeping for both clock modes.
struct Arbiter {
    trace: Vec<TraceRecord>,
    accepted: Vec<AcceptedPlan>,
    seq: u64,
    latest_feasible_rk4: Option<SolverResult>,
}

impl Arbiter {
    fn record(
        &mut self,
        tick: u64,
        plant: &Plant,
        event: TraceEvent,
        result: Option<&SolverResult>,
        seq: Option<u64>,
    ) {
        let (foot, dt_remaining) = match result {
            Some(r) => (
                r.plan.feet.first().copied().unwrap_or_default(),
                (r.computed_at + r.plan.durations[0] - plant.state.time).max(0.0),
            ),
            None => (plant.state.support, plant.remaining()),
        };
        self.trace.push(TraceRecord {
            tick,
            time: plant.state.time,
            event,
            source: result.map(|r| r.plan.source),
            seq,
            feasible: result.map(|r| r.plan.feasible && !r.rejected),
            objective: result.map(|r| r.objective),
            com: plant.state.com,
            foot,
            dt_remaining: if dt_remaining.is_finite() {
                dt_remaining
            } else {
                -1.0
            },
        });
    }

    fn try_accept(
        &mut self,
        tick: u64,
        plant: &mut Plant,
        r: &SolverResult,
        event: TraceEvent,
    ) -> bool {
        if !plant.accept(
            r.plan.clone(),
            r.computed_at,
            r.computed_steps,
            self.seq + 1,
        ) {
            return false;
        }
        self.seq += 1;
        self.accepted.push(AcceptedPlan {
            result: r.clone(),
            source: r.plan.source,
        });
        self.record(tick, plant, event, Some(r), Some(self.seq));
        true
    }

    /// Applies the arbitration rule to the results delivered on this tick.
    fn deliver(&mut self, tick: u64, plant: &mut Plant, delivered: &[SolverResult]) {
        if delivered.is_empty() {
            return;
        }
        for r in delivered {
            if r.plan.source == PlanSource::Rk4 && r.usable() {
                self.latest_feasible_rk4 = Some(r.clone());
            }
        }
        let fresh: Vec<&SolverResult> = delivered
            .iter()
            .filter(|r| r.usable() && r.computed_steps == plant.state.steps)
            .collect();
        for r in delivered {
            if !r.usable() {
                self.record(tick, plant, TraceEvent::Reject, Some(r), None);
            } else if r.computed_steps != plant.state.steps {
                self.record(tick, plant, TraceEvent::Stale, Some(r), None);
            }
        }
        if let Some(best) = arbitrate(&fresh) {
            let best = best.clone();
            if self.try_accept(tick, plant, &best, TraceEvent::Accept) {
                return;
            }
        }
        // Nothing new is usable: fall back to the latest feasible RK4 plan.
        if let Some(rk4) = self.latest_feasible_rk4.clone() {
            let current = plant.active.as_ref().map(|a| a.seq);
            let already =
                self.accepted.last().is_some_and(|a| a.result == rk4) && current == Some(self.seq);
            if already || self.try_accept(tick, plant, &rk4, TraceEvent::Fallback) {
                return;
            }
        }
        if fresh.is_empty() {
            plant.set_degraded(true);
            self.record(tick, plant, TraceEvent::Degraded, None, None);
        }
    }

    fn plant_events(
        &mut self,
        tick: u64,
        plant: &Plant,
        events: &[PlantEvent],
        steps: &mut Vec<StepSummary>,
    ) -> Option<(f64, FallReason)> {
        let mut fall = None;
        for e in events {
            match *e {
                PlantEvent::Step {
                    time,
                    foot,
                    duration,
                    com,
                } => {
                    steps.push(StepSummary {
                        index: steps.len(),
                        time,
                        duration,
                        foot,
                        com,
                    });
                    self.trace.push(TraceRecord {
                        tick,
                        time,
                        event: TraceEvent::Step,
                        source: None,
                        seq: None,
                        feasible: None,
                        objective: None,
                        com,
                        foot,
                        dt_remaining: duration,
                    });
                }
                PlantEvent::Fell { time, reason } => {
                    fall = Some((time, reason));
                    self.record(tick, plant, TraceEvent::Fall, None, None);
                }
            }
        }
        fall
    }
}

/// Runs a scenario to completion or until the plant falls.
pub fn run(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.clock.validate()?;
    cfg.planner.problem.constraints.validate()?;
    match cfg.clock.mode {
        ClockMode::Virtual => run_virtual(scenario, cfg),
        ClockMode::Wall => run_wall(scenario, cfg),
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "worker panicked".into())
}

fn run_virtual(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutcome> {
    let clock = &cfg.clock;
    let dt = clock.plant_period;
    let total = (scenario.duration / dt).round() as u64;
    let mut plant = initial_plant(scenario, cfg);
    let mut solvers = Solvers {
        cfg,
        scenario,
        last_rk4: None,
        last_gd: None,
    };
    let mut arb = Arbiter {
        trace: Vec::new(),
        accepted: Vec::new(),
        seq: 0,
        latest_feasible_rk4: None,
    };
    let mut steps = Vec::new();
    let mut pending: Vec<(u64, SolverResult)> = Vec::new();
    let mut fall = None;
    let mut worker_failure = None;

    let use_rk4 = matches!(scenario.planner, PlannerKind::Arto | PlannerKind::Rk4Only)
        && !cfg.faults.disable_rk4;
    let use_gd = scenario.planner == PlannerKind::Arto && !cfg.faults.disable_gd;
    let use_baseline = scenario.planner == PlannerKind::Baseline;

    // Bootstrap: a plan is needed before the first tick.
    let boot = if scenario.planner == PlannerKind::Baseline {
        solvers.baseline(&plant)
    } else {
        solvers.rk4(&plant)
    };
    if boot.usable() && boot.plan.source == PlanSource::Rk4 {
        arb.latest_feasible_rk4 = Some(boot.clone());
    }
    if !arb.try_accept(0, &mut plant, &boot, TraceEvent::Accept) {
        return Err(ArtoError::NotReady);
    }

    for tick in 0..total {
        // Plant.
        let mut due = Vec::new();
        pending.retain(|(at, r)| {
            if *at == tick {
                due.push(r.clone());
                false
            } else {
                true
            }
        });
        arb.deliver(tick, &mut plant, &due);
        let events = plant.tick(dt);
        if let Some(f) = arb.plant_events(tick, &plant, &events, &mut steps) {
            fall = Some(f);
            break;
        }
        if cfg.record_states {
            arb.record(tick, &plant, TraceEvent::State, None, None);
        }

        // Descent worker.
        if use_gd && tick % clock.gd_period == 0 {
            if let Some(r) = solvers.gd(&plant) {
                pending.push((tick + clock.gd_latency, r));
            }
        }
        // RK4 worker.
        if use_rk4 && tick % clock.rk4_period == 0 {
            let t = plant.state.time;
            let inject = cfg.faults.panic_rk4_at.is_some_and(|p| t >= p);
            match catch_unwind(AssertUnwindSafe(|| {
                if inject {
                    panic!("injected RK4 worker fault");
                }
                solvers.rk4(&plant)
            })) {
                Ok(r) => pending.push((tick + clock.rk4_latency, r)),
                Err(p) => {
                    let msg = panic_message(p);
                    arb.record(tick, &plant, TraceEvent::WorkerFailure, None, None);
                    worker_failure = Some(msg);
                    break;
                }
            }
        }
        if use_baseline && tick % clock.baseline_period == 0 {
            let r = solvers.baseline(&plant);
            pending.push((tick + clock.baseline_latency, r));
        }
    }

    Ok(RunOutcome {
        trace: arb.trace,
        steps,
        fall,
        accepted: arb.accepted,
        worker_failure,
        gd_budget: None,
        final_com: plant.state.com,
    })
}

/// What the workers see of the plant.
#[derive(Debug, Clone)]
struct Snapshot {
    state: PlanningState,
    time: f64,
    steps: usize,
    current: Option<FootstepPlan>,
}

fn run_wall(scenario: &Scenario, cfg: &RunConfig) -> Result<RunOutcome> {
    let clock = cfg.clock;
    let dt = clock.plant_period;
    let total = (scenario.duration / dt).round() as u64;
    let mut plant = initial_plant(scenario, cfg);
    let exchange = Arc::new(PlanExchange::default());
    let snap = Arc::new(LatestSlot::<Snapshot>::new());
    let stop = Arc::new(AtomicBool::new(false));
    let mut arb = Arbiter {
        trace: Vec::new(),
        accepted: Vec::new(),
        seq: 0,
        latest_feasible_rk4: None,
    };
    let mut steps = Vec::new();

    let mut boot_solvers = Solvers {
        cfg,
        scenario,
        last_rk4: None,
        last_gd: None,
    };
    let boot = if scenario.planner == PlannerKind::Baseline {
        boot_solvers.baseline(&plant)
    } else {
        boot_solvers.rk4(&plant)
    };
    if boot.usable() && boot.plan.source == PlanSource::Rk4 {
        arb.latest_feasible_rk4 = Some(boot.clone());
    }
    if !arb.try_accept(0, &mut plant, &boot, TraceEvent::Accept) {
        return Err(ArtoError::NotReady);
    }
    let publish_snapshot = |plant: &Plant| {
        snap.publish(Snapshot {
            state: plant.planning_state(),
            time: plant.state.time,
            steps: plant.state.steps,
            current: plant.current_plan(),
        });
    };
    publish_snapshot(&plant);

    let use_rk4 = matches!(scenario.planner, PlannerKind::Arto | PlannerKind::Rk4Only)
        && !cfg.faults.disable_rk4;
    let use_gd = scenario.planner == PlannerKind::Arto && !cfg.faults.disable_gd;
    let use_baseline = scenario.planner == PlannerKind::Baseline;
    let period = |ticks: u64| Duration::from_secs_f64(ticks as f64 * dt);

    let worker = |source: PlanSource, every: Duration| {
        let exchange = Arc::clone(&exchange);
        let snap = Arc::clone(&snap);
        let stop = Arc::clone(&stop);
        let scenario = scenario.clone();
        let cfg = *cfg;
        thread::spawn(move || -> (usize, usize) {
            let mut last_rk4: Option<SolverResult> = None;
            let (mut within, mut count) = (0, 0);
            let mut next = Instant::now();
            while !stop.load(Ordering::Acquire) {
                let Some(s) = snap.latest() else {
                    thread::yield_now();
                    continue;
                };
                let s = s.value;
                let started = Instant::now();
                let reference = scenario.reference_at(s.time);
                let p = &cfg.planner;
                let result = match source {
                    PlanSource::GradientDescent => s.current.as_ref().map(|start| {
                        let d = descend(start, &s.state, &reference, &p.problem, &p.descent);
                        SolverResult {
                            plan: d.solution.plan,
                            computed_at: s.time,
                            computed_steps: s.steps,
                            objective: d.solution.objective,
                            rejected: d.rejected,
                        }
                    }),
                    PlanSource::Rk4 => {
                        if cfg.faults.panic_rk4_at.is_some_and(|t| s.time >= t) {
                            panic!("injected RK4 worker fault");
                        }
                        let warm = last_rk4.as_ref().and_then(|prev| {
                            match s.steps.checked_sub(prev.computed_steps) {
                                Some(0) => Some(WarmStart {
                                    previous: prev.plan.clone(),
                                    elapsed: s.time - prev.computed_at,
                                    step_taken: false,
                                }),
                                Some(1) => Some(WarmStart {
                                    previous: prev.plan.clone(),
                                    elapsed: prev.plan.durations[0] + s.state.time_in_step,
                                    step_taken: true,
                                }),
                                _ => None,
                            }
                        });
                        let sol = rk4_solve(
                            &s.state,
                            &reference,
                            &p.problem,
                            warm.as_ref(),
                            p.half_width,
                            &p.sqp,
                        );
                        let r = SolverResult {
                            plan: sol.plan,
                            computed_at: s.time,
                            computed_steps: s.steps,
                            objective: sol.objective,
                            rejected: false,
                        };
                        last_rk4 = Some(r.clone());
                        Some(r)
                    }
                    PlanSource::Baseline => {
                        let plan = solve_baseline(&s.state, &reference, &p.problem, &p.baseline);
                        Some(SolverResult {
                            plan,
                            computed_at: s.time,
                            computed_steps: s.steps,
                            objective: f64::NAN,
                            rejected: false,
                        })
                    }
                };
                count += 1;
                if started.elapsed() <= every {
                    within += 1;
                }
                if let Some(r) = result {
                    exchange.slot(source).publish(r);
                }
                next += every;
                let now = Instant::now();
                if next > now {
                    thread::sleep(next - now);
                } else {
                    next = now;
                }
            }
            (within, count)
        })
    };

    let mut handles = Vec::new();
    if use_gd {
        handles.push((
            PlanSource::GradientDescent,
            worker(PlanSource::GradientDescent, period(clock.gd_period)),
        ));
    }
    if use_rk4 {
        handles.push((
            PlanSource::Rk4,
            worker(PlanSource::Rk4, period(clock.rk4_period)),
        ));
    }
    if use_baseline {
        handles.push((
            PlanSource::Baseline,
            worker(PlanSource::Baseline, period(clock.baseline_period)),
        ));
    }

    let mut seen = [0u64; 3];
    let mut fall = None;
    let mut worker_failure = None;
    let started = Instant::now();
    for tick in 0..total {
        let mut due = Vec::new();
        for (i, src) in [
            PlanSource::GradientDescent,
            PlanSource::Rk4,
            PlanSource::Baseline,
        ]
        .into_iter()
        .enumerate()
        {
            if let Some(s) = exchange.slot(src).latest() {
                if s.seq > seen[i] {
                    seen[i] = s.seq;
                    due.push(s.value);
                }
            }
        }
        arb.deliver(tick, &mut plant, &due);
        let events = plant.tick(dt);
        publish_snapshot(&plant);
        if let Some(f) = arb.plant_events(tick, &plant, &events, &mut steps) {
            fall = Some(f);
            break;
        }
        if cfg.record_states {
            arb.record(tick, &plant, TraceEvent::State, None, None);
        }
        if handles.iter().any(|(_, h)| h.is_finished()) {
            break;
        }
        let deadline = started + Duration::from_secs_f64((tick + 1) as f64 * dt);
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
    }
    stop.store(true, Ordering::Release);
    let mut gd_budget = None;
    for (src, h) in handles {
        match h.join() {
            Ok(b) if src == PlanSource::GradientDescent => gd_budget = Some(b),
            Ok(_) => {}
            Err(p) => {
                arb.record(
                    plant_tick(&plant, dt),
                    &plant,
                    TraceEvent::WorkerFailure,
                    None,
                    None,
                );
                worker_failure = Some(panic_message(p));
            }
        }
    }
    Ok(RunOutcome {
        trace: arb.trace,
        steps,
        fall,
        accepted: arb.accepted,
        worker_failure,
        gd_budget,
        final_com: plant.state.com,
    })
}

fn plant_tick(plant: &Plant, dt: f64) -> u64 {
    (plant.state.time / dt).round() as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(planner: PlannerKind) -> Scenario {
        let mut s = Scenario::stationary(planner, 1.0, 0.15);
        s.references = vec![(0.0, Reference::new(0.1, 0.0))];
        s
    }

    #[test]
    fn arbitration_prefers_newest_and_descent_on_ties() {
        let plan = |src| FootstepPlan {
            feet: vec![FootPosition::default(); 2],
            durations: vec![0.3; 3],
            stance: Side::Left,
            source: src,
            feasible: true,
        };
        let mk = |src, t| SolverResult {
            plan: plan(src),
            computed_at: t,
            computed_steps: 0,
            objective: 0.0,
            rejected: false,
        };
        let (a, b) = (
            mk(PlanSource::Rk4, 0.1),
            mk(PlanSource::GradientDescent, 0.1),
        );
        assert_eq!(
            arbitrate(&[&a, &b]).unwrap().plan.source,
            PlanSource::GradientDescent
        );
        let c = mk(PlanSource::Rk4, 0.2);
        assert_eq!(arbitrate(&[&b, &c]).unwrap().plan.source, PlanSource::Rk4);
        let mut bad = mk(PlanSource::GradientDescent, 0.3);
        bad.rejected = true;
        assert_eq!(arbitrate(&[&bad, &a]).unwrap().plan.source, PlanSource::Rk4);
        assert!(arbitrate(&[&bad]).is_none());
    }

    #[test]
    fn virtual_runs_are_deterministic() {
        let cfg = RunConfig::default();
        let a = run(&short(PlannerKind::Arto), &cfg).unwrap();
        let b = run(&short(PlannerKind::Arto), &cfg).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        write_trace_csv(&a.trace, &mut x).unwrap();
        write_trace_csv(&b.trace, &mut y).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn sequence_numbers_are_monotone_and_plans_feasible() {
        let out = run(&short(PlannerKind::Arto), &RunConfig::default()).unwrap();
        let seqs: Vec<u64> = out.trace.iter().filter_map(|r| r.seq).collect();
        assert!(seqs.windows(2).all(|w| w[0] < w[1]));
        assert!(out.accepted.iter().all(|a| a.result.plan.feasible));
    }

    #[test]
    fn worker_panic_aborts_cleanly() {
        let cfg = RunConfig {
            faults: FaultInjection {
                panic_rk4_at: Some(0.2),
                ..Default::default()
            },
            ..Default::default()
        };
        let out = run(&short(PlannerKind::Rk4Only), &cfg).unwrap();
        assert!(out.worker_failure.is_some());
        assert_eq!(out.trace.last().unwrap().event, TraceEvent::WorkerFailure);
    }

    #[test]
    fn trace_header_matches_columns() {
        let out = run(&short(PlannerKind::Baseline), &RunConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(&out.trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let cols = TRACE_HEADER.split(',').count();
        assert!(text.lines().all(|l| l.split(',').count() == cols));
    }
}
