//! Flat `key = value` configuration covering every tunable, plus scenario
//! files in the same syntax.
//!
//! Blank lines and text after `#` are ignored. Unknown keys are errors. List
//! values are separated by `;`.

use std::path::Path;

use crate::error::{ArtoError, Result};
use crate::experiments::{ExperimentConfig, SweepSpec};
use crate::lip::{ComState, FootPosition, LipParams};
use crate::orchestrator::{ClockMode, PlannerKind, Scenario};
use crate::problem::{Reference, Side};
use crate::sim::{Impulse, PUSH_MASS};

/// Settings of the integrator accuracy study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyConfig {
    pub h: f64,
    pub initial_offset: f64,
    pub horizon: f64,
    pub resolution: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            h: 0.6,
            initial_offset: 1e-3,
            horizon: 1.0,
            resolution: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Holds the run configuration used by every command.
    pub experiment: ExperimentConfig,
    pub push_sweep: SweepSpec,
    pub velocity_sweep: SweepSpec,
    pub study: StudyConfig,
    /// Seeds the random draws of `check`.
    pub seed: u64,
    pub check_samples: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            experiment: ExperimentConfig::default(),
            push_sweep: SweepSpec::push(),
            velocity_sweep: SweepSpec::velocity(),
            study: StudyConfig::default(),
            seed: 0,
            check_samples: 100,
        }
    }
}

fn bad(key: &str, value: &str, what: &str) -> ArtoError {
    ArtoError::Config(format!("{key}: cannot parse '{value}' as {what}"))
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.parse().map_err(|_| bad(key, v, "a number"))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn parse_u64(key: &str, v: &str) -> Result<u64> {
    v.parse().map_err(|_| bad(key, v, "a non-negative integer"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(key, v, "a boolean")),
    }
}

fn parse_side(key: &str, v: &str) -> Result<Side> {
    match v {
        "left" => Ok(Side::Left),
        "right" => Ok(Side::Right),
        _ => Err(bad(key, v, "left or right")),
    }
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(';').map(str::trim).filter(|s| !s.is_empty())
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(";")
}

/// Every config key with its help text.
pub const KEYS: &[(&str, &str)] = &[
    ("g", "gravity, m/s^2"),
    ("h", "CoM height, m"),
    ("w_vx", "sagittal velocity-error weight"),
    ("w_vy", "lateral velocity-error weight"),
    ("horizon", "planned footsteps (>= 1)"),
    (
        "l_max",
        "leg reach, m (planner constraint and plant fall test)",
    ),
    ("r_foot", "minimum lateral foot separation, m"),
    ("t_lower", "shortest step, s"),
    ("t_upper", "longest step, s"),
    ("penalty_weight_reach", "soft-constraint weight, reach"),
    (
        "penalty_weight_crossing",
        "soft-constraint weight, foot crossing",
    ),
    (
        "penalty_weight_duration",
        "soft-constraint weight, step duration",
    ),
    (
        "penalty_scale_reach",
        "soft-constraint length scale, reach, m",
    ),
    (
        "penalty_scale_crossing",
        "soft-constraint length scale, crossing, m",
    ),
    (
        "penalty_scale_duration",
        "soft-constraint time scale, duration, s",
    ),
    (
        "penalty_scale_remaining",
        "time scale of d0 >= 0 once t_lower has passed, s",
    ),
    ("sqp_max_iterations", "RK4 optimizer iteration cap"),
    ("sqp_feasibility_tol", "RK4 optimizer constraint tolerance"),
    ("sqp_optimality_tol", "RK4 optimizer step tolerance"),
    (
        "sqp_reach_margin",
        "reach tightening inside the RK4 optimizer, m",
    ),
    (
        "sqp_margin_scales",
        "constraint tightening in penalty scales",
    ),
    ("sqp_initial_box", "initial trust-region half width"),
    ("gd_max_steps", "descent steps per solve"),
    ("gd_initial_step", "first line-search step length"),
    ("gd_shrink", "line-search backtracking factor"),
    ("gd_armijo", "Armijo sufficient-decrease constant"),
    ("gd_max_backtracks", "line-search halvings before giving up"),
    (
        "grad_reject",
        "gradient components above this reject the descent",
    ),
    ("gd_grad_tol", "descent stops below this gradient norm"),
    ("gd_feasibility_tol", "descent result feasibility tolerance"),
    ("baseline_fixed_dt", "baseline step duration, s"),
    (
        "baseline_box_half_width",
        "baseline reach box half width, m, or none",
    ),
    ("assist_force", "baseline stationary-start push, N"),
    (
        "assist_duration",
        "baseline stationary-start push duration, s",
    ),
    ("half_width", "half the nominal lateral stance width, m"),
    ("speed_limit", "CoM speed counted as a fall, m/s"),
    (
        "degraded_limit",
        "time without an acceptable plan counted as a fall, s",
    ),
    ("swing_height", "swing-foot apex, m"),
    ("clock", "virtual or wall"),
    ("plant_period", "plant tick, s"),
    ("gd_period", "descent period, ticks"),
    ("rk4_period", "RK4 optimizer period, ticks"),
    ("baseline_period", "baseline period, ticks"),
    ("gd_latency", "descent result delay, ticks"),
    ("rk4_latency", "RK4 result delay, ticks"),
    ("baseline_latency", "baseline result delay, ticks"),
    ("disable_gd", "fault injection: never run the descent"),
    (
        "disable_rk4",
        "fault injection: never run the RK4 optimizer",
    ),
    (
        "record_states",
        "write a state row per plant tick to traces",
    ),
    ("settle", "stepping-in-place time before a disturbance, s"),
    ("window", "recovery window after a disturbance, s"),
    ("tolerance", "recovery velocity error threshold, m/s RMS"),
    ("push_duration", "push duration, s"),
    ("push_side", "stance foot during the push: left or right"),
    ("push_phase", "push time as a fraction of that stance"),
    ("sweep_planners", "planners to sweep, ;-separated"),
    ("sweep_angles", "directions per sweep"),
    (
        "sweep_phases",
        "push phases tried per direction, ;-separated",
    ),
    ("push_upper", "push sweep search bound, N"),
    ("push_resolution", "push sweep resolution, N"),
    ("vel_upper", "velocity sweep search bound, m/s"),
    ("vel_resolution", "velocity sweep resolution, m/s"),
    ("study_h", "integrator study CoM height, m"),
    ("study_offset", "integrator study initial CoM offset, m"),
    ("study_horizon", "integrator study length, s"),
    ("study_resolution", "integrator study sample spacing, s"),
    ("seed", "random seed for check"),
    ("check_samples", "random plans drawn by check"),
];

impl Config {
    /// Reads a config file over the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArtoError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)
            .map_err(|e| ArtoError::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (line, key, value) in entries(text)? {
            self.set(key, value)
                .map_err(|e| ArtoError::Config(format!("line {line}: {e}")))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let exp = &mut self.experiment;
        match key {
            "half_width" => {
                exp.half_width = parse_f64(key, v)?;
                exp.run.planner.half_width = exp.half_width;
            }
            "settle" => exp.settle = parse_f64(key, v)?,
            "window" => exp.window = parse_f64(key, v)?,
            "tolerance" => exp.tolerance = parse_f64(key, v)?,
            "push_duration" => exp.push_duration = parse_f64(key, v)?,
            "push_side" => exp.push_side = parse_side(key, v)?,
            "push_phase" => exp.push_phase = parse_f64(key, v)?,
            "sweep_planners" => {
                let p = list(v)
                    .map(str::parse)
                    .collect::<Result<Vec<PlannerKind>>>()?;
                self.push_sweep.planners = p.clone();
                self.velocity_sweep.planners = p;
            }
            "sweep_angles" => {
                let n = parse_usize(key, v)?;
                self.push_sweep.angles = n;
                self.velocity_sweep.angles = n;
            }
            "sweep_phases" => {
                let p = list(v)
                    .map(|s| parse_f64(key, s))
                    .collect::<Result<Vec<_>>>()?;
                self.push_sweep.phases = p.clone();
                self.velocity_sweep.phases = p;
            }
            "push_upper" => self.push_sweep.upper = parse_f64(key, v)?,
            "push_resolution" => self.push_sweep.resolution = parse_f64(key, v)?,
            "vel_upper" => self.velocity_sweep.upper = parse_f64(key, v)?,
            "vel_resolution" => self.velocity_sweep.resolution = parse_f64(key, v)?,
            "study_h" => self.study.h = parse_f64(key, v)?,
            "study_offset" => self.study.initial_offset = parse_f64(key, v)?,
            "study_horizon" => self.study.horizon = parse_f64(key, v)?,
            "study_resolution" => self.study.resolution = parse_f64(key, v)?,
            "seed" => self.seed = parse_u64(key, v)?,
            "check_samples" => self.check_samples = parse_usize(key, v)?,
            _ => return self.set_run(key, v),
        }
        Ok(())
    }

    fn set_run(&mut self, key: &str, v: &str) -> Result<()> {
        let run = &mut self.experiment.run;
        let planner = &mut run.planner;
        let problem = &mut planner.problem;
        let c = &mut problem.constraints;
        let pen = &mut c.penalties;
        let sqp = &mut planner.sqp;
        let gd = &mut planner.descent;
        let base = &mut planner.baseline;
        let plant = &mut run.plant;
        let clock = &mut run.clock;
        match key {
            "g" | "h" => {
                let x = parse_f64(key, v)?;
                let lip = &problem.lip;
                let (g, h) = if key == "g" {
                    (x, lip.h())
                } else {
                    (lip.g(), x)
                };
                let lip = LipParams::new(g, h)?;
                problem.lip = lip;
                plant.lip = lip;
            }
            "w_vx" => problem.weights.wx = parse_f64(key, v)?,
            "w_vy" => problem.weights.wy = parse_f64(key, v)?,
            "horizon" => problem.horizon = parse_usize(key, v)?,
            "l_max" => {
                c.l_max = parse_f64(key, v)?;
                plant.l_max = c.l_max;
            }
            "r_foot" => c.r_foot = parse_f64(key, v)?,
            "t_lower" => c.t_lower = parse_f64(key, v)?,
            "t_upper" => c.t_upper = parse_f64(key, v)?,
            "penalty_weight_reach" => pen.weight_reach = parse_f64(key, v)?,
            "penalty_weight_crossing" => pen.weight_crossing = parse_f64(key, v)?,
            "penalty_weight_duration" => pen.weight_duration = parse_f64(key, v)?,
            "penalty_scale_reach" => pen.scale_reach = parse_f64(key, v)?,
            "penalty_scale_crossing" => pen.scale_crossing = parse_f64(key, v)?,
            "penalty_scale_duration" => pen.scale_duration = parse_f64(key, v)?,
            "penalty_scale_remaining" => pen.scale_remaining = parse_f64(key, v)?,
            "sqp_max_iterations" => sqp.max_iterations = parse_usize(key, v)?,
            "sqp_feasibility_tol" => sqp.feasibility_tol = parse_f64(key, v)?,
            "sqp_optimality_tol" => sqp.optimality_tol = parse_f64(key, v)?,
            "sqp_reach_margin" => sqp.reach_margin = parse_f64(key, v)?,
            "sqp_margin_scales" => sqp.margin_scales = parse_f64(key, v)?,
            "sqp_initial_box" => sqp.initial_box = parse_f64(key, v)?,
            "gd_max_steps" => gd.max_steps = parse_usize(key, v)?,
            "gd_initial_step" => gd.initial_step = parse_f64(key, v)?,
            "gd_shrink" => gd.shrink = parse_f64(key, v)?,
            "gd_armijo" => gd.armijo = parse_f64(key, v)?,
            "gd_max_backtracks" => gd.max_backtracks = parse_usize(key, v)?,
            "grad_reject" => gd.grad_reject = parse_f64(key, v)?,
            "gd_grad_tol" => gd.grad_tol = parse_f64(key, v)?,
            "gd_feasibility_tol" => gd.feasibility_tol = parse_f64(key, v)?,
            "baseline_fixed_dt" => base.fixed_dt = parse_f64(key, v)?,
            "baseline_box_half_width" => {
                base.box_half_width = match v {
                    "none" => None,
                    _ => Some(parse_f64(key, v)?),
                }
            }
            "assist_force" => base.assist_force = parse_f64(key, v)?,
            "assist_duration" => base.assist_duration = parse_f64(key, v)?,
            "speed_limit" => plant.speed_limit = parse_f64(key, v)?,
            "degraded_limit" => plant.degraded_limit = parse_f64(key, v)?,
            "swing_height" => plant.swing_height = parse_f64(key, v)?,
            "clock" => clock.mode = v.parse::<ClockMode>()?,
            "plant_period" => clock.plant_period = parse_f64(key, v)?,
            "gd_period" => clock.gd_period = parse_u64(key, v)?,
            "rk4_period" => clock.rk4_period = parse_u64(key, v)?,
            "baseline_period" => clock.baseline_period = parse_u64(key, v)?,
            "gd_latency" => clock.gd_latency = parse_u64(key, v)?,
            "rk4_latency" => clock.rk4_latency = parse_u64(key, v)?,
            "baseline_latency" => clock.baseline_latency = parse_u64(key, v)?,
            "disable_gd" => run.faults.disable_gd = parse_bool(key, v)?,
            "disable_rk4" => run.faults.disable_rk4 = parse_bool(key, v)?,
            "record_states" => run.record_states = parse_bool(key, v)?,
            _ => return Err(ArtoError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    /// Current value of `key` in the syntax `set` accepts.
    pub fn get(&self, key: &str) -> Option<String> {
        let run = &self.experiment.run;
        let planner = &run.planner;
        let problem = &planner.problem;
        let c = &problem.constraints;
        let pen = &c.penalties;
        let sqp = &planner.sqp;
        let gd = &planner.descent;
        let base = &planner.baseline;
        let plant = &run.plant;
        let clock = &run.clock;
        let exp = &self.experiment;
        let s = match key {
            "g" => problem.lip.g().to_string(),
            "h" => problem.lip.h().to_string(),
            "w_vx" => problem.weights.wx.to_string(),
            "w_vy" => problem.weights.wy.to_string(),
            "horizon" => problem.horizon.to_string(),
            "l_max" => c.l_max.to_string(),
            "r_foot" => c.r_foot.to_string(),
            "t_lower" => c.t_lower.to_string(),
            "t_upper" => c.t_upper.to_string(),
            "penalty_weight_reach" => pen.weight_reach.to_string(),
            "penalty_weight_crossing" => pen.weight_crossing.to_string(),
            "penalty_weight_duration" => pen.weight_duration.to_string(),
            "penalty_scale_reach" => pen.scale_reach.to_string(),
            "penalty_scale_crossing" => pen.scale_crossing.to_string(),
            "penalty_scale_duration" => pen.scale_duration.to_string(),
            "penalty_scale_remaining" => pen.scale_remaining.to_string(),
            "sqp_max_iterations" => sqp.max_iterations.to_string(),
            "sqp_feasibility_tol" => sqp.feasibility_tol.to_string(),
            "sqp_optimality_tol" => sqp.optimality_tol.to_string(),
            "sqp_reach_margin" => sqp.reach_margin.to_string(),
            "sqp_margin_scales" => sqp.margin_scales.to_string(),
            "sqp_initial_box" => sqp.initial_box.to_string(),
            "gd_max_steps" => gd.max_steps.to_string(),
            "gd_initial_step" => gd.initial_step.to_string(),
            "gd_shrink" => gd.shrink.to_string(),
            "gd_armijo" => gd.armijo.to_string(),
            "gd_max_backtracks" => gd.max_backtracks.to_string(),
            "grad_reject" => gd.grad_reject.to_string(),
            "gd_grad_tol" => gd.grad_tol.to_string(),
            "gd_feasibility_tol" => gd.feasibility_tol.to_string(),
            "baseline_fixed_dt" => base.fixed_dt.to_string(),
            "baseline_box_half_width" => {
                base.box_half_width.map_or("none".into(), |w| w.to_string())
            }
            "assist_force" => base.assist_force.to_string(),
            "assist_duration" => base.assist_duration.to_string(),
            "half_width" => planner.half_width.to_string(),
            "speed_limit" => plant.speed_limit.to_string(),
            "degraded_limit" => plant.degraded_limit.to_string(),
            "swing_height" => plant.swing_height.to_string(),
            "clock" => match clock.mode {
                ClockMode::Virtual => "virtual".into(),
                ClockMode::Wall => "wall".into(),
            },
            "plant_period" => clock.plant_period.to_string(),
            "gd_period" => clock.gd_period.to_string(),
            "rk4_period" => clock.rk4_period.to_string(),
            "baseline_period" => clock.baseline_period.to_string(),
            "gd_latency" => clock.gd_latency.to_string(),
            "rk4_latency" => clock.rk4_latency.to_string(),
            "baseline_latency" => clock.baseline_latency.to_string(),
            "disable_gd" => run.faults.disable_gd.to_string(),
            "disable_rk4" => run.faults.disable_rk4.to_string(),
            "record_states" => run.record_states.to_string(),
            "settle" => exp.settle.to_string(),
            "window" => exp.window.to_string(),
            "tolerance" => exp.tolerance.to_string(),
            "push_duration" => exp.push_duration.to_string(),
            "push_side" => exp.push_side.name().into(),
            "push_phase" => exp.push_phase.to_string(),
            "sweep_planners" => join(&self.push_sweep.planners),
            "sweep_angles" => self.push_sweep.angles.to_string(),
            "sweep_phases" => join(&self.push_sweep.phases),
            "push_upper" => self.push_sweep.upper.to_string(),
            "push_resolution" => self.push_sweep.resolution.to_string(),
            "vel_upper" => self.velocity_sweep.upper.to_string(),
            "vel_resolution" => self.velocity_sweep.resolution.to_string(),
            "study_h" => self.study.h.to_string(),
            "study_offset" => self.study.initial_offset.to_string(),
            "study_horizon" => self.study.horizon.to_string(),
            "study_resolution" => self.study.resolution.to_string(),
            "seed" => self.seed.to_string(),
            "check_samples" => self.check_samples.to_string(),
            _ => return None,
        };
        Some(s)
    }

    pub fn validate(&self) -> Result<()> {
        let run = &self.experiment.run;
        let problem = &run.planner.problem;
        if problem.horizon == 0 {
            return Err(ArtoError::Config("horizon: must be at least 1".into()));
        }
        problem.constraints.validate()?;
        run.clock.validate()?;
        self.experiment.validate()?;
        self.push_sweep.validate()?;
        self.velocity_sweep.validate()?;
        let p = &run.planner;
        for (name, v) in [
            ("half_width", p.half_width),
            ("baseline_fixed_dt", p.baseline.fixed_dt),
            ("speed_limit", run.plant.speed_limit),
            ("degraded_limit", run.plant.degraded_limit),
            ("grad_reject", p.descent.grad_reject),
            ("study_horizon", self.study.horizon),
            ("study_resolution", self.study.resolution),
        ] {
            if !(v > 0.0) {
                return Err(ArtoError::Config(format!("{name}: must be positive")));
            }
        }
        LipParams::new(9.81, self.study.h)?;
        Ok(())
    }

    /// The whole configuration as a loadable file.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (key, help) in KEYS {
            let value = self.get(key).expect("every listed key has a value");
            s.push_str(&format!("# {help}\n{key} = {value}\n"));
        }
        s
    }
}

/// `(line number, key, value)` for every assignment in `text`.
fn entries(text: &str) -> Result<Vec<(usize, &str, &str)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(ArtoError::Config(format!(
                "line {}: expected key = value",
                i + 1
            )));
        };
        out.push((i + 1, k.trim(), v.trim()));
    }
    Ok(out)
}

/// Keys accepted in scenario files.
pub const SCENARIO_KEYS: &[(&str, &str)] = &[
    ("planner", "arto, rk4 or baseline"),
    ("duration", "simulated time, s"),
    ("com", "initial CoM 'x y vx vy'"),
    (
        "foot",
        "initial support foot 'x y' (default: 0 and half_width)",
    ),
    ("side", "initial support side"),
    ("reference", "velocity references 't vx vy', ;-separated"),
    (
        "push",
        "pushes 'start force_N angle_rad duration_s', ;-separated",
    ),
    ("assist", "apply the baseline stationary-start push"),
    (
        "standing",
        "start at rest: the first step skips the minimum step time (default true)",
    ),
    ("must_pass", "a fall makes the run command fail"),
];

/// A scenario plus whether falling counts as a failure of the command.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioFile {
    pub scenario: Scenario,
    pub must_pass: bool,
}

fn numbers<const N: usize>(key: &str, v: &str) -> Result<[f64; N]> {
    let parts: Vec<&str> = v.split_whitespace().collect();
    if parts.len() != N {
        return Err(ArtoError::Config(format!(
            "{key}: expected {N} numbers, got '{v}'"
        )));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(key, p)?;
    }
    Ok(out)
}

impl ScenarioFile {
    pub fn load(path: &Path, half_width: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ArtoError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, half_width)
            .map_err(|e| ArtoError::Config(format!("{}: {e}", path.display())))
    }

    /// Unset keys default to a 10 s ARTO run from rest.
    pub fn parse(text: &str, half_width: f64) -> Result<Self> {
        let mut s = Scenario::stationary(PlannerKind::Arto, 10.0, half_width);
        let mut must_pass = false;
        for (line, key, v) in entries(text)? {
            let wrap = |e: ArtoError| ArtoError::Config(format!("line {line}: {e}"));
            match key {
                "planner" => s.planner = v.parse().map_err(wrap)?,
                "duration" => s.duration = parse_f64(key, v).map_err(wrap)?,
                "com" => {
                    s.com = ComState::from_array(numbers::<4>(key, v).map_err(wrap)?);
                }
                "foot" => {
                    let [x, y] = numbers::<2>(key, v).map_err(wrap)?;
                    s.foot = FootPosition::new(x, y);
                }
                "side" => s.side = parse_side(key, v).map_err(wrap)?,
                "reference" => {
                    s.references = list(v)
                        .map(|r| {
                            numbers::<3>(key, r).map(|[t, vx, vy]| (t, Reference::new(vx, vy)))
                        })
                        .collect::<Result<_>>()
                        .map_err(wrap)?;
                    s.references.sort_by(|a, b| a.0.total_cmp(&b.0));
                }
                "push" => {
                    s.impulses = list(v)
                        .map(|p| {
                            let [start, force, angle, duration] = numbers::<4>(key, p)?;
                            Impulse::new(force, angle, duration, start, PUSH_MASS)
                        })
                        .collect::<Result<_>>()
                        .map_err(wrap)?;
                }
                "assist" => s.assist = parse_bool(key, v).map_err(wrap)?,
                "standing" => s.standing = parse_bool(key, v).map_err(wrap)?,
                "must_pass" => must_pass = parse_bool(key, v).map_err(wrap)?,
                _ => {
                    return Err(wrap(ArtoError::Config(format!(
                        "unknown scenario key '{key}'"
                    ))))
                }
            }
        }
        if !(s.duration > 0.0) {
            return Err(ArtoError::Config("duration: must be positive".into()));
        }
        if !s.com.is_finite() || !s.foot.is_finite() {
            return Err(ArtoError::NonFinite("scenario initial state"));
        }
        Ok(Self {
            scenario: s,
            must_pass,
        })
    }
}
