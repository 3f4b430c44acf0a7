//! Push-recovery traces and the polar envelope sweeps.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::io::{self, Write};

use rayon::prelude::*;

use crate::error::{invalid, Result};
use crate::orchestrator::{run, PlannerKind, RunConfig, RunOutcome, Scenario, StepSummary};
use crate::problem::{Reference, Side};
use crate::sim::{Impulse, PUSH_MASS};

/// Settings shared by the push and velocity experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    /// Half the lateral stance width when stepping in place, m.
    pub half_width: f64,
    /// Stepping-in-place time before any disturbance, s.
    pub settle: f64,
    /// Time after the disturbance over which recovery is judged, s.
    pub window: f64,
    /// RMS velocity error allowed over the last second of the window, m/s.
    pub tolerance: f64,
    pub push_duration: f64,
    /// Pushes land during a stance phase of this foot...
    pub push_side: Side,
    /// ...at this fraction of the way through it.
    pub push_phase: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            run: RunConfig {
                record_states: false,
                ..RunConfig::default()
            },
            half_width: 0.15,
            settle: 2.0,
            window: 5.0,
            tolerance: 0.05,
            push_duration: 0.1,
            push_side: Side::Left,
            push_phase: 0.5,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.settle >= 0.0) {
            return Err(invalid("settle", "must be non-negative"));
        }
        if !(self.window > 1.0) {
            return Err(invalid("window", "must exceed the 1 s scoring interval"));
        }
        if !(self.tolerance > 0.0) {
            return Err(invalid("tolerance", "must be positive"));
        }
        if !(self.push_duration > 0.0) {
            return Err(invalid("push_duration", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.push_phase) {
            return Err(invalid("push_phase", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// At rest midway between the feet with zero reference. The baseline cannot
/// start from rest on its own, so it gets its assist push.
pub fn stepping_in_place(planner: PlannerKind, duration: f64, half_width: f64) -> Scenario {
    let mut s = Scenario::stationary(planner, duration, half_width);
    s.assist = planner == PlannerKind::Baseline;
    s
}

/// Support side after the step with this index; runs start on the left foot.
fn side_after(step: usize) -> Side {
    if step % 2 == 0 {
        Side::Right
    } else {
        Side::Left
    }
}

/// Start and duration of every completed stance phase.
fn stance_phases(steps: &[StepSummary]) -> Vec<(Side, f64, f64)> {
    let mut out = Vec::with_capacity(steps.len());
    let mut start = (Side::Left, 0.0);
    for s in steps {
        out.push((start.0, start.1, s.time - start.1));
        start = (side_after(s.index), s.time);
    }
    out
}

/// Time of the push: the configured phase of the first matching stance that
/// starts after the settle time in an undisturbed run. `None` if the
/// undisturbed run falls or never reaches such a stance.
pub fn push_time(planner: PlannerKind, cfg: &ExperimentConfig) -> Result<Option<f64>> {
    let dry = stepping_in_place(planner, cfg.settle + 3.0, cfg.half_width);
    let out = run(&dry, &cfg.run)?;
    if out.fall.is_some() {
        return Ok(None);
    }
    Ok(stance_phases(&out.steps)
        .into_iter()
        .find(|&(side, start, _)| side == cfg.push_side && start >= cfg.settle)
        .map(|(_, start, d)| start + cfg.push_phase * d))
}

/// Survival plus restored tracking. Lateral sway makes the instantaneous CoM
/// velocity oscillate while stepping in place, so the error is taken on the
/// mean of consecutive touchdown velocities, which cancels the alternation.
pub fn recovery_predicate(
    outcome: &RunOutcome,
    window_end: f64,
    reference: Reference,
    tolerance: f64,
) -> bool {
    if outcome.fall.is_some() || outcome.worker_failure.is_some() {
        return false;
    }
    velocity_error(&outcome.steps, window_end, reference).is_some_and(|e| e < tolerance)
}

/// RMS over touchdowns in the last second before `window_end` of the
/// two-step mean velocity error. `None` without at least one pair.
pub fn velocity_error(steps: &[StepSummary], window_end: f64, reference: Reference) -> Option<f64> {
    let errs: Vec<f64> = steps
        .windows(2)
        .filter(|w| w[1].time > window_end - 1.0 && w[1].time <= window_end)
        .map(|w| {
            let vx = 0.5 * (w[0].com.vx + w[1].com.vx) - reference.vx;
            let vy = 0.5 * (w[0].com.vy + w[1].com.vy) - reference.vy;
            vx * vx + vy * vy
        })
        .collect();
    if errs.is_empty() {
        return None;
    }
    Some((errs.iter().sum::<f64>() / errs.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disturbance {
    /// Newtons, applied for `push_duration`.
    Push,
    /// Step change of the velocity reference, m/s.
    Velocity,
}

impl Disturbance {
    pub fn units(self) -> &'static str {
        match self {
            Disturbance::Push => "N",
            Disturbance::Velocity => "m/s",
        }
    }
}

/// Runs one disturbed trial and scores it.
pub fn trial(
    planner: PlannerKind,
    kind: Disturbance,
    angle: f64,
    magnitude: f64,
    at: f64,
    cfg: &ExperimentConfig,
) -> Result<(bool, RunOutcome)> {
    let end = at + cfg.window;
    let mut s = stepping_in_place(planner, end, cfg.half_width);
    let reference = match kind {
        Disturbance::Push => {
            if magnitude > 0.0 {
                s.impulses.push(Impulse::new(
                    magnitude,
                    angle,
                    cfg.push_duration,
                    at,
                    PUSH_MASS,
                )?);
            }
            Reference::default()
        }
        Disturbance::Velocity => {
            let r = Reference::new(magnitude * angle.cos(), magnitude * angle.sin());
            s.references.push((at, r));
            r
        }
    };
    let out = run(&s, &cfg.run)?;
    Ok((recovery_predicate(&out, end, reference, cfg.tolerance), out))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub planners: Vec<PlannerKind>,
    pub angles: usize,
    pub upper: f64,
    pub resolution: f64,
    /// Push phases to try per angle; the envelope keeps the minimum.
    pub phases: Vec<f64>,
}

impl SweepSpec {
    pub fn push() -> Self {
        Self {
            planners: PlannerKind::ALL.to_vec(),
            angles: 16,
            upper: 750.0,
            resolution: 1.0,
            phases: vec![0.5],
        }
    }

    pub fn velocity() -> Self {
        Self {
            planners: PlannerKind::ALL.to_vec(),
            angles: 16,
            upper: 3.0,
            resolution: 0.01,
            phases: vec![0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.planners.is_empty() || self.angles == 0 {
            return Err(invalid("sweep", "needs at least one planner and one angle"));
        }
        if !(self.resolution > 0.0) || !(self.upper >= self.resolution) {
            return Err(invalid("sweep bounds", "need 0 < resolution <= upper"));
        }
        if self.phases.is_empty() || self.phases.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(invalid("phases", "need at least one phase in [0, 1]"));
        }
        Ok(())
    }

    pub fn angle(&self, i: usize) -> f64 {
        TAU * i as f64 / self.angles as f64
    }

    /// Grid steps in the search range.
    pub fn steps(&self) -> u64 {
        (self.upper / self.resolution).round() as u64
    }
}

/// Result of bisecting one direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopePoint {
    pub planner: PlannerKind,
    pub angle: f64,
    /// Largest magnitude that passed.
    pub max: f64,
    /// Even the zero disturbance failed.
    pub floor_failed: bool,
    pub runs: usize,
}

/// Largest `n` in `0..=top` with `pass(n)`, assuming pass/fail is monotone.
/// Returns `(n, floor_failed, evaluations)`.
pub fn bisect<F: FnMut(u64) -> Result<bool>>(top: u64, mut pass: F) -> Result<(u64, bool, usize)> {
    if !pass(0)? {
        return Ok((0, true, 1));
    }
    if pass(top)? {
        return Ok((top, false, 2));
    }
    let (mut lo, mut hi, mut runs) = (0, top, 2);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        runs += 1;
        if pass(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, false, runs))
}

fn sweep_point(
    planner: PlannerKind,
    kind: Disturbance,
    angle: f64,
    spec: &SweepSpec,
    cfg: &ExperimentConfig,
) -> Result<EnvelopePoint> {
    let mut best: Option<EnvelopePoint> = None;
    for &phase in &spec.phases {
        let cfg = ExperimentConfig {
            push_phase: phase,
            ..*cfg
        };
        let Some(at) = push_time(planner, &cfg)? else {
            return Ok(EnvelopePoint {
                planner,
                angle,
                max: 0.0,
                floor_failed: true,
                runs: 1,
            });
        };
        let (n, floor_failed, runs) = bisect(spec.steps(), |n| {
            trial(planner, kind, angle, n as f64 * spec.resolution, at, &cfg).map(|(ok, _)| ok)
        })?;
        let p = EnvelopePoint {
            planner,
            angle,
            max: n as f64 * spec.resolution,
            floor_failed,
            runs,
        };
        if best.is_none_or(|b| p.max < b.max) {
            best = Some(p);
        }
    }
    Ok(best.expect("at least one phase"))
}

/// Bisects every (planner, angle) pair in parallel. Output order is planner
/// then angle, independent of scheduling.
pub fn sweep(
    kind: Disturbance,
    spec: &SweepSpec,
    cfg: &ExperimentConfig,
) -> Result<Vec<EnvelopePoint>> {
    spec.validate()?;
    cfg.validate()?;
    let jobs: Vec<(PlannerKind, f64)> = spec
        .planners
        .iter()
        .flat_map(|&p| (0..spec.angles).map(move |i| (p, i)))
        .map(|(p, i)| (p, spec.angle(i)))
        .collect();
    jobs.par_iter()
        .map(|&(p, a)| sweep_point(p, kind, a, spec, cfg))
        .collect()
}

pub fn max_push_sweep(spec: &SweepSpec, cfg: &ExperimentConfig) -> Result<Vec<EnvelopePoint>> {
    sweep(Disturbance::Push, spec, cfg)
}

pub fn max_velocity_sweep(spec: &SweepSpec, cfg: &ExperimentConfig) -> Result<Vec<EnvelopePoint>> {
    sweep(Disturbance::Velocity, spec, cfg)
}

pub fn write_envelope_csv<W: Write>(
    points: &[EnvelopePoint],
    kind: Disturbance,
    mut out: W,
) -> io::Result<()> {
    writeln!(out, "planner,angle_rad,max_magnitude,units")?;
    for p in points {
        writeln!(out, "{},{},{},{}", p.planner, p.angle, p.max, kind.units())?;
    }
    Ok(())
}

/// Polar plot of the envelopes as a standalone SVG document.
pub fn envelope_svg(points: &[EnvelopePoint], kind: Disturbance, title: &str) -> String {
    const SIZE: f64 = 480.0;
    const R: f64 = 180.0;
    let c = SIZE / 2.0;
    let top = points
        .iter()
        .map(|p| p.max)
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{c}" y="20" text-anchor="middle">{title}</text>"#
    );
    for ring in 1..=4 {
        let r = R * ring as f64 / 4.0;
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{r}" fill="none" stroke="#ccc"/>"##
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" fill="#888">{:.2} {}</text>"##,
            c + 3.0,
            c - r - 2.0,
            top * ring as f64 / 4.0,
            kind.units()
        );
    }
    for k in 0..8 {
        let a = k as f64 * PI / 4.0;
        let _ = writeln!(
            s,
            r##"<line x1="{c}" y1="{c}" x2="{:.2}" y2="{:.2}" stroke="#eee"/>"##,
            c + R * a.cos(),
            c - R * a.sin()
        );
    }
    let colors = [
        ("arto", "#d62728"),
        ("rk4", "#1f77b4"),
        ("baseline", "#2ca02c"),
    ];
    for (i, (name, color)) in colors.iter().enumerate() {
        let mine: Vec<&EnvelopePoint> = points
            .iter()
            .filter(|p| p.planner.name() == *name)
            .collect();
        if mine.is_empty() {
            continue;
        }
        let path: Vec<String> = mine
            .iter()
            .map(|p| {
                let r = R * p.max / top;
                format!("{:.2},{:.2}", c + r * p.angle.cos(), c - r * p.angle.sin())
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        let y = SIZE - 60.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<rect x="16" y="{}" width="12" height="4" fill="{color}"/>"#,
            y - 4.0
        );
        let _ = writeln!(s, r#"<text x="34" y="{y}">{name}</text>"#);
    }
    s.push_str("</svg>\n");
    s
}

/// Envelope values for one planner, by angle index.
pub fn envelope_of(points: &[EnvelopePoint], planner: PlannerKind) -> Vec<f64> {
    points
        .iter()
        .filter(|p| p.planner == planner)
        .map(|p| p.max)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lip::{ComState, FootPosition};

    fn step(index: usize, time: f64, vx: f64, vy: f64) -> StepSummary {
        StepSummary {
            index,
            time,
            duration: 0.2,
            foot: FootPosition::default(),
            com: ComState {
                vx,
                vy,
                ..Default::default()
            },
        }
    }

    #[test]
    fn bisection_finds_threshold_in_logarithmic_runs() {
        for threshold in [0, 1, 7, 150, 299, 300] {
            let mut calls = 0;
            let (n, floor, runs) = bisect(300, |n| {
                calls += 1;
                Ok(n <= threshold)
            })
            .unwrap();
            assert_eq!((n, floor), (threshold, false));
            assert_eq!(runs, calls);
            assert!(runs <= 2 + 9, "{runs}");
        }
        let (n, floor, _) = bisect(300, |_| Ok(false)).unwrap();
        assert_eq!((n, floor), (0, true));
    }

    #[test]
    fn alternating_sway_cancels_in_velocity_error() {
        let steps: Vec<StepSummary> = (0..10)
            .map(|i| {
                step(
                    i,
                    0.2 * (i + 1) as f64,
                    0.1,
                    if i % 2 == 0 { 0.3 } else { -0.3 },
                )
            })
            .collect();
        let e = velocity_error(&steps, 2.0, Reference::new(0.1, 0.0)).unwrap();
        assert!(e < 1e-12);
        let e = velocity_error(&steps, 2.0, Reference::new(0.0, 0.0)).unwrap();
        assert!((e - 0.1).abs() < 1e-12);
        assert!(velocity_error(&steps, 10.0, Reference::default()).is_none());
    }

    #[test]
    fn stance_phases_alternate_from_left() {
        let steps: Vec<StepSummary> = (0..3)
            .map(|i| step(i, 0.3 * (i + 1) as f64, 0.0, 0.0))
            .collect();
        let phases = stance_phases(&steps);
        assert_eq!(
            phases.iter().map(|p| p.0).collect::<Vec<_>>(),
            [Side::Left, Side::Right, Side::Left]
        );
        assert!((phases[2].1 - 0.6).abs() < 1e-12 && (phases[2].2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn undisturbed_stepping_recovers() {
        let cfg = ExperimentConfig {
            settle: 1.0,
            window: 2.0,
            ..Default::default()
        };
        for planner in PlannerKind::ALL {
            let at = push_time(planner, &cfg)
                .unwrap()
                .expect("stance after settle");
            let (ok, out) = trial(planner, Disturbance::Push, 0.0, 0.0, at, &cfg).unwrap();
            assert!(ok, "{planner}: {:?}", out.fall);
        }
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let pts: Vec<EnvelopePoint> = (0..4)
            .map(|i| EnvelopePoint {
                planner: PlannerKind::Arto,
                angle: i as f64 * PI / 2.0,
                max: 10.0,
                floor_failed: false,
                runs: 3,
            })
            .collect();
        let svg = envelope_svg(&pts, Disturbance::Push, "push");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<polygon").count(), 1);
    }
}
