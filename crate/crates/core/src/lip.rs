//! Linear inverted pendulum dynamics.
//!
//! The CoM moves at constant height `h` above a point foot, so each ground
//! axis obeys `x'' = (g/h) (x - u)` independently. Two propagation routes are
//! provided: the exact hyperbolic solution and a family of explicit
//! integrators (forward Euler, Heun, classic RK4) composed over substeps.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::error::{invalid, ArtoError, Result};

/// Physical constants of the pendulum. `omega` is always `sqrt(g / h)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipParams {
    g: f64,
    h: f64,
    omega: f64,
}

impl LipParams {
    pub fn new(g: f64, h: f64) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) {
            return Err(invalid(
                "g",
                format!("must be positive and finite, got {g}"),
            ));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(invalid(
                "h",
                format!("must be positive and finite, got {h}"),
            ));
        }
        Ok(Self {
            g,
            h,
            omega: (g / h).sqrt(),
        })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Natural frequency of the pendulum, 1/s.
    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn omega_sq(&self) -> f64 {
        self.g / self.h
    }
}

impl Default for LipParams {
    fn default() -> Self {
        Self::new(9.81, 0.8).expect("default pendulum parameters are valid")
    }
}

/// Planar CoM position (m) and velocity (m/s).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ComState {
    pub x: f64,
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl ComState {
    pub const fn new(x: f64, y: f64, vx: f64, vy: f64) -> Self {
        Self { x, y, vx, vy }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.vx, self.vy]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    /// Reflects the state through the sagittal (x-z) plane.
    pub fn mirrored(self) -> Self {
        Self::new(self.x, -self.y, self.vx, -self.vy)
    }
}

/// Ground position of the support foot (m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FootPosition {
    pub x: f64,
    pub y: f64,
}

impl FootPosition {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn mirrored(self) -> Self {
        Self::new(self.x, -self.y)
    }
}

/// Exact solution of one axis: returns `(position, velocity)` after `dt`.
///
/// Any real `dt` is accepted, including negative values (backward in time).
#[inline]
pub fn propagate_axis(pos: f64, vel: f64, foot: f64, dt: f64, omega: f64) -> (f64, f64) {
    let (s, c) = ((omega * dt).sinh(), (omega * dt).cosh());
    let offset = pos - foot;
    // Written as increments so that a zero duration is exactly the identity.
    (
        pos + vel / omega * s + offset * (c - 1.0),
        vel * c + omega * offset * s,
    )
}

/// Unchecked exact propagation of the full planar state.
#[inline]
pub fn propagate_exact(
    state: ComState,
    foot: FootPosition,
    dt: f64,
    params: &LipParams,
) -> ComState {
    let w = params.omega();
    let (x, vx) = propagate_axis(state.x, state.vx, foot.x, dt, w);
    let (y, vy) = propagate_axis(state.y, state.vy, foot.y, dt, w);
    ComState { x, y, vx, vy }
}

fn check_inputs(state: &ComState, foot: &FootPosition, dt: f64) -> Result<()> {
    if !state.is_finite() {
        return Err(ArtoError::NonFinite("CoM state"));
    }
    if !foot.is_finite() {
        return Err(ArtoError::NonFinite("foot position"));
    }
    if !dt.is_finite() {
        return Err(ArtoError::NonFinite("duration"));
    }
    if dt < 0.0 {
        return Err(invalid("dt", format!("must be non-negative, got {dt}")));
    }
    Ok(())
}

/// Exact LIP state after `dt` seconds with the foot held fixed.
pub fn closed_form_step(
    state: ComState,
    foot: FootPosition,
    dt: f64,
    params: &LipParams,
) -> Result<ComState> {
    check_inputs(&state, &foot, dt)?;
    Ok(propagate_exact(state, foot, dt, params))
}

/// The same exact solution written with the divergent/convergent exponential
/// split `x = a e^{wt} + b e^{-wt} + u`.
pub fn closed_form_step_exponential(
    state: ComState,
    foot: FootPosition,
    dt: f64,
    params: &LipParams,
) -> Result<ComState> {
    check_inputs(&state, &foot, dt)?;
    let w = params.omega();
    let axis = |p: f64, v: f64, u: f64| {
        let a = 0.5 * (p - u + v / w);
        let b = 0.5 * (p - u - v / w);
        let (ep, em) = ((w * dt).exp(), (-w * dt).exp());
        (a * ep + b * em + u, w * (a * ep - b * em))
    };
    let (x, vx) = axis(state.x, state.vx, foot.x);
    let (y, vy) = axis(state.y, state.vy, foot.y);
    Ok(ComState { x, y, vx, vy })
}

/// Explicit one-step integration schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Integrator {
    Euler,
    Heun,
    Rk4,
}

impl Integrator {
    pub const ALL: [Integrator; 3] = [Integrator::Euler, Integrator::Heun, Integrator::Rk4];

    pub fn name(self) -> &'static str {
        match self {
            Integrator::Euler => "euler",
            Integrator::Heun => "heun",
            Integrator::Rk4 => "rk4",
        }
    }
}

impl fmt::Display for Integrator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Integrator {
    type Err = ArtoError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "euler" => Ok(Integrator::Euler),
            "heun" => Ok(Integrator::Heun),
            "rk4" => Ok(Integrator::Rk4),
            _ => Err(ArtoError::UnknownIntegrator(s.to_string())),
        }
    }
}

#[inline]
fn derivative(s: &[f64; 4], foot: &FootPosition, w2: f64) -> [f64; 4] {
    [s[2], s[3], w2 * (s[0] - foot.x), w2 * (s[1] - foot.y)]
}

#[inline]
fn axpy(s: &[f64; 4], a: f64, k: &[f64; 4]) -> [f64; 4] {
    [
        s[0] + a * k[0],
        s[1] + a * k[1],
        s[2] + a * k[2],
        s[3] + a * k[3],
    ]
}

#[inline]
fn single_step(s: [f64; 4], foot: &FootPosition, h: f64, w2: f64, method: Integrator) -> [f64; 4] {
    match method {
        Integrator::Euler => axpy(&s, h, &derivative(&s, foot, w2)),
        Integrator::Heun => {
            let k1 = derivative(&s, foot, w2);
            let k2 = derivative(&axpy(&s, h, &k1), foot, w2);
            let mut out = s;
            for i in 0..4 {
                out[i] += 0.5 * h * (k1[i] + k2[i]);
            }
            out
        }
        Integrator::Rk4 => {
            let k1 = derivative(&s, foot, w2);
            let k2 = derivative(&axpy(&s, 0.5 * h, &k1), foot, w2);
            let k3 = derivative(&axpy(&s, 0.5 * h, &k2), foot, w2);
            let k4 = derivative(&axpy(&s, h, &k3), foot, w2);
            let mut out = s;
            for i in 0..4 {
                out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            out
        }
    }
}

/// Unchecked integrator composition: `substeps` applications of `method`
/// with step `dt / substeps`.
#[inline]
pub fn propagate_integrated(
    state: ComState,
    foot: FootPosition,
    dt: f64,
    params: &LipParams,
    method: Integrator,
    substeps: usize,
) -> ComState {
    let h = dt / substeps as f64;
    let w2 = params.omega_sq();
    let mut s = state.to_array();
    for _ in 0..substeps {
        s = single_step(s, &foot, h, w2, method);
    }
    ComState::from_array(s)
}

/// Integrates the LIP over `dt` with `substeps` equal steps of `method`.
pub fn integrate_step(
    state: ComState,
    foot: FootPosition,
    dt: f64,
    params: &LipParams,
    method: Integrator,
    substeps: usize,
) -> Result<ComState> {
    check_inputs(&state, &foot, dt)?;
    if substeps == 0 {
        return Err(invalid("substeps", "must be at least 1"));
    }
    Ok(propagate_integrated(
        state, foot, dt, params, method, substeps,
    ))
}

/// How the planners roll the model forward over one footstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Propagator {
    Exact,
    Integrated { method: Integrator, substeps: usize },
}

impl Propagator {
    /// Six RK4 substeps per footstep, the discretization used by the
    /// nonlinear optimizer.
    pub const RK4_6: Propagator = Propagator::Integrated {
        method: Integrator::Rk4,
        substeps: 6,
    };

    #[inline]
    pub fn propagate(
        &self,
        state: ComState,
        foot: FootPosition,
        dt: f64,
        params: &LipParams,
    ) -> ComState {
        match *self {
            Propagator::Exact => propagate_exact(state, foot, dt, params),
            Propagator::Integrated { method, substeps } => {
                propagate_integrated(state, foot, dt, params, method, substeps)
            }
        }
    }
}

/// One row of the integrator accuracy study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorSample {
    pub t: f64,
    pub method: Integrator,
    pub substeps: usize,
    pub abs_error: f64,
}

/// Scheme/substep combinations compared in the accuracy study.
pub const STUDY_CASES: [(Integrator, usize); 6] = [
    (Integrator::Euler, 6),
    (Integrator::Heun, 6),
    (Integrator::Rk4, 4),
    (Integrator::Rk4, 5),
    (Integrator::Rk4, 6),
    (Integrator::Rk4, 7),
];

/// Absolute sagittal CoM position error of each integrator against the exact
/// solution, for a pendulum starting at rest `initial_offset` metres from its
/// foot. Each sample time `t` is reached by integrating the whole interval
/// `[0, t]` with the case's fixed substep count.
pub fn integration_error_table(
    params: &LipParams,
    initial_offset: f64,
    horizon: f64,
    resolution: f64,
) -> Result<Vec<ErrorSample>> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(invalid(
            "horizon",
            format!("must be positive, got {horizon}"),
        ));
    }
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(invalid(
            "resolution",
            format!("must be positive, got {resolution}"),
        ));
    }
    if !initial_offset.is_finite() {
        return Err(ArtoError::NonFinite("initial offset"));
    }
    let start = ComState::new(initial_offset, 0.0, 0.0, 0.0);
    let foot = FootPosition::default();
    let count = (horizon / resolution + 1e-9).floor() as usize;
    let mut rows = Vec::with_capacity(STUDY_CASES.len() * (count + 1));
    for &(method, substeps) in &STUDY_CASES {
        for i in 0..=count {
            let t = i as f64 * resolution;
            let exact = propagate_exact(start, foot, t, params);
            let approx = propagate_integrated(start, foot, t, params, method, substeps);
            rows.push(ErrorSample {
                t,
                method,
                substeps,
                abs_error: (approx.x - exact.x).abs(),
            });
        }
    }
    Ok(rows)
}

/// Writes the study as CSV with header `t,method,substeps,abs_error`.
pub fn write_error_csv<W: Write>(rows: &[ErrorSample], mut out: W) -> io::Result<()> {
    writeln!(out, "t,method,substeps,abs_error")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.t, r.method, r.substeps, r.abs_error)?;
    }
    Ok(())
}

/// Largest error of one case in a study table.
pub fn max_error(rows: &[ErrorSample], method: Integrator, substeps: usize) -> f64 {
    rows.iter()
        .filter(|r| r.method == method && r.substeps == substeps)
        .map(|r| r.abs_error)
        .fold(0.0, f64::max)
}
