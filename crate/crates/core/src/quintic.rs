//! Fifth-order polynomials through position, velocity and acceleration
//! boundary conditions, and the swing-foot trajectory built from them.

use crate::error::{invalid, Result};
use crate::lip::FootPosition;

/// Position, velocity and acceleration at one end of a segment.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Boundary {
    pub pos: f64,
    pub vel: f64,
    pub acc: f64,
}

impl Boundary {
    pub fn at_rest(pos: f64) -> Self {
        Self {
            pos,
            vel: 0.0,
            acc: 0.0,
        }
    }
}

/// `p(t) = sum_i c[i] t^i` on `[0, duration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuinticSegment {
    pub coeffs: [f64; 6],
    pub duration: f64,
}

/// The unique quintic meeting both boundaries after `duration` seconds.
pub fn quintic(b0: Boundary, b1: Boundary, duration: f64) -> Result<QuinticSegment> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid(
            "duration",
            format!("must be positive, got {duration}"),
        ));
    }
    let t = duration;
    let (t2, t3) = (t * t, t * t * t);
    let d = b1.pos - b0.pos;
    let c3 =
        (20.0 * d - (8.0 * b1.vel + 12.0 * b0.vel) * t - (3.0 * b0.acc - b1.acc) * t2) / (2.0 * t3);
    let c4 = (-30.0 * d + (14.0 * b1.vel + 16.0 * b0.vel) * t + (3.0 * b0.acc - 2.0 * b1.acc) * t2)
        / (2.0 * t3 * t);
    let c5 = (12.0 * d - 6.0 * (b1.vel + b0.vel) * t + (b1.acc - b0.acc) * t2) / (2.0 * t3 * t2);
    Ok(QuinticSegment {
        coeffs: [b0.pos, b0.vel, 0.5 * b0.acc, c3, c4, c5],
        duration,
    })
}

impl QuinticSegment {
    /// Position, velocity and acceleration at `t` (clamped to the segment).
    pub fn evaluate(&self, t: f64) -> Boundary {
        let t = t.clamp(0.0, self.duration);
        let c = &self.coeffs;
        Boundary {
            pos: c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5])))),
            vel: c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5]))),
            acc: 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5])),
        }
    }
}

/// Swing-foot pose.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SwingPose {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

/// Horizontal quintics from lift-off to the target, and a height profile made
/// of two quintics meeting at the apex with zero velocity and acceleration.
///
/// The horizontal part can be retargeted mid-swing; the height profile is
/// evaluated by swing phase so that retiming never drives it below ground.
#[derive(Debug, Clone, PartialEq)]
pub struct SwingTrajectory {
    /// Swing time at which `x`/`y` start.
    pub start: f64,
    pub x: QuinticSegment,
    pub y: QuinticSegment,
    /// Unit-duration rise from 0 to `height`.
    pub rise: QuinticSegment,
    /// Unit-duration fall from `height` to 0.
    pub fall: QuinticSegment,
    /// Total swing duration.
    pub total: f64,
}

impl SwingTrajectory {
    pub fn new(from: FootPosition, to: FootPosition, duration: f64, height: f64) -> Result<Self> {
        let duration = duration.max(1e-6);
        Ok(Self {
            start: 0.0,
            x: quintic(Boundary::at_rest(from.x), Boundary::at_rest(to.x), duration)?,
            y: quintic(Boundary::at_rest(from.y), Boundary::at_rest(to.y), duration)?,
            rise: quintic(Boundary::at_rest(0.0), Boundary::at_rest(height), 1.0)?,
            fall: quintic(Boundary::at_rest(height), Boundary::at_rest(0.0), 1.0)?,
            total: duration,
        })
    }

    /// Replans the horizontal motion from the current state at swing time
    /// `now` to land on `to` after `remaining` more seconds.
    pub fn retarget(&mut self, now: f64, to: FootPosition, remaining: f64) -> Result<()> {
        let remaining = remaining.max(1e-6);
        let (bx, by) = (
            self.x.evaluate(now - self.start),
            self.y.evaluate(now - self.start),
        );
        self.x = quintic(bx, Boundary::at_rest(to.x), remaining)?;
        self.y = quintic(by, Boundary::at_rest(to.y), remaining)?;
        self.start = now;
        self.total = now + remaining;
        Ok(())
    }

    /// Pose at swing time `t` since lift-off.
    pub fn pose(&self, t: f64) -> SwingPose {
        let phase = (t / self.total).clamp(0.0, 1.0);
        let z = if phase <= 0.0 || phase >= 1.0 {
            // Exactly on the ground, free of polynomial round-off.
            0.0
        } else if phase <= 0.5 {
            self.rise.evaluate(2.0 * phase).pos.max(0.0)
        } else {
            // Round-off just before touchdown can dip a few ulps below zero.
            self.fall.evaluate(2.0 * phase - 1.0).pos.max(0.0)
        };
        SwingPose {
            x: self.x.evaluate(t - self.start).pos,
            y: self.y.evaluate(t - self.start).pos,
            z,
        }
    }

    /// Height, vertical velocity and acceleration at swing time `t`.
    pub fn height(&self, t: f64) -> Boundary {
        let phase = (t / self.total).clamp(0.0, 1.0);
        // Chain rule through phase: each half spans total / 2 seconds.
        let k = 2.0 / self.total;
        let b = if phase <= 0.5 {
            self.rise.evaluate(2.0 * phase)
        } else {
            self.fall.evaluate(2.0 * phase - 1.0)
        };
        Boundary {
            pos: b.pos,
            vel: b.vel * k,
            acc: b.acc * k * k,
        }
    }
}
