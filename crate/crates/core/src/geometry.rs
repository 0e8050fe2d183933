//! Planar frames and angle arithmetic.
//!
//! The global frame is fixed to the arena. The TrackBot's local frame has its
//! origin at the robot, X along the direction of travel and Y to the left.
//! All angles are radians internally; degrees appear only at I/O boundaries.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result};

/// Wrap an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> Result<f64> {
    ensure_finite(a, "angle")?;
    Ok(wrap(a))
}

/// Infallible wrap for internal use on values already known to be finite.
pub(crate) fn wrap(a: f64) -> f64 {
    let mut r = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can round up to exactly TAU for tiny negative inputs.
    if r >= PI {
        r -= TAU;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalPose {
    pub x: f64,
    pub y: f64,
    heading: f64,
}

impl GlobalPose {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Self {
            x,
            y,
            heading: wrap(heading),
        }
    }

    pub fn heading(&self) -> f64 {
        self.heading
    }

    pub fn set_heading(&mut self, heading: f64) {
        self.heading = wrap(heading);
    }

    pub fn rotate(&mut self, by: f64) {
        self.heading = wrap(self.heading + by);
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Move `distance` along the current heading.
    pub fn advance(&mut self, distance: f64) {
        self.x += distance * self.heading.cos();
        self.y += distance * self.heading.sin();
    }
}

/// A position in the global frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance_to(&self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// A position expressed in the TrackBot's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePosition {
    pub x_rel: f64,
    pub y_rel: f64,
}

impl RelativePosition {
    pub fn new(x_rel: f64, y_rel: f64) -> Self {
        Self { x_rel, y_rel }
    }

    pub fn from_polar(distance: f64, angle: f64) -> Self {
        Self::new(distance * angle.cos(), distance * angle.sin())
    }

    pub fn distance(&self) -> f64 {
        self.x_rel.hypot(self.y_rel)
    }

    /// Bearing in `[-π, π)`, quadrant aware.
    pub fn angle(&self) -> f64 {
        wrap(self.y_rel.atan2(self.x_rel))
    }
}

/// Express a local-frame position in the global frame.
pub fn to_global(rel: RelativePosition, frame: &GlobalPose) -> Point {
    let (s, c) = frame.heading.sin_cos();
    Point::new(
        c * rel.x_rel - s * rel.y_rel + frame.x,
        s * rel.x_rel + c * rel.y_rel + frame.y,
    )
}

/// Inverse of [`to_global`].
pub fn to_local(global: Point, frame: &GlobalPose) -> RelativePosition {
    let (s, c) = frame.heading.sin_cos();
    let dx = global.x - frame.x;
    let dy = global.y - frame.y;
    RelativePosition::new(c * dx + s * dy, -s * dx + c * dy)
}
