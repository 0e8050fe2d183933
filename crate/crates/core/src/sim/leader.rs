use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

/// Rectangular arena `[0, width] × [0, height]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Arena {
    pub width: f64,
    pub height: f64,
}

impl Default for Arena {
    fn default() -> Self {
        Self {
            width: 40.0,
            height: 40.0,
        }
    }
}

impl Arena {
    pub fn contains(&self, p: Point) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn center(&self) -> Point {
        Point::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn clamp(&self, p: Point) -> Point {
        Point::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    pub fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, margin: f64) -> Point {
        let m = margin.min(self.width / 2.0).min(self.height / 2.0);
        Point::new(
            rng.random_range(m..=self.width - m),
            rng.random_range(m..=self.height - m),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeaderKind {
    /// Random waypoints inside the arena with occasional full reversals.
    #[default]
    WaypointRandom,
    /// Visit `waypoints` in order, then loop.
    Scripted,
    Static,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeaderModel {
    pub kind: LeaderKind,
    /// Route of a scripted Leader, meters.
    pub waypoints: Vec<[f64; 2]>,
    /// Maximum Leader speed, m/s.
    pub v_l_max: f64,
    /// Per-leg speed is uniform in `[min_speed_frac·v_L^max, v_L^max]`.
    pub min_speed_frac: f64,
    /// Per-slot probability of turning fully around.
    pub reversal_prob: f64,
}

impl Default for LeaderModel {
    fn default() -> Self {
        Self {
            kind: LeaderKind::WaypointRandom,
            waypoints: Vec::new(),
            v_l_max: 3.0,
            min_speed_frac: 1.0,
            reversal_prob: 0.05,
        }
    }
}

impl LeaderModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_l_max >= 0.0) || !self.v_l_max.is_finite() {
            return Err(Error::Config("v_l_max must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.min_speed_frac) || !(0.0..=1.0).contains(&self.reversal_prob) {
            return Err(Error::Config("min_speed_frac and reversal_prob must lie in [0, 1]".into()));
        }
        if self.kind == LeaderKind::Scripted && self.waypoints.is_empty() {
            return Err(Error::Config("scripted leader needs at least one waypoint".into()));
        }
        Ok(())
    }
}

/// Leader position and motion state.
#[derive(Debug, Clone)]
pub struct Leader {
    model: LeaderModel,
    arena: Arena,
    position: Point,
    target: Point,
    speed: f64,
    next_script: usize,
}

impl Leader {
    pub fn new<R: Rng + ?Sized>(model: LeaderModel, arena: Arena, start: Point, rng: &mut R) -> Self {
        let mut l = Self {
            model,
            arena,
            position: start,
            target: start,
            speed: 0.0,
            next_script: 0,
        };
        l.new_leg(rng);
        l
    }

    pub fn position(&self) -> Point {
        self.position
    }

    pub fn v_l_max(&self) -> f64 {
        self.model.v_l_max
    }

    fn draw_speed<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let hi = self.model.v_l_max;
        let lo = self.model.min_speed_frac * hi;
        if hi > lo {
            rng.random_range(lo..=hi)
        } else {
            hi
        }
    }

    fn new_leg<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        match self.model.kind {
            LeaderKind::Static => {
                self.target = self.position;
                self.speed = 0.0;
            }
            LeaderKind::WaypointRandom => {
                self.target = self.arena.random_point(rng, 1.0);
                self.speed = self.draw_speed(rng);
            }
            LeaderKind::Scripted => {
                let w = &self.model.waypoints;
                let [x, y] = w[self.next_script % w.len()];
                self.next_script += 1;
                self.target = Point::new(x, y);
                self.speed = self.model.v_l_max;
            }
        }
    }

    /// Advance by `duration` seconds and return the displacement vector.
    pub fn step<R: Rng + ?Sized>(&mut self, duration: f64, rng: &mut R) -> (f64, f64) {
        if matches!(self.model.kind, LeaderKind::WaypointRandom) && rng.random::<f64>() < self.model.reversal_prob {
            // Turn around: aim at the mirror image of the current target.
            let mirrored = Point::new(
                2.0 * self.position.x - self.target.x,
                2.0 * self.position.y - self.target.y,
            );
            self.target = self.arena.clamp(mirrored);
        }
        let start = self.position;
        let mut budget = self.speed * duration;
        // Reaching a waypoint mid-slot starts the next leg with the time left.
        for _ in 0..8 {
            let remaining = self.position.distance_to(self.target);
            if budget <= remaining {
                if remaining > 0.0 {
                    let f = budget / remaining;
                    self.position = Point::new(
                        self.position.x + f * (self.target.x - self.position.x),
                        self.position.y + f * (self.target.y - self.position.y),
                    );
                }
                break;
            }
            self.position = self.target;
            let time_left = (budget - remaining) / self.speed.max(f64::MIN_POSITIVE);
            self.new_leg(rng);
            budget = self.speed * time_left;
            if budget <= 0.0 {
                break;
            }
        }
        (self.position.x - start.x, self.position.y - start.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn per_slot_displacement_is_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let arena = Arena::default();
        for v in [0.5, 1.0, 3.0, 4.0] {
            let model = LeaderModel { v_l_max: v, ..LeaderModel::default() };
            let mut l = Leader::new(model, arena, arena.center(), &mut rng);
            for _ in 0..2000 {
                let (dx, dy) = l.step(1.0, &mut rng);
                assert!(dx.hypot(dy) <= v + 1e-9);
                assert!(arena.contains(l.position()));
            }
        }
    }

    #[test]
    fn static_leader_does_not_move() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = LeaderModel { kind: LeaderKind::Static, ..LeaderModel::default() };
        let mut l = Leader::new(model, Arena::default(), Point::new(3.0, 4.0), &mut rng);
        for _ in 0..10 {
            assert_eq!(l.step(1.0, &mut rng), (0.0, 0.0));
        }
    }

    #[test]
    fn scripted_leader_follows_waypoints() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let model = LeaderModel {
            kind: LeaderKind::Scripted,
            waypoints: vec![[12.0, 10.0], [12.0, 12.0]],
            v_l_max: 1.0,
            ..LeaderModel::default()
        };
        let mut l = Leader::new(model, Arena::default(), Point::new(10.0, 10.0), &mut rng);
        l.step(2.0, &mut rng);
        assert!(l.position().distance_to(Point::new(12.0, 10.0)) < 1e-9);
        l.step(1.0, &mut rng);
        assert!(l.position().distance_to(Point::new(12.0, 11.0)) < 1e-9);
    }
}
