use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{synthesize_sweep, AntennaPattern, ChannelParams, PropagationPath, SparsityModel};
use crate::error::{Error, Result};
use crate::estimation::RssiSweep;
use crate::geometry::{to_local, GlobalPose, Point, RelativePosition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultipathScenario {
    Los,
    WeakMultipath,
    StrongMultipath,
}

/// A secondary arrival sharing the direct path's length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondaryPath {
    pub gain_db: f64,
    /// Arrival angle in the receiver frame, radians.
    pub angle: f64,
}

/// Sweep of a source at `true_rel` seen through the direct path (unless it
/// is blocked) plus a set of secondary paths of equal length.
pub fn multipath_sweep_mixture<R: Rng + ?Sized>(
    true_rel: RelativePosition,
    secondary: &[SecondaryPath],
    direct: bool,
    params: &ChannelParams,
    pattern: &AntennaPattern,
    sparsity: &SparsityModel,
    rng: &mut R,
) -> Result<RssiSweep> {
    let d = true_rel.distance();
    if !(d > 0.0) {
        return Err(Error::InvalidArgument("source must not coincide with the receiver".into()));
    }
    let mut paths = Vec::with_capacity(secondary.len() + 1);
    if direct {
        paths.push(PropagationPath {
            length_m: d,
            angle: true_rel.angle(),
            gain_db: 0.0,
        });
    }
    paths.extend(secondary.iter().map(|p| PropagationPath {
        length_m: d,
        angle: p.angle,
        gain_db: p.gain_db,
    }));
    synthesize_sweep(&paths, params, pattern, sparsity, rng)
}

/// An occluding wall between the robot and a static Leader. Energy reaches
/// the robot by diffraction around the two wall ends, and optionally through
/// the wall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NlosGeometry {
    pub wall: [[f64; 2]; 2],
    pub leader: [f64; 2],
    pub robot_start: [f64; 2],
    /// Extra loss of the path around each wall end, dB (positive numbers).
    pub edge_loss_db: [f64; 2],
    /// Loss through the wall; `None` blocks the direct path entirely.
    pub penetration_loss_db: Option<f64>,
    /// Distance at which the Leader counts as found, meters.
    pub success_radius: f64,
    /// Slots allowed to find the Leader.
    pub slot_budget: usize,
    /// Follower speed cap while searching, m/s.
    pub follower_speed: f64,
}

impl Default for NlosGeometry {
    fn default() -> Self {
        Self::for_scenario(MultipathScenario::WeakMultipath)
    }
}

impl NlosGeometry {
    /// Default layout: a 10 m wall 3 m in front of the Leader, robot starting
    /// 3 m behind the wall on the far side. The weak case leaks a little
    /// energy straight through the wall, which lures the robot into it.
    pub fn for_scenario(scenario: MultipathScenario) -> Self {
        let (edge_loss_db, penetration_loss_db) = match scenario {
            MultipathScenario::StrongMultipath => ([3.0, 15.0], None),
            _ => ([6.0, 6.0], Some(16.0)),
        };
        Self {
            wall: [[15.0, 20.0], [25.0, 20.0]],
            leader: [20.0, 23.0],
            robot_start: [20.0, 17.0],
            edge_loss_db,
            penetration_loss_db,
            success_radius: 1.0,
            slot_budget: 100,
            follower_speed: 1.0,
        }
    }

    pub fn wall_points(&self) -> (Point, Point) {
        (
            Point::new(self.wall[0][0], self.wall[0][1]),
            Point::new(self.wall[1][0], self.wall[1][1]),
        )
    }

    pub fn leader_point(&self) -> Point {
        Point::new(self.leader[0], self.leader[1])
    }

    pub fn robot_point(&self) -> Point {
        Point::new(self.robot_start[0], self.robot_start[1])
    }

    pub fn blocks(&self, from: Point, to: Point) -> bool {
        let (a, b) = self.wall_points();
        segments_cross(from, to, a, b)
    }

    /// Propagation paths from the Leader to a robot at `pose`.
    pub fn paths(&self, pose: &GlobalPose) -> Vec<PropagationPath> {
        let robot = pose.position();
        let leader = self.leader_point();
        let mut out = Vec::with_capacity(3);
        let direct_len = robot.distance_to(leader).max(0.1);
        let direct_angle = to_local(leader, pose).angle();
        if !self.blocks(robot, leader) {
            // Clear line of sight: the wall ends still scatter a little.
            out.push(PropagationPath {
                length_m: direct_len,
                angle: direct_angle,
                gain_db: 0.0,
            });
        } else if let Some(loss) = self.penetration_loss_db {
            out.push(PropagationPath {
                length_m: direct_len,
                angle: direct_angle,
                gain_db: -loss,
            });
        }
        let (a, b) = self.wall_points();
        for (edge, loss) in [(a, self.edge_loss_db[0]), (b, self.edge_loss_db[1])] {
            let leg = robot.distance_to(edge);
            if leg < 1e-6 {
                continue;
            }
            out.push(PropagationPath {
                length_m: (leg + edge.distance_to(leader)).max(0.1),
                angle: to_local(edge, pose).angle(),
                gain_db: -loss,
            });
        }
        out
    }
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// True when the open segments `p1p2` and `q1q2` properly intersect.
/// Touching at an endpoint does not count.
pub(crate) fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    const EPS: f64 = 1e-12;
    ((d1 > EPS && d2 < -EPS) || (d1 < -EPS && d2 > EPS)) && ((d3 > EPS && d4 < -EPS) || (d3 < -EPS && d4 > EPS))
}

/// Largest fraction `t ∈ [0, 1]` of the move `from → to` that stays at least
/// `clearance` away from crossing the segment `a b`.
pub(crate) fn free_fraction(from: Point, to: Point, a: Point, b: Point, clearance: f64) -> f64 {
    if !segments_cross(from, to, a, b) {
        return 1.0;
    }
    // Intersection parameter along the move.
    let r = (to.x - from.x, to.y - from.y);
    let s = (b.x - a.x, b.y - a.y);
    let denom = r.0 * s.1 - r.1 * s.0;
    let t = ((a.x - from.x) * s.1 - (a.y - from.y) * s.0) / denom;
    let len = r.0.hypot(r.1);
    (t - clearance / len).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{nearest_bin, normalize, aoa_basic, BINS};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quiet() -> ChannelParams {
        ChannelParams {
            shadow_sigma_db: 0.0,
            sweep_shadow_sigma_db: 0.0,
            ..ChannelParams::default()
        }
    }

    #[test]
    fn single_direct_path_matches_generate_sweep() {
        let rel = RelativePosition::from_polar(3.3, 0.8);
        let p = ChannelParams::default();
        let pat = AntennaPattern::default();
        let sp = SparsityModel { drop_prob: 0.2, gap_rate: 0.5, gap_width_deg: 30.0 };
        let a = multipath_sweep_mixture(rel, &[], true, &p, &pat, &sp, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = crate::channel::generate_sweep(rel, &p, &pat, &sp, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn dominant_reflection_captures_the_bearing() {
        let rel = RelativePosition::from_polar(4.0, 0.0);
        let reflected = 90f64.to_radians();
        let pat = AntennaPattern::default();
        let s = multipath_sweep_mixture(
            rel,
            &[SecondaryPath { gain_db: -3.0, angle: reflected }],
            false,
            &quiet(),
            &pat,
            &SparsityModel::none(),
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let argmax = (0..BINS).max_by(|&a, &b| s.get(a).unwrap().total_cmp(&s.get(b).unwrap())).unwrap();
        assert_eq!(argmax, nearest_bin(reflected));
        let obs = aoa_basic(&normalize(&s).unwrap(), &pat).unwrap();
        assert!((obs.theta_m - reflected).abs() < 0.05);
    }

    #[test]
    fn wall_blocks_and_limits_motion() {
        let g = NlosGeometry::default();
        assert!(g.blocks(g.robot_point(), g.leader_point()));
        assert!(!g.blocks(Point::new(10.0, 17.0), g.leader_point()));
        let (a, b) = g.wall_points();
        let f = free_fraction(Point::new(20.0, 19.0), Point::new(20.0, 21.0), a, b, 0.05);
        assert!((f - 0.475).abs() < 1e-9);
        assert_eq!(free_fraction(Point::new(20.0, 17.0), Point::new(20.0, 18.0), a, b, 0.05), 1.0);
    }

    #[test]
    fn blocked_robot_sees_edge_paths() {
        let g = NlosGeometry::default();
        let pose = GlobalPose::new(20.0, 17.0, std::f64::consts::FRAC_PI_2);
        let paths = g.paths(&pose);
        assert_eq!(paths.len(), 3);
        assert!(paths[0].angle.abs() < 1e-12);
        assert_eq!(paths[0].gain_db, -16.0);
        let g = NlosGeometry::for_scenario(MultipathScenario::StrongMultipath);
        let paths = g.paths(&pose);
        assert_eq!(paths.len(), 2);
        // Symmetric layout: the two edges sit at equal and opposite bearings.
        assert!((paths[0].angle + paths[1].angle).abs() < 1e-9);
        let g = NlosGeometry::default();
        let with_los = g.paths(&GlobalPose::new(10.0, 17.0, 0.0));
        assert_eq!(with_los.len(), 3);
    }
}
