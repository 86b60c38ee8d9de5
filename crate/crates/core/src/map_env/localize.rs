use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::geometry::{project_onto_segment, wrap_angle, Pose};

use super::path::Path;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalizationResult {
    /// Signed lateral offset from the path, positive to the left of the path direction.
    pub d: f64,
    /// Agent heading minus path heading, wrapped to (-π, π].
    pub h_err: f64,
    /// Arclength of the projection onto the path.
    pub s: f64,
    /// Index of the waypoint nearest to `s`.
    pub index: usize,
}

/// Nearest-point projection of `pose` onto the path polyline.
pub fn localize(path: &Path, pose: &Pose) -> LocalizationResult {
    let w = &path.waypoints;
    let p = pose.pos;
    if w.len() == 1 {
        let d = (p - w[0].pos).norm();
        return LocalizationResult {
            d,
            h_err: wrap_angle(pose.heading - w[0].heading),
            s: 0.0,
            index: 0,
        };
    }
    let mut best = (f64::INFINITY, 0usize, 0.0f64);
    for i in 0..w.len() - 1 {
        let (a, b) = (w[i].pos, w[i + 1].pos);
        let t = project_onto_segment(p, a, b);
        let d2 = {
            let q = a.lerp(b, t);
            (p - q).dot(p - q)
        };
        if d2 < best.0 {
            best = (d2, i, t);
        }
    }
    let (_, i, t) = best;
    let (a, b) = (&w[i], &w[i + 1]);
    let dir = b.pos - a.pos;
    let rel = p - a.pos.lerp(b.pos, t);
    let dist = rel.norm();
    let d = if dist == 0.0 {
        0.0
    } else {
        dist * dir.cross(rel).signum()
    };
    let s = a.s + t * (b.s - a.s);
    LocalizationResult {
        d,
        h_err: wrap_angle(pose.heading - a.heading),
        s,
        index: path.index_at(s),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminalState {
    None,
    GoalReached,
    OffRoad,
    TimeOver,
}

impl TerminalState {
    pub fn is_terminal(self) -> bool {
        self != TerminalState::None
    }

    pub fn name(self) -> &'static str {
        match self {
            TerminalState::None => "none",
            TerminalState::GoalReached => "goal_reached",
            TerminalState::OffRoad => "off_road",
            TerminalState::TimeOver => "time_over",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TerminalConfig {
    /// Goal fires when the projected arclength is within this distance of the path end, m.
    pub goal_radius: f64,
    /// Off-road fires when |d| exceeds half the lane width plus this margin, m.
    pub offroad_margin: f64,
    /// Off-road also fires when |h_err| exceeds this, rad.
    pub max_heading_error: f64,
    /// Time limit is path length divided by this speed, m/s.
    pub time_limit_speed: f64,
}

impl Default for TerminalConfig {
    fn default() -> Self {
        Self {
            goal_radius: 2.0,
            offroad_margin: 1.0,
            max_heading_error: FRAC_PI_2,
            time_limit_speed: 2.0,
        }
    }
}

impl TerminalConfig {
    pub fn time_limit(&self, path: &Path) -> f64 {
        path.length() / self.time_limit_speed
    }

    pub fn offroad_threshold(&self, path: &Path, loc: &LocalizationResult) -> f64 {
        0.5 * path.waypoints[loc.index].lane_width + self.offroad_margin
    }
}

/// Terminal state after one tick. Precedence: goal, then off-road, then time-over.
pub fn check_terminal(
    loc: &LocalizationResult,
    path: &Path,
    elapsed: f64,
    cfg: &TerminalConfig,
) -> TerminalState {
    if path.length() - loc.s <= cfg.goal_radius {
        TerminalState::GoalReached
    } else if loc.d.abs() > cfg.offroad_threshold(path, loc)
        || loc.h_err.abs() > cfg.max_heading_error
    {
        TerminalState::OffRoad
    } else if elapsed > cfg.time_limit(path) {
        TerminalState::TimeOver
    } else {
        TerminalState::None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_env::{builders, Scenario};

    fn straight(width: f64) -> Path {
        let sc = Scenario::from_doc(&builders::straight("s", 100.0, width, 8.3)).unwrap();
        Path::from_route(&sc, &[0], 0.5)
    }

    fn loc(d: f64, s: f64, path: &Path) -> LocalizationResult {
        LocalizationResult {
            d,
            h_err: 0.0,
            s,
            index: path.index_at(s),
        }
    }

    #[test]
    fn on_waypoint() {
        let p = straight(3.5);
        let r = localize(&p, &Pose::new(20.0, 0.0, 0.0));
        assert_eq!((r.d, r.h_err, r.s), (0.0, 0.0, 20.0));
        assert_eq!(r.index, 40);
    }

    #[test]
    fn offset_and_heading() {
        let p = straight(3.5);
        let r = localize(&p, &Pose::new(30.2, 1.0, 0.0));
        assert!((r.d - 1.0).abs() < 1e-12);
        assert!((r.s - 30.2).abs() < 1e-12);
        let r = localize(&p, &Pose::new(30.2, -0.4, 0.1));
        assert!((r.d + 0.4).abs() < 1e-12);
        assert!((r.h_err - 0.1).abs() < 1e-15);
    }

    #[test]
    fn terminals() {
        let cfg = TerminalConfig::default();
        let p = straight(3.0);
        assert_eq!(check_terminal(&loc(0.0, 100.0, &p), &p, 0.1, &cfg), TerminalState::GoalReached);
        // 3 m lane: threshold 1.5 + 1.0 = 2.5 < 3.5
        assert_eq!(check_terminal(&loc(3.5, 50.0, &p), &p, 0.1, &cfg), TerminalState::OffRoad);
        assert_eq!(check_terminal(&loc(-2.49, 50.0, &p), &p, 0.1, &cfg), TerminalState::None);
        let limit = cfg.time_limit(&p);
        assert_eq!(limit, 50.0);
        assert_eq!(check_terminal(&loc(0.0, 50.0, &p), &p, limit + 0.1, &cfg), TerminalState::TimeOver);
        assert_eq!(check_terminal(&loc(0.0, 50.0, &p), &p, limit, &cfg), TerminalState::None);
        // Precedence.
        assert_eq!(check_terminal(&loc(9.0, 99.0, &p), &p, 1e3, &cfg), TerminalState::GoalReached);
        assert_eq!(check_terminal(&loc(9.0, 50.0, &p), &p, 1e3, &cfg), TerminalState::OffRoad);
        let mut l = loc(0.0, 50.0, &p);
        l.h_err = 1.6;
        assert_eq!(check_terminal(&l, &p, 0.0, &cfg), TerminalState::OffRoad);
    }
}
