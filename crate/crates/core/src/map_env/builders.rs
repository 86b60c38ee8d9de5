//! Procedural construction of scenario documents from straight and arc pieces.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::Vec2;

use super::scenario::{BundleDoc, ConnectionDoc, LaneDoc, ScenarioDoc};

/// Maximum chord length used when discretizing arcs, meters.
const ARC_STEP: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub enum Piece {
    Straight(f64),
    /// Signed sweep: positive turns left.
    Arc { radius: f64, sweep: f64 },
}

/// Trace a centerline from a start pose through a sequence of pieces.
pub fn trace(start: Vec2, heading: f64, pieces: &[Piece]) -> Vec<Vec2> {
    let mut pts = vec![start];
    let (mut pos, mut h) = (start, heading);
    for piece in pieces {
        match *piece {
            Piece::Straight(len) => {
                pos = pos + Vec2::from_angle(h) * len;
                pts.push(pos);
            }
            Piece::Arc { radius, sweep } => {
                let side = sweep.signum();
                let center = pos + Vec2::from_angle(h + side * FRAC_PI_2) * radius;
                let n = ((radius * sweep.abs()) / ARC_STEP).ceil().max(1.0) as usize;
                let a0 = h - side * FRAC_PI_2;
                for k in 1..=n {
                    let a = a0 + sweep * k as f64 / n as f64;
                    pts.push(center + Vec2::from_angle(a) * radius);
                }
                h += sweep;
                pos = *pts.last().unwrap();
            }
        }
    }
    pts
}

pub fn lane(id: &str, centerline: Vec<Vec2>, width: f64, speed_limit: f64) -> LaneDoc {
    LaneDoc {
        id: id.to_string(),
        centerline,
        width,
        speed_limit,
    }
}

pub fn connect(from: &str, to: &str) -> ConnectionDoc {
    ConnectionDoc {
        from: from.into(),
        to: to.into(),
    }
}

pub fn straight(name: &str, length: f64, width: f64, speed_limit: f64) -> ScenarioDoc {
    ScenarioDoc {
        name: name.into(),
        lanes: vec![lane(
            "main",
            vec![Vec2::new(0.0, 0.0), Vec2::new(length, 0.0)],
            width,
            speed_limit,
        )],
        navigable: None,
        stop_lines: Vec::new(),
        connections: Vec::new(),
    }
}

/// Main road that continues straight or turns left/right at a junction.
pub fn t_junction(name: &str) -> ScenarioDoc {
    let o = Vec2::new(0.0, 0.0);
    let j = Vec2::new(35.0, 0.0);
    let approach = trace(o, 0.0, &[Piece::Straight(35.0)]);
    let through = trace(j, 0.0, &[Piece::Straight(45.0)]);
    let left = trace(
        j,
        0.0,
        &[Piece::Arc { radius: 22.0, sweep: FRAC_PI_2 }, Piece::Straight(25.0)],
    );
    let right = trace(
        j,
        0.0,
        &[Piece::Arc { radius: 22.0, sweep: -FRAC_PI_2 }, Piece::Straight(25.0)],
    );
    ScenarioDoc {
        name: name.into(),
        lanes: vec![
            lane("approach", approach, 3.5, 7.0),
            lane("through", through, 3.5, 8.3),
            lane("left", left, 3.5, 5.0),
            lane("right", right, 3.5, 5.0),
        ],
        navigable: None,
        stop_lines: vec![[Vec2::new(33.0, -1.75), Vec2::new(33.0, 1.75)]],
        connections: vec![
            connect("approach", "through"),
            connect("approach", "left"),
            connect("approach", "right"),
        ],
    }
}

/// Gentle S-shaped road split into two speed zones.
pub fn s_bend(name: &str) -> ScenarioDoc {
    let a = trace(
        Vec2::new(0.0, 0.0),
        0.0,
        &[Piece::Straight(15.0), Piece::Arc { radius: 30.0, sweep: 0.9 }],
    );
    let b = trace(
        *a.last().unwrap(),
        0.9,
        &[Piece::Arc { radius: 30.0, sweep: -0.9 }, Piece::Straight(15.0)],
    );
    ScenarioDoc {
        name: name.into(),
        lanes: vec![lane("first", a, 3.5, 6.0), lane("second", b, 3.5, 7.5)],
        navigable: None,
        stop_lines: Vec::new(),
        connections: vec![connect("first", "second")],
    }
}

/// Straight approach into a 90 degree bend; `sweep` sign picks the direction.
pub fn corner(name: &str, sweep: f64, radius: f64) -> ScenarioDoc {
    let a = trace(Vec2::new(0.0, 0.0), 0.0, &[Piece::Straight(30.0)]);
    let b = trace(*a.last().unwrap(), 0.0, &[Piece::Arc { radius, sweep }]);
    let c = trace(*b.last().unwrap(), sweep, &[Piece::Straight(30.0)]);
    ScenarioDoc {
        name: name.into(),
        lanes: vec![
            lane("in", a, 3.5, 8.3),
            lane("bend", b, 3.5, 4.5),
            lane("out", c, 3.5, 6.5),
        ],
        navigable: None,
        stop_lines: Vec::new(),
        connections: vec![connect("in", "bend"), connect("bend", "out")],
    }
}

/// Alternating right-left-right bends.
pub fn chicane(name: &str) -> ScenarioDoc {
    let pts = trace(
        Vec2::new(0.0, 0.0),
        0.0,
        &[
            Piece::Straight(12.0),
            Piece::Arc { radius: 32.0, sweep: -0.6 },
            Piece::Arc { radius: 32.0, sweep: 1.2 },
            Piece::Arc { radius: 32.0, sweep: -0.6 },
            Piece::Straight(12.0),
        ],
    );
    ScenarioDoc {
        name: name.into(),
        lanes: vec![lane("main", pts, 3.5, 6.5)],
        navigable: None,
        stop_lines: Vec::new(),
        connections: Vec::new(),
    }
}

/// The four training scenarios of the desk-scale setup.
pub fn training_bundle() -> BundleDoc {
    BundleDoc {
        scenarios: vec![
            straight("boulevard", 80.0, 3.5, 8.3),
            t_junction("junction"),
            s_bend("s_bend"),
            corner("left_corner", FRAC_PI_2, 25.0),
        ],
    }
}

/// Scenarios never seen during training, with geometry comparable to the training set.
pub fn heldout_bundle() -> BundleDoc {
    BundleDoc {
        scenarios: vec![corner("right_corner", -FRAC_PI_2, 28.0), chicane("chicane")],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arc_ends_at_expected_pose() {
        let pts = trace(
            Vec2::new(0.0, 0.0),
            0.0,
            &[Piece::Arc { radius: 10.0, sweep: FRAC_PI_2 }],
        );
        let end = *pts.last().unwrap();
        assert!((end.x - 10.0).abs() < 1e-9 && (end.y - 10.0).abs() < 1e-9);
        for p in &pts {
            assert!((p.dist(Vec2::new(0.0, 10.0)) - 10.0).abs() < 1e-9);
        }
    }
}
