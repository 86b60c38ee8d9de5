use crate::geometry::{wrap_angle, Pose, Vec2};

use super::{clamp_acc, clamp_steer};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct VehicleState {
    pub pose: Pose,
    /// m/s, never negative.
    pub speed: f64,
    /// Realized acceleration and steering after actuation.
    pub actual_acc: f64,
    pub actual_steer: f64,
    /// Last commanded values, as produced by the planner.
    pub last_cmd_acc: f64,
    pub last_cmd_steer: f64,
}

impl VehicleState {
    pub fn at_rest(pose: Pose) -> Self {
        Self {
            pose,
            ..Default::default()
        }
    }

    pub fn with_speed(pose: Pose, speed: f64) -> Self {
        Self {
            pose,
            speed: speed.max(0.0),
            ..Default::default()
        }
    }
}

/// Advance the kinematic bicycle by `dt` using the realized acceleration and steering.
///
/// Speed is clamped at zero. Heading and position use the average of the old
/// and new speed, and position advances along the mid-step heading, which
/// makes the scheme second order and exact on circles.
pub fn step_bicycle(state: &VehicleState, dt: f64, wheelbase: f64) -> VehicleState {
    debug_assert!(dt > 0.0);
    let acc = clamp_acc(state.actual_acc);
    let steer = clamp_steer(state.actual_steer);
    let v0 = state.speed;
    let v1 = (v0 + acc * dt).max(0.0);
    let v_avg = 0.5 * (v0 + v1);
    let h0 = state.pose.heading;
    let dh = v_avg / wheelbase * steer.tan() * dt;
    let h_mid = h0 + 0.5 * dh;
    let pos = if steer == 0.0 {
        state.pose.pos + Vec2::from_angle(h0) * (v_avg * dt)
    } else {
        state.pose.pos + Vec2::from_angle(h_mid) * (v_avg * dt)
    };
    VehicleState {
        pose: Pose {
            pos,
            heading: if steer == 0.0 { h0 } else { wrap_angle(h0 + dh) },
        },
        speed: v1,
        actual_acc: acc,
        actual_steer: steer,
        ..*state
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::DEFAULT_WHEELBASE;

    #[test]
    fn straight_coast() {
        let s = VehicleState::with_speed(Pose::new(1.0, 2.0, 0.3), 5.0);
        let n = step_bicycle(&s, 0.1, DEFAULT_WHEELBASE);
        assert!((n.pose.pos.dist(s.pose.pos) - 0.5).abs() < 1e-12);
        assert_eq!(n.pose.heading, 0.3);
        assert_eq!(n.speed, 5.0);
    }

    #[test]
    fn speed_clamps_at_zero() {
        let mut s = VehicleState::with_speed(Pose::default(), 0.1);
        s.actual_acc = -2.0;
        let n = step_bicycle(&s, 0.1, DEFAULT_WHEELBASE);
        assert_eq!(n.speed, 0.0);
    }

    #[test]
    fn zero_steer_heading_exact() {
        let mut s = VehicleState::with_speed(Pose::new(0.0, 0.0, 1.234567), 3.0);
        s.actual_acc = 0.7;
        for _ in 0..10_000 {
            s = step_bicycle(&s, 0.01, DEFAULT_WHEELBASE);
        }
        assert_eq!(s.pose.heading, 1.234567);
    }
}
