//! Ego vehicle: kinematic bicycle integration, actuation models and the
//! learned actuation-response surrogate.

mod actuation;
mod bicycle;
pub mod plant;
pub mod response_net;

pub use actuation::{ActuationConfig, ActuationModel, Actuator};
pub use bicycle::{step_bicycle, VehicleState};
pub use plant::{generate_response_log, CommandSchedule, PlantConfig, ResponseLog, ResponseRow};
pub use response_net::{
    step_response, train_deep_response, FitReport, ResponseArch, ResponseHyper, ResponseNet,
};

/// Acceleration command range, m/s².
pub const ACC_MAX: f64 = 2.0;
/// Front-wheel steering angle range, rad.
pub const STEER_MAX: f64 = 0.2;
pub const DEFAULT_WHEELBASE: f64 = 2.8;
/// Control period, s.
pub const TICK: f64 = 0.1;

pub fn clamp_acc(a: f64) -> f64 {
    a.clamp(-ACC_MAX, ACC_MAX)
}

pub fn clamp_steer(s: f64) -> f64 {
    s.clamp(-STEER_MAX, STEER_MAX)
}

/// Path curvature produced by a steering angle.
pub fn steer_to_curvature(steer: f64, wheelbase: f64) -> f64 {
    steer.tan() / wheelbase
}
