//! Synthetic driving scenarios: lane geometry, episode paths, agent-centric
//! rasterized observations, localization and terminal detection.

pub mod builders;
mod localize;
mod path;
mod raster;
mod scenario;

use std::sync::Arc;

pub use localize::{check_terminal, localize, LocalizationResult, TerminalConfig, TerminalState};
pub use path::{
    enumerate_routes, route_length, sample_path, Path, Waypoint, DEFAULT_MIN_PATH_LENGTH, DEFAULT_SPACING,
};
pub use raster::{
    encode_pgm, render_frame, BitPlane, Channel, Frame, FrameStack, GridTransform, Observation, RenderConfig,
    Scalars, CELLS, CELL_M, GRID, N_CHANNELS, N_FRAMES, N_PLANES, N_SCALARS, WINDOW_M,
};
pub use scenario::{
    lane_strip, load_scenario_file, load_scenarios, BundleDoc, ConnectionDoc, Lane, LaneDoc, NavPolygon,
    Scenario, ScenarioDoc, MAX_SPEED_LIMIT, MIN_SPEED_LIMIT,
};

use crate::vehicle::{steer_to_curvature, VehicleState};

/// Render the current frame, push it onto `history` and build the observation.
///
/// Scalars: speed limit at the nearest waypoint, current speed, their ratio,
/// curvature of the last steering command and the last acceleration command.
pub fn render_observation(
    scenario: &Scenario,
    path: &Path,
    state: &VehicleState,
    history: &mut FrameStack,
    cfg: &RenderConfig,
    wheelbase: f64,
) -> Observation {
    let frame = render_frame(scenario, path, &state.pose, cfg);
    history.push(Arc::new(frame));
    let loc = localize(path, &state.pose);
    let target = path.waypoints[loc.index].speed_limit;
    let scalars = Scalars::new(
        target,
        state.speed,
        steer_to_curvature(state.last_cmd_steer, wheelbase),
        state.last_cmd_acc,
    );
    history.observation(scalars)
}
