use std::collections::VecDeque;
use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::response_net::ResponseNet;
use super::{clamp_acc, clamp_steer, VehicleState};

/// How commanded actions turn into realized ones.
#[derive(Clone, Debug)]
pub enum ActuationModel {
    Instant,
    /// First-order filter `prev + alpha * (cmd - prev)`, alpha in (0, 1].
    LowPass { alpha: f64 },
    DeepResponse(Arc<ResponseNet>),
}

impl ActuationModel {
    pub fn low_pass(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Config(format!("low-pass alpha {alpha} not in (0, 1]")));
        }
        Ok(ActuationModel::LowPass { alpha })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActuationModel::Instant => "instant",
            ActuationModel::LowPass { .. } => "low_pass",
            ActuationModel::DeepResponse(_) => "deep_response",
        }
    }
}

/// Serializable actuation selection; `deep_response` loads a checkpoint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActuationConfig {
    Instant,
    LowPass { alpha: f64 },
    DeepResponse { checkpoint: PathBuf },
}

impl Default for ActuationConfig {
    fn default() -> Self {
        ActuationConfig::LowPass { alpha: 0.5 }
    }
}

impl ActuationConfig {
    pub fn build(&self) -> Result<ActuationModel> {
        match self {
            ActuationConfig::Instant => Ok(ActuationModel::Instant),
            ActuationConfig::LowPass { alpha } => ActuationModel::low_pass(*alpha),
            ActuationConfig::DeepResponse { checkpoint } => Ok(ActuationModel::DeepResponse(
                Arc::new(ResponseNet::load(checkpoint)?),
            )),
        }
    }
}

/// Per-vehicle actuation state: the model plus the recent command history the
/// response network consumes.
#[derive(Clone, Debug)]
pub struct Actuator {
    model: ActuationModel,
    history: VecDeque<(f64, f64)>,
}

impl Actuator {
    pub fn new(model: ActuationModel) -> Self {
        Self {
            model,
            history: VecDeque::new(),
        }
    }

    pub fn model(&self) -> &ActuationModel {
        &self.model
    }

    /// Forget command history at episode start.
    pub fn reset(&mut self) {
        self.history.clear();
    }

    /// Realized (acceleration, steering) for this tick's command, clamped to the action ranges.
    pub fn actuate(&mut self, state: &VehicleState, cmd_acc: f64, cmd_steer: f64) -> (f64, f64) {
        let (acc, steer) = match &self.model {
            ActuationModel::Instant => (cmd_acc, cmd_steer),
            ActuationModel::LowPass { alpha } => (
                state.actual_acc + alpha * (cmd_acc - state.actual_acc),
                state.actual_steer + alpha * (cmd_steer - state.actual_steer),
            ),
            ActuationModel::DeepResponse(net) => {
                let h = net.arch().history;
                self.history.push_front((cmd_acc, cmd_steer));
                self.history.truncate(h);
                let cmds: Vec<(f64, f64)> = (0..h)
                    .map(|i| self.history.get(i).copied().unwrap_or((0.0, 0.0)))
                    .collect();
                net.predict(&cmds, state.speed, state.actual_acc, state.actual_steer)
            }
        };
        (clamp_acc(acc), clamp_steer(steer))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instant_passes_through() {
        let mut a = Actuator::new(ActuationModel::Instant);
        let s = VehicleState::default();
        assert_eq!(a.actuate(&s, 1.3, -0.15), (1.3, -0.15));
    }

    #[test]
    fn low_pass_single_step() {
        let mut a = Actuator::new(ActuationModel::low_pass(0.3).unwrap());
        let s = VehicleState::default();
        let (_, steer) = a.actuate(&s, 0.0, 0.2);
        assert!((steer - 0.06).abs() < 1e-15);
    }

    #[test]
    fn low_pass_geometric_convergence() {
        let alpha = 0.3;
        let mut a = Actuator::new(ActuationModel::low_pass(alpha).unwrap());
        let mut s = VehicleState::default();
        let mut err = 1.5_f64;
        for _ in 0..30 {
            let (acc, _) = a.actuate(&s, 1.5, 0.0);
            s.actual_acc = acc;
            let e = (1.5 - acc).abs();
            assert!((e - (1.0 - alpha) * err).abs() < 1e-12);
            err = e;
        }
    }

    #[test]
    fn alpha_range_checked() {
        assert!(ActuationModel::low_pass(0.0).is_err());
        assert!(ActuationModel::low_pass(1.2).is_err());
        assert!(ActuationModel::low_pass(1.0).is_ok());
    }
}
