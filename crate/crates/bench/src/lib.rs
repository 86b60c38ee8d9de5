//! Shared fixtures for the benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roadrl_core::episode::{Episode, EpisodeConfig};
use roadrl_core::map_env::{builders, Observation, Scenario};
use roadrl_core::policy::{NetParams, PolicyArch, PolicyInit};
use roadrl_core::vehicle::ActuationModel;

pub fn corner() -> Scenario {
    let bundle = builders::training_bundle();
    Scenario::from_doc(&bundle.scenarios[bundle.scenarios.len() - 1]).expect("builder scenario is valid")
}

pub fn desk_params() -> NetParams {
    NetParams::init(PolicyArch::desk(), &PolicyInit::default(), 0).expect("desk arch is valid")
}

/// An observation a few ticks into an episode, so every frame differs.
pub fn observation(scenario: &Scenario) -> Observation {
    let cfg = EpisodeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut ep = Episode::start(scenario, &cfg, ActuationModel::Instant, &mut rng).expect("episode starts");
    for _ in 0..4 {
        ep.observe();
        ep.step(roadrl_core::policy::Action { acc: 0.5, sa: 0.0 });
    }
    ep.observe()
}
