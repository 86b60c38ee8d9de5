use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use roadrl_core::episode::{Episode, EpisodeConfig};
use roadrl_core::experts::{generate_il_dataset, DatasetNoise, ExpertConfig, IlDataset, IlRow};
use roadrl_core::map_env::{builders, Scenario};
use roadrl_core::policy::{NetParams, PolicyArch, PolicyInit};
use roadrl_core::trainer::{il_pretrain, IlConfig};
use roadrl_core::vehicle::ActuationModel;

fn small() -> NetParams {
    let arch = PolicyArch {
        conv1: 4,
        conv2: 4,
        conv3: 4,
        dense: 16,
    };
    NetParams::init(arch, &PolicyInit::default(), 1).unwrap()
}

fn straight() -> Scenario {
    Scenario::from_doc(&builders::straight("lane", 60.0, 3.5, 8.3)).unwrap()
}

#[test]
fn repeated_sample_is_memorized() {
    let sc = straight();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ep = Episode::start(&sc, &EpisodeConfig::default(), ActuationModel::Instant, &mut rng).unwrap();
    let row = IlRow {
        obs: ep.observe(),
        target: [0.8, -0.05],
    };
    let ds = IlDataset {
        rows: vec![row; 8],
        episodes: Vec::new(),
    };
    let cfg = IlConfig {
        epochs: 200,
        batch: 8,
        holdout_fraction: 0.0,
        ..Default::default()
    };
    let (_, rep) = il_pretrain(&ds, small(), &cfg).unwrap();
    let last = *rep.train_loss.last().unwrap();
    assert!(last < 1e-6, "final loss {last}");
    assert!(last < rep.train_loss[0] * 1e-3);
}

#[test]
fn straight_lane_steering_is_learned() {
    let sc = vec![straight()];
    let act = ActuationModel::low_pass(0.5).unwrap();
    let cfg = EpisodeConfig::default();
    let noise = DatasetNoise {
        acc_std: 0.0,
        steer_std: 0.0,
    };
    let ds = generate_il_dataset(&sc, 6, &act, &cfg, &ExpertConfig::default(), &noise, &mut ChaCha8Rng::seed_from_u64(4))
        .unwrap();
    let il = IlConfig {
        epochs: 6,
        ..Default::default()
    };
    let (_, rep) = il_pretrain(&ds, small(), &il).unwrap();
    assert!(rep.n_holdout > 0);
    assert!(rep.holdout_rmse[1] < 0.01, "mu_sa holdout rmse {}", rep.holdout_rmse[1]);
}

#[test]
fn empty_or_out_of_range_datasets_are_rejected() {
    assert!(il_pretrain(&IlDataset::default(), small(), &IlConfig::default()).is_err());
    let sc = straight();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut ep = Episode::start(&sc, &EpisodeConfig::default(), ActuationModel::Instant, &mut rng).unwrap();
    let ds = IlDataset {
        rows: vec![IlRow {
            obs: ep.observe(),
            target: [0.0, 0.3],
        }],
        episodes: Vec::new(),
    };
    assert!(il_pretrain(&ds, small(), &IlConfig::default()).is_err());
}
