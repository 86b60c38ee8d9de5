use std::sync::{Arc, OnceLock};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use roadrl_core::vehicle::response_net::{rise_time, step_response, ResponseArch, ResponseHyper};
use roadrl_core::vehicle::{
    generate_response_log, train_deep_response, ActuationModel, CommandSchedule, PlantConfig, ResponseNet,
    STEER_MAX,
};

fn fit(plant: &PlantConfig, arch: ResponseArch, rows: usize) -> (ResponseNet, [f64; 2]) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sched = CommandSchedule::random(rows, &mut rng);
    let log = generate_response_log(plant, &sched, &mut rng).unwrap();
    let (net, rep) = train_deep_response(&log, arch, &ResponseHyper::default()).unwrap();
    (net, rep.holdout_rmse)
}

fn lag_fit() -> &'static (ResponseNet, [f64; 2]) {
    static FIT: OnceLock<(ResponseNet, [f64; 2])> = OnceLock::new();
    FIT.get_or_init(|| fit(&PlantConfig::default(), ResponseArch::default(), 5000))
}

#[test]
fn instant_plant_identity_is_learned() {
    let arch = ResponseArch {
        history: 1,
        ..Default::default()
    };
    let (_, rmse) = fit(&PlantConfig::instant(), arch, 5000);
    assert!(rmse[1] < 1e-3, "steer holdout rmse {}", rmse[1]);
    // tanh output on the wider acceleration range: 1% of range
    assert!(rmse[0] < 0.02, "acc holdout rmse {}", rmse[0]);
}

#[test]
fn lag_plant_holdout_fit() {
    let (_, rmse) = lag_fit();
    assert!(rmse[0] < 0.02 && rmse[1] < 0.02, "{rmse:?}");
}

#[test]
fn deep_response_steer_step_rises_monotonically_to_limit() {
    let (net, _) = lag_fit();
    let at = 5;
    let sched = CommandSchedule::step(60, at, 0.0, STEER_MAX);
    let out = step_response(&ActuationModel::DeepResponse(Arc::new(net.clone())), &sched);
    let steer: Vec<f64> = out.iter().map(|p| p.1).collect();
    // during the dead time the learned model may wobble around zero
    let rise_start = steer.iter().position(|&v| v > 0.1 * STEER_MAX).unwrap();
    for &v in &steer[at..rise_start] {
        assert!(v.abs() < 0.025 * STEER_MAX, "dead-time wobble {v}");
    }
    for w in steer[rise_start..].windows(2) {
        assert!(w[1] >= w[0] - 1e-3, "non-monotone step response {w:?}");
    }
    let rt = rise_time(&steer, at - 1).unwrap();
    // settled well within a few rise times after the step
    let settle = at + (3.0 * rt / 0.1).ceil() as usize + 3;
    assert!(steer[settle] > 0.9 * STEER_MAX, "steer {} after {settle} ticks", steer[settle]);
    assert!(*steer.last().unwrap() > 0.97 * STEER_MAX, "final steer {}", steer.last().unwrap());
}

#[test]
fn checkpoint_predictions_survive_roundtrip() {
    let (net, _) = lag_fit();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("response.ckpt");
    net.save(&path).unwrap();
    let back = ResponseNet::load(&path).unwrap();
    let cmds = [(1.0, 0.1), (0.5, 0.05), (0.0, 0.0), (-1.0, -0.1)];
    assert_eq!(net.predict(&cmds, 4.0, 0.3, 0.02), back.predict(&cmds, 4.0, 0.3, 0.02));
}
