use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use roadrl_bench::{corner, desk_params, observation};
use roadrl_core::episode::{run_episode, EpisodeConfig};
use roadrl_core::eval::PolicyDriver;
use roadrl_core::experts::{ExpertConfig, ExpertDriver};
use roadrl_core::map_env::{enumerate_routes, render_frame, Path, RenderConfig};
use roadrl_core::policy::{backward_rl, forward, LossCoeffs};
use roadrl_core::vehicle::ActuationModel;
use roadrl_core::Pose;

fn policy(c: &mut Criterion) {
    let sc = corner();
    let params = desk_params();
    let obs = observation(&sc);
    let coeffs = LossCoeffs {
        value_coeff: 0.5,
        entropy_coeff: 1e-3,
    };
    c.bench_function("forward_desk", |b| b.iter(|| forward(black_box(&params), black_box(&obs))));
    c.bench_function("backward_rl_desk", |b| {
        b.iter(|| backward_rl(black_box(&params), &obs, [0.1, 0.01], [0.5, -0.2], [0.3, 0.1], &coeffs))
    });
}

fn render(c: &mut Criterion) {
    let sc = corner();
    let route = enumerate_routes(&sc).swap_remove(0);
    let path = Path::from_route(&sc, &route, 0.5);
    let cfg = RenderConfig::default();
    let w = &path.waypoints[path.index_at(10.0)];
    let pose = Pose::new(w.pos.x, w.pos.y, w.heading);
    c.bench_function("render_frame", |b| b.iter(|| render_frame(&sc, &path, black_box(&pose), &cfg)));
}

fn episodes(c: &mut Criterion) {
    let sc = corner();
    let cfg = EpisodeConfig::default();
    let act = ActuationModel::low_pass(0.5).unwrap();
    let mut g = c.benchmark_group("episode");
    g.sample_size(10);
    g.bench_function("expert", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        b.iter(|| {
            let mut d = ExpertDriver::new(ExpertConfig::default());
            run_episode(&mut d, &sc, &cfg, act.clone(), &mut rng).unwrap()
        })
    });
    let params = desk_params();
    g.bench_function("greedy_policy", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        b.iter(|| {
            let mut d = PolicyDriver { params: &params };
            run_episode(&mut d, &sc, &cfg, act.clone(), &mut rng).unwrap()
        })
    });
    g.finish();
}

criterion_group!(benches, policy, render, episodes);
criterion_main!(benches);
