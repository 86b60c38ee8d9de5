//! Delayed asynchronous advantage actor-critic. Each worker copies the global
//! network at episode start, updates its copy every few steps, and sends the
//! accumulated gradient to the global network once, when the episode ends.

mod il;
mod store;

use std::fmt::Write as _;
use std::path::{Path as FsPath, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{ParamFile, TrainingState};
use crate::episode::{Episode, EpisodeConfig, EpisodeStats};
use crate::error::{Error, Result};
use crate::experts::episode_seed;
use crate::map_env::{Observation, Scenario, TerminalState};
use crate::optim::{clip_grad_norm, UpdateRule};
use crate::policy::{
    accumulate_rl, forward, sample_action, Action, ForwardCache, Gradients, LossCoeffs, NetOutput, NetParams,
    PolicyArch, PolicyInit, Workspace,
};
use crate::vehicle::ActuationModel;

pub use il::{evaluate_il, il_pretrain, IlConfig, IlReport};
pub use store::{verify_update_log, EventKind, GlobalStore, Snapshot, UpdateEvent};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma: f64,
    pub n_workers: usize,
    /// Steps between local updates of a worker's copy.
    pub local_update_interval: usize,
    pub learning_rate: f64,
    /// Linearly anneal the learning rate to zero over `max_episodes`.
    pub anneal: bool,
    /// Learning rate of the local updates; `None` uses the global one.
    pub local_learning_rate: Option<f64>,
    pub entropy_coeff: f64,
    pub value_coeff: f64,
    pub max_episodes: usize,
    /// Clip the norm of every gradient before it is applied.
    pub max_grad_norm: Option<f64>,
    pub update_rule: UpdateRule,
    /// Episodes per curve window.
    pub window: usize,
    /// Checkpoint every this many episodes; 0 disables.
    pub checkpoint_every: usize,
    /// Run workers on OS threads instead of the deterministic round scheduler.
    pub threaded: bool,
    pub arch: PolicyArch,
    pub init: PolicyInit,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            n_workers: 8,
            local_update_interval: 20,
            learning_rate: 7e-4,
            anneal: true,
            local_learning_rate: None,
            entropy_coeff: 1e-3,
            value_coeff: 0.5,
            max_episodes: 2000,
            max_grad_norm: Some(40.0),
            update_rule: UpdateRule::default(),
            window: 100,
            checkpoint_every: 0,
            threaded: false,
            arch: PolicyArch::default(),
            init: PolicyInit::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.n_workers == 0 || self.local_update_interval == 0 || self.window == 0 {
            return bad("n_workers, local_update_interval and window must be positive");
        }
        if !(self.learning_rate > 0.0) || matches!(self.local_learning_rate, Some(l) if !(l >= 0.0)) {
            return bad("learning rates must be positive");
        }
        if !(self.entropy_coeff >= 0.0 && self.value_coeff >= 0.0) {
            return bad("loss coefficients must be non-negative");
        }
        if matches!(self.max_grad_norm, Some(m) if !(m > 0.0)) {
            return bad("max_grad_norm must be positive");
        }
        if let UpdateRule::RmsProp { decay, eps } = self.update_rule {
            if !((0.0..1.0).contains(&decay) && eps > 0.0) {
                return bad("RMSProp needs decay in [0, 1) and eps > 0");
            }
        }
        self.arch.validate()
    }

    pub fn coeffs(&self) -> LossCoeffs {
        LossCoeffs {
            value_coeff: self.value_coeff,
            entropy_coeff: self.entropy_coeff,
        }
    }

    /// Global learning rate once `done` episodes have been applied.
    pub fn lr_at(&self, done: u64) -> f64 {
        if self.anneal && self.max_episodes > 0 {
            self.learning_rate * (1.0 - done as f64 / self.max_episodes as f64).max(0.0)
        } else {
            self.learning_rate
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    /// Pre-clamp Gaussian draw.
    pub raw: [f64; 2],
    pub r_acc: f64,
    pub r_sa: f64,
    pub v_acc: f64,
    pub v_sa: f64,
    pub done: bool,
}

/// Value target and advantage of one step, per head (acc, sa).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeadTargets {
    pub target: [f64; 2],
    pub advantage: [f64; 2],
}

/// Backward recursion `R = r + gamma * R` from the bootstrap values; the
/// bootstrap must be zero when the last transition is terminal.
pub fn compute_returns(transitions: &[Transition], bootstrap: [f64; 2], gamma: f64) -> Vec<HeadTargets> {
    let mut ret = bootstrap;
    let mut out = vec![
        HeadTargets {
            target: [0.0; 2],
            advantage: [0.0; 2],
        };
        transitions.len()
    ];
    for (t, o) in transitions.iter().zip(out.iter_mut()).rev() {
        ret = [t.r_acc + gamma * ret[0], t.r_sa + gamma * ret[1]];
        o.target = ret;
        o.advantage = [ret[0] - t.v_acc, ret[1] - t.v_sa];
    }
    out
}

/// Everything a worker needs besides the store.
pub struct WorkerContext<'a> {
    pub scenarios: &'a [Scenario],
    pub actuation: ActuationModel,
    pub episode: EpisodeConfig,
    pub train: TrainConfig,
}

#[derive(Clone, Debug)]
pub enum EpisodeOutcome {
    Completed {
        stats: EpisodeStats,
        grads: Gradients,
        read_version: u64,
    },
    /// A non-finite loss appeared; nothing is applied.
    Discarded {
        stats: EpisodeStats,
        reason: String,
        read_version: u64,
    },
}

impl EpisodeOutcome {
    pub fn stats(&self) -> &EpisodeStats {
        match self {
            EpisodeOutcome::Completed { stats, .. } | EpisodeOutcome::Discarded { stats, .. } => stats,
        }
    }
}

struct Step {
    t: Transition,
    out: NetOutput,
    cache: ForwardCache,
}

/// Run one episode for `worker` as episode number `episode`. The store is
/// read once, at the start; the returned gradient is the sum of all segment
/// gradients, each computed with the local parameters the segment was acted
/// with.
pub fn run_worker_episode(ctx: &WorkerContext, store: &GlobalStore, episode: u64, worker: usize) -> Result<EpisodeOutcome> {
    let snap = store.snapshot(episode, worker);
    let read_version = snap.version;
    let cfg = &ctx.train;
    let coeffs = cfg.coeffs();
    let local_lr = cfg.local_learning_rate.unwrap_or_else(|| cfg.lr_at(read_version));
    let mut local = snap.params.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(cfg.seed, episode));
    let scenario = &ctx.scenarios[rng.random_range(0..ctx.scenarios.len())];
    let mut ep = Episode::start(scenario, &ctx.episode, ctx.actuation.clone(), &mut rng)?;

    let mut total = Gradients::zeros_like(&local);
    let mut seg_grads = Gradients::zeros_like(&local);
    let mut ws = Workspace::new(&local.arch);
    let mut segment: Vec<Step> = Vec::with_capacity(cfg.local_update_interval);
    let mut obs = ep.observe();
    loop {
        let (out, cache) = forward(&local, &obs);
        let s = sample_action(&out, &mut rng, false);
        let r = ep.step(s.action);
        let done = r.terminal != TerminalState::None;
        segment.push(Step {
            t: Transition {
                obs,
                action: s.action,
                raw: s.raw,
                r_acc: r.rewards.r_acc,
                r_sa: r.rewards.r_sa,
                v_acc: out.v_acc,
                v_sa: out.v_sa,
                done,
            },
            out,
            cache,
        });
        let next = (!done).then(|| ep.observe());
        if done || segment.len() == cfg.local_update_interval {
            let bootstrap = match &next {
                Some(o) => {
                    let (v, _) = forward(&local, o);
                    [v.v_acc, v.v_sa]
                }
                None => [0.0; 2],
            };
            let ts: Vec<Transition> = segment.iter().map(|s| s.t.clone()).collect();
            let targets = compute_returns(&ts, bootstrap, cfg.gamma);
            seg_grads.clear();
            let mut loss = 0.0;
            for (s, h) in segment.iter().zip(&targets) {
                loss += accumulate_rl(
                    &local,
                    &s.t.obs,
                    &s.out,
                    &s.cache,
                    s.t.raw,
                    h.advantage,
                    h.target,
                    &coeffs,
                    &mut seg_grads,
                    &mut ws,
                );
            }
            if !loss.is_finite() || !seg_grads.is_finite() {
                return Ok(EpisodeOutcome::Discarded {
                    stats: ep.stats(),
                    reason: format!("non-finite loss {loss} at step {} of episode {episode}", ep.steps),
                    read_version,
                });
            }
            if let Some(m) = cfg.max_grad_norm {
                clip_grad_norm(&mut seg_grads.data, m);
            }
            total.add(&seg_grads);
            if !done {
                store
                    .rule()
                    .apply_frozen(&mut local.data, &snap.stats, &seg_grads.data, local_lr);
            }
            segment.clear();
        }
        match next {
            Some(o) => obs = o,
            None => break,
        }
    }
    if let Some(m) = cfg.max_grad_norm {
        clip_grad_norm(&mut total.data, m);
    }
    Ok(EpisodeOutcome::Completed {
        stats: ep.stats(),
        grads: total,
        read_version,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    PureRl,
    IlThenRl,
}

impl TrainMode {
    pub fn name(self) -> &'static str {
        match self {
            TrainMode::PureRl => "pure_rl",
            TrainMode::IlThenRl => "il_then_rl",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    /// Episodes completed at the end of the window.
    pub episode: u64,
    pub window_success: f64,
    pub avg_r_acc: f64,
    pub avg_r_sa: f64,
    pub version: u64,
}

pub const CURVE_HEADER: &str = "episode,window_success,avg_r_acc,avg_r_sa,version";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainCurves {
    pub rows: Vec<CurveRow>,
}

impl TrainCurves {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CURVE_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(
                s,
                "{},{},{},{},{}",
                r.episode, r.window_success, r.avg_r_acc, r.avg_r_sa, r.version
            )
            .unwrap();
        }
        s
    }

    /// First window end at which the success rate reached `rate`.
    pub fn first_reaching(&self, rate: f64) -> Option<u64> {
        self.rows.iter().find(|r| r.window_success >= rate).map(|r| r.episode)
    }
}

/// Where training starts from.
#[derive(Clone, Debug)]
pub enum StartPoint {
    Fresh,
    /// Parameters from imitation pretraining.
    Pretrained(NetParams),
    /// Continue a checkpointed run.
    Resume { params: NetParams, state: TrainingState },
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub params: NetParams,
    pub curves: TrainCurves,
    /// Stats of applied episodes in application order.
    pub episodes: Vec<EpisodeStats>,
    pub discarded: usize,
    pub version: u64,
    pub log: Vec<UpdateEvent>,
    pub state: TrainingState,
}

/// Checkpoint file contents for a store at an episode count.
pub fn checkpoint_file(snap: &Snapshot, episodes: u64) -> ParamFile {
    snap.params.to_param_file(Some(TrainingState {
        version: snap.version,
        episodes,
        optimizer: snap.stats.clone(),
    }))
}

/// Train for `cfg.max_episodes` episodes in total (counting those before a
/// resume). `checkpoint_dir` receives `checkpoint_<episodes>.bin` and
/// `latest.bin` every `checkpoint_every` episodes.
pub fn train(
    mode: TrainMode,
    ctx: &WorkerContext,
    start: StartPoint,
    checkpoint_dir: Option<&FsPath>,
) -> Result<TrainOutcome> {
    let cfg = ctx.train;
    cfg.validate()?;
    ctx.episode.validate()?;
    if ctx.scenarios.is_empty() {
        return Err(Error::Empty("scenario list"));
    }
    let (snap, done0) = match (mode, start) {
        (TrainMode::IlThenRl, StartPoint::Fresh) => {
            return Err(Error::MissingPrerequisite(
                "il_then_rl needs an IL dataset or a pretrained policy checkpoint".into(),
            ))
        }
        (_, StartPoint::Fresh) => (fresh_snapshot(NetParams::init(cfg.arch, &cfg.init, cfg.seed)?, cfg.update_rule), 0),
        (_, StartPoint::Pretrained(p)) => (fresh_snapshot(p, cfg.update_rule), 0),
        (_, StartPoint::Resume { params, state }) => {
            let expect = match cfg.update_rule {
                UpdateRule::Plain => 0,
                UpdateRule::RmsProp { .. } => params.data.len(),
            };
            if state.optimizer.len() != expect {
                return Err(Error::Checkpoint(format!(
                    "optimizer state has {} entries, update rule needs {expect}",
                    state.optimizer.len()
                )));
            }
            (
                Snapshot {
                    params,
                    stats: state.optimizer,
                    version: state.version,
                },
                state.episodes,
            )
        }
    };
    if snap.params.arch != cfg.arch {
        return Err(Error::ShapeMismatch(format!(
            "starting policy has arch {:?}, config asks for {:?}",
            snap.params.arch, cfg.arch
        )));
    }
    let first_version = snap.version;
    let store = GlobalStore::from_snapshot(snap, cfg.update_rule);
    let total = cfg.max_episodes as u64;
    let mut rec = Recorder::new(cfg, done0, checkpoint_dir);

    if cfg.threaded {
        let next = AtomicU64::new(done0);
        let rec = Mutex::new(&mut rec);
        let err: Mutex<Option<Error>> = Mutex::new(None);
        std::thread::scope(|sc| {
            for w in 0..cfg.n_workers {
                let (next, rec, err, store) = (&next, &rec, &err, &store);
                sc.spawn(move || loop {
                    let e = next.fetch_add(1, Ordering::SeqCst);
                    if e >= total || err.lock().unwrap().is_some() {
                        break;
                    }
                    let res = run_worker_episode(ctx, store, e, w).and_then(|o| {
                        let mut r = rec.lock().unwrap();
                        r.finish(&store, o, e, w)
                    });
                    if let Err(x) = res {
                        err.lock().unwrap().get_or_insert(x);
                        break;
                    }
                });
            }
        });
        if let Some(e) = err.into_inner().unwrap() {
            return Err(e);
        }
    } else {
        let mut e = done0;
        while e < total {
            // every worker of a round reads the same version; updates land in worker order
            let n = (cfg.n_workers as u64).min(total - e);
            let outcomes = (0..n)
                .map(|w| run_worker_episode(ctx, &store, e + w, w as usize))
                .collect::<Result<Vec<_>>>()?;
            for (w, o) in outcomes.into_iter().enumerate() {
                rec.finish(&store, o, e + w as u64, w)?;
            }
            e += n;
        }
    }

    let snap = store.peek();
    let log = store.log();
    verify_update_log(&log, first_version).map_err(Error::Divergence)?;
    let state = TrainingState {
        version: snap.version,
        episodes: rec.attempted,
        optimizer: snap.stats.clone(),
    };
    Ok(TrainOutcome {
        params: snap.params.clone(),
        curves: rec.curves,
        episodes: rec.episodes,
        discarded: rec.discarded,
        version: snap.version,
        log,
        state,
    })
}

fn fresh_snapshot(params: NetParams, rule: UpdateRule) -> Snapshot {
    let stats = match rule {
        UpdateRule::Plain => Vec::new(),
        UpdateRule::RmsProp { .. } => vec![0.0; params.data.len()],
    };
    Snapshot {
        params,
        stats,
        version: 0,
    }
}

struct Recorder {
    cfg: TrainConfig,
    attempted: u64,
    window: Vec<EpisodeStats>,
    episodes: Vec<EpisodeStats>,
    curves: TrainCurves,
    discarded: usize,
    checkpoint_dir: Option<PathBuf>,
}

impl Recorder {
    fn new(cfg: TrainConfig, done0: u64, checkpoint_dir: Option<&FsPath>) -> Self {
        Self {
            cfg,
            attempted: done0,
            window: Vec::new(),
            episodes: Vec::new(),
            curves: TrainCurves::default(),
            discarded: 0,
            checkpoint_dir: checkpoint_dir.map(FsPath::to_path_buf),
        }
    }

    fn finish(&mut self, store: &GlobalStore, outcome: EpisodeOutcome, episode: u64, worker: usize) -> Result<()> {
        self.attempted += 1;
        match outcome {
            EpisodeOutcome::Completed { stats, grads, .. } => {
                let lr = self.cfg.lr_at(store.version());
                store.apply_update(&grads, lr, episode, worker)?;
                self.episodes.push(stats);
                self.window.push(stats);
                if self.window.len() == self.cfg.window {
                    let n = self.window.len() as f64;
                    self.curves.rows.push(CurveRow {
                        episode: self.attempted,
                        window_success: self
                            .window
                            .iter()
                            .filter(|s| s.terminal == TerminalState::GoalReached)
                            .count() as f64
                            / n,
                        avg_r_acc: self.window.iter().map(|s| s.sum_r_acc).sum::<f64>() / n,
                        avg_r_sa: self.window.iter().map(|s| s.sum_r_sa).sum::<f64>() / n,
                        version: store.version(),
                    });
                    self.window.clear();
                }
            }
            EpisodeOutcome::Discarded { reason, .. } => {
                self.discarded += 1;
                eprintln!("discarded episode {episode} (worker {worker}): {reason}");
            }
        }
        let every = self.cfg.checkpoint_every as u64;
        if every > 0 && self.attempted % every == 0 {
            if let Some(dir) = &self.checkpoint_dir {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let file = checkpoint_file(&store.peek(), self.attempted);
                file.write(&dir.join(format!("checkpoint_{:06}.bin", self.attempted)))?;
                file.write(&dir.join("latest.bin"))?;
            }
        }
        Ok(())
    }
}

/// Shared handle for callers that keep the store around.
pub type SharedStore = Arc<GlobalStore>;
