//! One driving episode: sampled path, vehicle, actuation, frame history and
//! reward bookkeeping. Shared by the experts, the trainer and evaluation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Pose;
use crate::map_env::{
    check_terminal, localize, render_observation, sample_path, FrameStack, LocalizationResult, Observation, Path,
    RenderConfig, Scenario, TerminalConfig, TerminalState, DEFAULT_MIN_PATH_LENGTH, DEFAULT_SPACING,
};
use crate::policy::Action;
use crate::rewards::{compute_rewards, RewardPair, RewardWeights, TransitionContext};
use crate::vehicle::{step_bicycle, ActuationModel, Actuator, VehicleState, DEFAULT_WHEELBASE, TICK};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpisodeConfig {
    pub min_path_length: f64,
    pub spacing: f64,
    /// Initial speed is uniform in this range, m/s.
    pub initial_speed: [f64; 2],
    pub wheelbase: f64,
    /// Seconds per decision.
    pub tick: f64,
    pub terminal: TerminalConfig,
    pub rewards: RewardWeights,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        Self {
            min_path_length: DEFAULT_MIN_PATH_LENGTH,
            spacing: DEFAULT_SPACING,
            initial_speed: [0.0, 8.0],
            wheelbase: DEFAULT_WHEELBASE,
            tick: TICK,
            terminal: TerminalConfig::default(),
            rewards: RewardWeights::default(),
        }
    }
}

impl EpisodeConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.initial_speed;
        if !(0.0 <= lo && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("initial speed range {:?}", self.initial_speed)));
        }
        if !(self.tick > 0.0 && self.wheelbase > 0.0 && self.spacing > 0.0) {
            return Err(Error::Config("tick, wheelbase and spacing must be positive".into()));
        }
        let t = &self.terminal;
        if !(t.goal_radius > 0.0 && t.offroad_margin >= 0.0 && t.max_heading_error > 0.0 && t.time_limit_speed > 0.0) {
            return Err(Error::Config(format!("terminal config {t:?}")));
        }
        self.rewards.validate()
    }
}

/// Summary of a finished (or aborted) episode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeStats {
    pub terminal: TerminalState,
    pub sum_r_acc: f64,
    pub sum_r_sa: f64,
    pub steps: usize,
    /// Fraction of the path length covered.
    pub completed: f64,
    pub mean_abs_d: f64,
    pub mean_abs_delta_acc: f64,
    /// Ticks whose acceleration change from the previous tick exceeded the threshold.
    pub acc_threshold_exceeded: usize,
    /// Fraction of ticks with speed ratio at most 1.05.
    pub speed_compliance: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    pub rewards: RewardPair,
    pub terminal: TerminalState,
    pub context: TransitionContext,
}

pub struct Episode<'a> {
    scenario: &'a Scenario,
    cfg: EpisodeConfig,
    render: RenderConfig,
    actuator: Actuator,
    frames: FrameStack,
    pub path: Path,
    pub state: VehicleState,
    pub loc: LocalizationResult,
    pub elapsed: f64,
    pub steps: usize,
    pub terminal: TerminalState,
    prev_cmd: Option<Action>,
    totals: RewardPair,
    sum_abs_d: f64,
    sum_abs_dacc: f64,
    exceeded: usize,
    compliant: usize,
}

impl<'a> Episode<'a> {
    /// Sample a path and an initial speed, place the vehicle at the path
    /// start aligned with it.
    pub fn start<R: Rng + ?Sized>(
        scenario: &'a Scenario,
        cfg: &EpisodeConfig,
        actuation: ActuationModel,
        rng: &mut R,
    ) -> Result<Self> {
        let path = sample_path(scenario, rng, cfg.min_path_length, cfg.spacing)?;
        let [lo, hi] = cfg.initial_speed;
        let speed = if hi > lo { rng.random_range(lo..=hi) } else { lo };
        let w0 = *path.start();
        let state = VehicleState::with_speed(
            Pose {
                pos: w0.pos,
                heading: w0.heading,
            },
            speed,
        );
        Ok(Self::with_state(scenario, cfg, actuation, path, state))
    }

    /// Episode from an explicit path and initial state.
    pub fn with_state(
        scenario: &'a Scenario,
        cfg: &EpisodeConfig,
        actuation: ActuationModel,
        path: Path,
        state: VehicleState,
    ) -> Self {
        let loc = localize(&path, &state.pose);
        Self {
            scenario,
            cfg: *cfg,
            render: RenderConfig::default(),
            actuator: Actuator::new(actuation),
            frames: FrameStack::new(),
            path,
            state,
            loc,
            elapsed: 0.0,
            steps: 0,
            terminal: TerminalState::None,
            prev_cmd: None,
            totals: RewardPair::default(),
            sum_abs_d: 0.0,
            sum_abs_dacc: 0.0,
            exceeded: 0,
            compliant: 0,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn is_done(&self) -> bool {
        self.terminal.is_terminal()
    }

    /// Speed limit at the nearest waypoint.
    pub fn speed_limit(&self) -> f64 {
        self.path.waypoints[self.loc.index].speed_limit
    }

    /// Render the current state and push it onto the frame history.
    pub fn observe(&mut self) -> Observation {
        render_observation(
            self.scenario,
            &self.path,
            &self.state,
            &mut self.frames,
            &self.render,
            self.cfg.wheelbase,
        )
    }

    /// Apply one command for one tick. The first tick has no previous command
    /// and so no indecision penalty.
    pub fn step(&mut self, cmd: Action) -> StepResult {
        assert!(!self.is_done(), "step after terminal state");
        let (acc, steer) = self.actuator.actuate(&self.state, cmd.acc, cmd.sa);
        let mut s = self.state;
        s.actual_acc = acc;
        s.actual_steer = steer;
        s.last_cmd_acc = cmd.acc;
        s.last_cmd_steer = cmd.sa;
        self.state = step_bicycle(&s, self.cfg.tick, self.cfg.wheelbase);
        self.steps += 1;
        self.elapsed = self.steps as f64 * self.cfg.tick;

        self.loc = localize(&self.path, &self.state.pose);
        self.terminal = check_terminal(&self.loc, &self.path, self.elapsed, &self.cfg.terminal);
        let limit = self.speed_limit();
        let (d_acc, d_sa) = match self.prev_cmd {
            Some(p) => ((cmd.acc - p.acc).abs(), (cmd.sa - p.sa).abs()),
            None => (0.0, 0.0),
        };
        self.prev_cmd = Some(cmd);
        let context = TransitionContext {
            sr: self.state.speed / limit,
            h_err: self.loc.h_err,
            d: self.loc.d,
            delta_acc_step: d_acc,
            delta_sa_step: d_sa,
            terminal: self.terminal,
        };
        let rewards = compute_rewards(&context, &self.cfg.rewards);
        self.totals += rewards;
        self.sum_abs_d += self.loc.d.abs();
        self.sum_abs_dacc += d_acc;
        if d_acc > self.cfg.rewards.delta_acc {
            self.exceeded += 1;
        }
        if context.sr <= 1.05 {
            self.compliant += 1;
        }
        StepResult {
            rewards,
            terminal: self.terminal,
            context,
        }
    }

    pub fn stats(&self) -> EpisodeStats {
        let n = self.steps.max(1) as f64;
        EpisodeStats {
            terminal: self.terminal,
            sum_r_acc: self.totals.r_acc,
            sum_r_sa: self.totals.r_sa,
            steps: self.steps,
            completed: (self.loc.s / self.path.length()).clamp(0.0, 1.0),
            mean_abs_d: self.sum_abs_d / n,
            mean_abs_delta_acc: self.sum_abs_dacc / n,
            acc_threshold_exceeded: self.exceeded,
            speed_compliance: self.compliant as f64 / n,
        }
    }
}

/// Anything that picks a command each tick.
pub trait Driver {
    /// Whether [`Driver::act`] reads the rendered observation; rendering is
    /// skipped otherwise.
    fn uses_observation(&self) -> bool {
        true
    }

    fn act(&mut self, ep: &Episode, obs: Option<&Observation>) -> Action;
}

/// Run one episode to its terminal state.
pub fn run_episode<D: Driver + ?Sized, R: Rng + ?Sized>(
    driver: &mut D,
    scenario: &Scenario,
    cfg: &EpisodeConfig,
    actuation: ActuationModel,
    rng: &mut R,
) -> Result<EpisodeStats> {
    let mut ep = Episode::start(scenario, cfg, actuation, rng)?;
    let render = driver.uses_observation();
    while !ep.is_done() {
        let obs = render.then(|| ep.observe());
        let cmd = driver.act(&ep, obs.as_ref());
        ep.step(cmd);
    }
    Ok(ep.stats())
}
