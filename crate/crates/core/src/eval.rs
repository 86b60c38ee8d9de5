//! Greedy rollouts of a trained policy and the per-scenario report.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::episode::{Driver, Episode, EpisodeConfig, EpisodeStats};
use crate::error::{Error, Result};
use crate::experts::episode_seed;
use crate::map_env::{Observation, Scenario, TerminalState};
use crate::policy::{forward, Action, NetParams};
use crate::vehicle::{clamp_acc, clamp_steer, ActuationModel};

/// Drives with the policy means.
pub struct PolicyDriver<'a> {
    pub params: &'a NetParams,
}

impl Driver for PolicyDriver<'_> {
    fn act(&mut self, _ep: &Episode, obs: Option<&Observation>) -> Action {
        let obs = obs.expect("policy driver needs observations");
        let (out, _) = forward(self.params, obs);
        Action {
            acc: clamp_acc(out.mu_acc),
            sa: clamp_steer(out.mu_sa),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub episodes: usize,
    pub goal_reached: usize,
    pub off_road: usize,
    pub time_over: usize,
    pub mean_abs_d: f64,
    /// Mean |change of commanded acceleration| per tick.
    pub mean_abs_delta_acc: f64,
    /// Fraction of ticks with an acceleration change above the threshold.
    pub acc_exceed_fraction: f64,
    pub speed_compliance: f64,
    pub avg_r_acc: f64,
    pub avg_r_sa: f64,
    pub ticks: usize,
}

impl ScenarioReport {
    pub fn goal_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.goal_reached as f64 / self.episodes as f64
        }
    }

    fn from_stats(scenario: &str, stats: &[EpisodeStats]) -> Self {
        let count = |t| stats.iter().filter(|s| s.terminal == t).count();
        let ticks: usize = stats.iter().map(|s| s.steps).sum();
        // tick-weighted means
        let tw = |f: fn(&EpisodeStats) -> f64| {
            if ticks == 0 {
                0.0
            } else {
                stats.iter().map(|s| f(s) * s.steps as f64).sum::<f64>() / ticks as f64
            }
        };
        let n = stats.len().max(1) as f64;
        Self {
            scenario: scenario.to_string(),
            episodes: stats.len(),
            goal_reached: count(TerminalState::GoalReached),
            off_road: count(TerminalState::OffRoad),
            time_over: count(TerminalState::TimeOver),
            mean_abs_d: tw(|s| s.mean_abs_d),
            mean_abs_delta_acc: tw(|s| s.mean_abs_delta_acc),
            acc_exceed_fraction: if ticks == 0 {
                0.0
            } else {
                stats.iter().map(|s| s.acc_threshold_exceeded).sum::<usize>() as f64 / ticks as f64
            },
            speed_compliance: tw(|s| s.speed_compliance),
            avg_r_acc: stats.iter().map(|s| s.sum_r_acc).sum::<f64>() / n,
            avg_r_sa: stats.iter().map(|s| s.sum_r_sa).sum::<f64>() / n,
            ticks,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenarios: Vec<ScenarioReport>,
    /// Per-tick record of the first episode of the first scenario.
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: usize,
    pub time: f64,
    pub speed: f64,
    pub speed_limit: f64,
    pub cmd_acc: f64,
    pub cmd_sa: f64,
    pub d: f64,
}

impl EvalReport {
    /// Pooled over all scenarios.
    pub fn total(&self) -> ScenarioReport {
        let mut t = ScenarioReport {
            scenario: "all".into(),
            ..Default::default()
        };
        for s in &self.scenarios {
            t.episodes += s.episodes;
            t.goal_reached += s.goal_reached;
            t.off_road += s.off_road;
            t.time_over += s.time_over;
            t.ticks += s.ticks;
        }
        let ticks = t.ticks.max(1) as f64;
        let eps = t.episodes.max(1) as f64;
        for s in &self.scenarios {
            let w = s.ticks as f64 / ticks;
            t.mean_abs_d += s.mean_abs_d * w;
            t.mean_abs_delta_acc += s.mean_abs_delta_acc * w;
            t.acc_exceed_fraction += s.acc_exceed_fraction * w;
            t.speed_compliance += s.speed_compliance * w;
            t.avg_r_acc += s.avg_r_acc * s.episodes as f64 / eps;
            t.avg_r_sa += s.avg_r_sa * s.episodes as f64 / eps;
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "scenario,episodes,goal_reached,off_road,time_over,mean_abs_d,mean_abs_delta_acc,acc_exceed_fraction,speed_compliance,avg_r_acc,avg_r_sa\n",
        );
        for r in &self.scenarios {
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.scenario,
                r.episodes,
                r.goal_reached,
                r.off_road,
                r.time_over,
                r.mean_abs_d,
                r.mean_abs_delta_acc,
                r.acc_exceed_fraction,
                r.speed_compliance,
                r.avg_r_acc,
                r.avg_r_sa
            )
            .unwrap();
        }
        s
    }

    pub fn trace_csv(&self) -> String {
        let mut s = String::from("tick,time,speed,speed_limit,cmd_acc,cmd_sa,d\n");
        for r in &self.trace {
            writeln!(
                s,
                "{},{},{},{},{},{},{}",
                r.tick, r.time, r.speed, r.speed_limit, r.cmd_acc, r.cmd_sa, r.d
            )
            .unwrap();
        }
        s
    }
}

/// `episodes` greedy rollouts on each scenario. Start states come from
/// `episode_seed(seed, k)`, so every policy sees the same starts.
pub fn evaluate(
    params: &NetParams,
    scenarios: &[Scenario],
    episodes: usize,
    actuation: &ActuationModel,
    cfg: &EpisodeConfig,
    seed: u64,
) -> Result<EvalReport> {
    params.arch.validate()?;
    if !params.is_finite() {
        return Err(Error::Checkpoint("policy parameters are not finite".into()));
    }
    let mut report = EvalReport::default();
    let mut driver = PolicyDriver { params };
    for (si, sc) in scenarios.iter().enumerate() {
        let mut stats = Vec::with_capacity(episodes);
        for k in 0..episodes as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(seed, k));
            if si == 0 && k == 0 {
                let mut ep = Episode::start(sc, cfg, actuation.clone(), &mut rng)?;
                while !ep.is_done() {
                    let obs = ep.observe();
                    let a = driver.act(&ep, Some(&obs));
                    let limit = ep.speed_limit();
                    ep.step(a);
                    report.trace.push(TraceRow {
                        tick: ep.steps,
                        time: ep.elapsed,
                        speed: ep.state.speed,
                        speed_limit: limit,
                        cmd_acc: a.acc,
                        cmd_sa: a.sa,
                        d: ep.loc.d,
                    });
                }
                stats.push(ep.stats());
            } else {
                stats.push(crate::episode::run_episode(&mut driver, sc, cfg, actuation.clone(), &mut rng)?);
            }
        }
        report.scenarios.push(ScenarioReport::from_stats(&sc.name, &stats));
    }
    Ok(report)
}
