//! Synthetic reference plant standing in for on-vehicle actuation logs, and
//! the CSV log format (`t,cmd_acc,cmd_steer,speed,meas_acc,meas_steer`).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path as FsPath;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{clamp_acc, clamp_steer, ACC_MAX, STEER_MAX, TICK};

pub const CSV_HEADER: &str = "t,cmd_acc,cmd_steer,speed,meas_acc,meas_steer";

const MAX_LOG_SPEED: f64 = 12.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantKind {
    /// Measured equals commanded.
    Instant,
    /// Per-channel first-order lag behind a pure transport delay, with rate
    /// limiting and saturation.
    Lag,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    pub kind: PlantKind,
    pub tau_acc: f64,
    pub tau_steer: f64,
    pub delay_ticks: usize,
    /// Maximum change per tick; zero disables the limit.
    pub rate_acc: f64,
    pub rate_steer: f64,
    /// Measurement noise standard deviation; zero disables noise.
    pub noise_acc: f64,
    pub noise_steer: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            kind: PlantKind::Lag,
            tau_acc: 0.3,
            tau_steer: 0.4,
            delay_ticks: 2,
            rate_acc: 0.6,
            rate_steer: 0.06,
            noise_acc: 0.004,
            noise_steer: 0.0005,
        }
    }
}

impl PlantConfig {
    pub fn instant() -> Self {
        Self {
            kind: PlantKind::Instant,
            noise_acc: 0.0,
            noise_steer: 0.0,
            ..Self::default()
        }
    }

    pub fn noiseless(self) -> Self {
        Self {
            noise_acc: 0.0,
            noise_steer: 0.0,
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.tau_acc >= 0.0
            && self.tau_steer >= 0.0
            && self.rate_acc >= 0.0
            && self.rate_steer >= 0.0
            && self.noise_acc >= 0.0
            && self.noise_steer >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config("plant parameters must be non-negative".into()))
        }
    }
}

/// Noise-free plant response simulator.
#[derive(Clone, Debug)]
pub struct Plant {
    cfg: PlantConfig,
    pending: Vec<(f64, f64)>,
    pub acc: f64,
    pub steer: f64,
}

fn lag_step(cur: f64, target: f64, tau: f64, rate: f64) -> f64 {
    let k = if tau > 0.0 { 1.0 - (-TICK / tau).exp() } else { 1.0 };
    let mut delta = k * (target - cur);
    if rate > 0.0 {
        delta = delta.clamp(-rate, rate);
    }
    cur + delta
}

impl Plant {
    pub fn new(cfg: PlantConfig) -> Self {
        Self {
            cfg,
            pending: Vec::new(),
            acc: 0.0,
            steer: 0.0,
        }
    }

    /// Feed the command held over the coming tick; returns the response at the
    /// end of the tick. The instant plant responds within the tick.
    pub fn step(&mut self, cmd_acc: f64, cmd_steer: f64) -> (f64, f64) {
        let c = &self.cfg;
        match c.kind {
            PlantKind::Instant => {
                self.acc = clamp_acc(cmd_acc);
                self.steer = clamp_steer(cmd_steer);
            }
            PlantKind::Lag => {
                self.pending.push((cmd_acc, cmd_steer));
                let (ua, us) = if self.pending.len() > c.delay_ticks {
                    self.pending.remove(0)
                } else {
                    (0.0, 0.0)
                };
                self.acc = clamp_acc(lag_step(self.acc, ua, c.tau_acc, c.rate_acc));
                self.steer = clamp_steer(lag_step(self.steer, us, c.tau_steer, c.rate_steer));
            }
        }
        (self.acc, self.steer)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandSchedule {
    pub commands: Vec<(f64, f64)>,
}

impl CommandSchedule {
    /// Zero commands, then a step to `(acc, steer)` from tick `at` on.
    pub fn step(n_ticks: usize, at: usize, acc: f64, steer: f64) -> Self {
        Self {
            commands: (0..n_ticks)
                .map(|k| if k >= at { (acc, steer) } else { (0.0, 0.0) })
                .collect(),
        }
    }

    /// Random mix of steps, ramps, chirps and holds, independently per channel.
    pub fn random<R: Rng + ?Sized>(n_ticks: usize, rng: &mut R) -> Self {
        let acc = random_channel(n_ticks, ACC_MAX, rng);
        let steer = random_channel(n_ticks, STEER_MAX, rng);
        Self {
            commands: acc.into_iter().zip(steer).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.commands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.commands.is_empty()
    }
}

fn random_channel<R: Rng + ?Sized>(n: usize, range: f64, rng: &mut R) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut level = 0.0;
    while out.len() < n {
        let len = rng.random_range(15..50usize);
        let kind = rng.random_range(0..5u8).saturating_sub(1);
        // a quarter of the targets sit at the range limits so saturated
        // operation is covered
        let target = if rng.random_bool(0.25) {
            if rng.random_bool(0.5) { range } else { -range }
        } else {
            rng.random_range(-1.0..=1.0) * range
        };
        match kind {
            0 => out.extend(std::iter::repeat_n(target, len)),
            1 => {
                for k in 1..=len {
                    out.push(level + (target - level) * k as f64 / len as f64);
                }
            }
            2 => {
                let amp = rng.random_range(0.2..0.6) * range;
                let center = level.clamp(-range + amp, range - amp);
                let (f0, f1) = (0.05, rng.random_range(0.3..1.0));
                for k in 0..len {
                    let t = k as f64 * TICK;
                    let dur = len as f64 * TICK;
                    let phase = 2.0 * PI * (f0 * t + 0.5 * (f1 - f0) / dur * t * t);
                    out.push(center + amp * phase.sin());
                }
            }
            _ => out.extend(std::iter::repeat_n(level, len)),
        }
        level = *out.last().unwrap();
    }
    out.truncate(n);
    out.into_iter().map(|v| v.clamp(-range, range)).collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseRow {
    pub t: f64,
    pub cmd_acc: f64,
    pub cmd_steer: f64,
    pub speed: f64,
    pub meas_acc: f64,
    pub meas_steer: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResponseLog {
    pub rows: Vec<ResponseRow>,
}

impl ResponseLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Timestamps 0.1 s apart and measurements within the action ranges.
    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.rows.windows(2).enumerate() {
            if ((w[1].t - w[0].t) - TICK).abs() > 1e-6 {
                return Err(Error::Parse {
                    what: "response log".into(),
                    msg: format!("row {}: time step {} is not {TICK} s", i + 1, w[1].t - w[0].t),
                });
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.meas_acc.abs() > ACC_MAX + 1e-9 || r.meas_steer.abs() > STEER_MAX + 1e-9 {
                return Err(Error::Parse {
                    what: "response log".into(),
                    msg: format!("row {i}: measurement outside the action ranges"),
                });
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(self.rows.len() * 64);
        s.push_str(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                r.t, r.cmd_acc, r.cmd_steer, r.speed, r.meas_acc, r.meas_steer
            );
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let err = |msg: String| Error::Parse {
            what: "response log".into(),
            msg,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == CSV_HEADER => {}
            other => return Err(err(format!("bad header {other:?}"))),
        }
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| err(format!("line {}: {e}", i + 2)))?;
            if vals.len() != 6 {
                return Err(err(format!("line {}: expected 6 columns", i + 2)));
            }
            rows.push(ResponseRow {
                t: vals[0],
                cmd_acc: vals[1],
                cmd_steer: vals[2],
                speed: vals[3],
                meas_acc: vals[4],
                meas_steer: vals[5],
            });
        }
        let log = ResponseLog { rows };
        log.validate()?;
        Ok(log)
    }

    pub fn write(&self, path: &FsPath) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text)
    }
}

/// Drive the reference plant with a command schedule and log its responses.
///
/// Row `k` holds the command issued at `t = k * 0.1 s` and the measurement at
/// that instant, which reflects commands issued strictly before it (the
/// instant plant reflects the current command).
pub fn generate_response_log<R: Rng + ?Sized>(
    plant_cfg: &PlantConfig,
    schedule: &CommandSchedule,
    rng: &mut R,
) -> Result<ResponseLog> {
    if schedule.is_empty() {
        return Err(Error::Empty("command schedule"));
    }
    plant_cfg.validate()?;
    let noise = |std: f64| Normal::new(0.0, std.max(f64::MIN_POSITIVE)).unwrap();
    let (na, ns) = (noise(plant_cfg.noise_acc), noise(plant_cfg.noise_steer));
    let mut plant = Plant::new(*plant_cfg);
    let mut speed = 0.0_f64;
    let mut rows = Vec::with_capacity(schedule.len());
    let mut prev_meas = (0.0, 0.0);
    for (k, &(ca, cs)) in schedule.commands.iter().enumerate() {
        let (ca, cs) = (clamp_acc(ca), clamp_steer(cs));
        let (ta, ts) = match plant_cfg.kind {
            PlantKind::Instant => plant.step(ca, cs),
            PlantKind::Lag => prev_meas,
        };
        let mut ma = ta;
        let mut ms = ts;
        if plant_cfg.noise_acc > 0.0 {
            ma = clamp_acc(ma + na.sample(rng));
        }
        if plant_cfg.noise_steer > 0.0 {
            ms = clamp_steer(ms + ns.sample(rng));
        }
        rows.push(ResponseRow {
            t: k as f64 * TICK,
            cmd_acc: ca,
            cmd_steer: cs,
            speed,
            meas_acc: ma,
            meas_steer: ms,
        });
        if plant_cfg.kind == PlantKind::Lag {
            prev_meas = plant.step(ca, cs);
        }
        speed = (speed + ta * TICK).clamp(0.0, MAX_LOG_SPEED);
    }
    Ok(ResponseLog { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_commands_zero_response() {
        let log = generate_response_log(
            &PlantConfig::default().noiseless(),
            &CommandSchedule { commands: vec![(0.0, 0.0); 100] },
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        assert!(log.rows.iter().all(|r| r.meas_acc == 0.0 && r.meas_steer == 0.0));
    }

    #[test]
    fn empty_schedule_errors() {
        let e = generate_response_log(
            &PlantConfig::default(),
            &CommandSchedule::default(),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        assert!(matches!(e, Err(Error::Empty(_))));
    }

    #[test]
    fn delayed_lag_matches_analytic_solution() {
        let cfg = PlantConfig {
            tau_steer: 0.4,
            delay_ticks: 2,
            rate_steer: 0.0,
            ..PlantConfig::default().noiseless()
        };
        let log = generate_response_log(
            &cfg,
            &CommandSchedule::step(60, 10, 0.0, 0.2),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        for r in &log.rows {
            let expect = if r.t <= 1.2 + 1e-9 {
                0.0
            } else {
                0.2 * (1.0 - (-(r.t - 1.2) / 0.4).exp())
            };
            assert!((r.meas_steer - expect).abs() < 1e-12, "t={} {} vs {}", r.t, r.meas_steer, expect);
        }
    }

    #[test]
    fn rate_limit_hand_simulation() {
        // tau 0.1 s: gain 1 - e^-1 = 0.632; increments capped at 0.5 per tick.
        let cfg = PlantConfig {
            tau_acc: 0.1,
            delay_ticks: 0,
            rate_acc: 0.5,
            ..PlantConfig::default().noiseless()
        };
        let log = generate_response_log(
            &cfg,
            &CommandSchedule::step(8, 0, 2.0, 0.0),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let k = 1.0 - (-1.0_f64).exp();
        let mut expect = vec![0.0, 0.5, 1.0, 1.5];
        let mut m = 1.5;
        for _ in 0..2 {
            m += k * (2.0 - m);
            expect.push(m);
        }
        for (row, e) in log.rows.iter().zip(&expect) {
            assert!((row.meas_acc - e).abs() < 1e-12, "{} vs {e}", row.meas_acc);
        }
        assert!((expect[4] - 1.816).abs() < 1e-3);
    }

    #[test]
    fn instant_plant_is_identity() {
        let sched = CommandSchedule::random(500, &mut ChaCha8Rng::seed_from_u64(3));
        let log = generate_response_log(&PlantConfig::instant(), &sched, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        for r in &log.rows {
            assert_eq!((r.meas_acc, r.meas_steer), (r.cmd_acc, r.cmd_steer));
        }
    }

    #[test]
    fn csv_roundtrip_and_validation() {
        let sched = CommandSchedule::random(50, &mut ChaCha8Rng::seed_from_u64(5));
        let log = generate_response_log(&PlantConfig::default(), &sched, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let text = log.to_csv();
        assert!(text.starts_with("t,cmd_acc,cmd_steer,speed,meas_acc,meas_steer\n"));
        assert_eq!(ResponseLog::from_csv(&text).unwrap(), log);
        let bad = text.replacen("\n0.1,", "\n0.15,", 1);
        assert!(ResponseLog::from_csv(&bad).is_err());
    }

    #[test]
    fn random_schedule_in_range() {
        let s = CommandSchedule::random(3000, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(s.len(), 3000);
        assert!(s.commands.iter().all(|&(a, st)| a.abs() <= ACC_MAX && st.abs() <= STEER_MAX));
    }
}
