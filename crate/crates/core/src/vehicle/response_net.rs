//! Learned actuation response: a 3-layer fully connected network mapping the
//! recent commands plus the current measured state to the next measured
//! acceleration and steering.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{ModelKind, ParamFile};
use crate::error::{Error, Result};
use crate::optim::{lbfgs_minimize, Adam};

use super::actuation::{ActuationModel, Actuator};
use super::plant::{generate_response_log, CommandSchedule, PlantConfig, ResponseLog};
use super::{VehicleState, ACC_MAX, STEER_MAX, TICK};

const SPEED_SCALE: f64 = 10.0;
const RANGE: [f64; 2] = [ACC_MAX, STEER_MAX];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResponseArch {
    /// Number of commands fed to the net, newest first. `1` is the plain
    /// (cmd, speed, actual) layout.
    pub history: usize,
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for ResponseArch {
    fn default() -> Self {
        Self {
            history: 4,
            hidden1: 32,
            hidden2: 32,
        }
    }
}

impl ResponseArch {
    pub fn n_inputs(&self) -> usize {
        2 * self.history + 3
    }

    pub fn n_params(&self) -> usize {
        let (i, a, b) = (self.n_inputs(), self.hidden1, self.hidden2);
        a * i + a + b * a + b + 2 * b + 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.history == 0 || self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(Error::ShapeMismatch(format!("degenerate response arch {self:?}")));
        }
        Ok(())
    }

    // offsets of w1, b1, w2, b2, w3, b3
    fn offsets(&self) -> [usize; 6] {
        let (i, a, b) = (self.n_inputs(), self.hidden1, self.hidden2);
        let w1 = 0;
        let b1 = w1 + a * i;
        let w2 = b1 + a;
        let b2 = w2 + b * a;
        let w3 = b2 + b;
        let b3 = w3 + 2 * b;
        [w1, b1, w2, b2, w3, b3]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResponseNet {
    arch: ResponseArch,
    params: Vec<f64>,
}

struct Activations {
    h1: Vec<f64>,
    h2: Vec<f64>,
    // tanh of the output pre-activation
    out: [f64; 2],
}

impl ResponseNet {
    pub fn new(arch: ResponseArch, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        if params.len() != arch.n_params() {
            return Err(Error::ShapeMismatch(format!(
                "response net expects {} parameters, got {}",
                arch.n_params(),
                params.len()
            )));
        }
        Ok(Self { arch, params })
    }

    /// Glorot-uniform weights, zero biases.
    pub fn random<R: Rng + ?Sized>(arch: ResponseArch, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let mut params = vec![0.0; arch.n_params()];
        let [w1, _, w2, _, w3, _] = arch.offsets();
        let layers = [
            (w1, arch.n_inputs(), arch.hidden1),
            (w2, arch.hidden1, arch.hidden2),
            (w3, arch.hidden2, 2),
        ];
        for (off, fan_in, fan_out) in layers {
            let lim = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[off..off + fan_in * fan_out] {
                *p = rng.random_range(-lim..lim);
            }
        }
        Ok(Self { arch, params })
    }

    pub fn arch(&self) -> ResponseArch {
        self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Normalized feature vector. `cmds` is newest first; missing entries are zero.
    pub fn features(&self, cmds: &[(f64, f64)], speed: f64, actual_acc: f64, actual_steer: f64) -> Vec<f64> {
        let h = self.arch.history;
        let mut x = Vec::with_capacity(self.arch.n_inputs());
        for i in 0..h {
            let (a, s) = cmds.get(i).copied().unwrap_or((0.0, 0.0));
            x.push(a / ACC_MAX);
            x.push(s / STEER_MAX);
        }
        x.push(speed / SPEED_SCALE);
        x.push(actual_acc / ACC_MAX);
        x.push(actual_steer / STEER_MAX);
        x
    }

    /// Next (acceleration, steering); always inside the action ranges.
    pub fn predict(&self, cmds: &[(f64, f64)], speed: f64, actual_acc: f64, actual_steer: f64) -> (f64, f64) {
        let x = self.features(cmds, speed, actual_acc, actual_steer);
        let act = self.forward(&x);
        (ACC_MAX * act.out[0], STEER_MAX * act.out[1])
    }

    fn forward(&self, x: &[f64]) -> Activations {
        let a = &self.arch;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = a.offsets();
        let ni = a.n_inputs();
        let h1: Vec<f64> = (0..a.hidden1)
            .map(|j| {
                let row = &p[w1 + j * ni..w1 + (j + 1) * ni];
                (p[b1 + j] + dot(row, x)).tanh()
            })
            .collect();
        let h2: Vec<f64> = (0..a.hidden2)
            .map(|j| {
                let row = &p[w2 + j * a.hidden1..w2 + (j + 1) * a.hidden1];
                (p[b2 + j] + dot(row, &h1)).tanh()
            })
            .collect();
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            let row = &p[w3 + c * a.hidden2..w3 + (c + 1) * a.hidden2];
            *o = (p[b3 + c] + dot(row, &h2)).tanh();
        }
        Activations { h1, h2, out }
    }

    /// Accumulate the gradient of `sum_c d_out[c] * out[c]` (out in normalized units).
    fn backward(&self, x: &[f64], act: &Activations, d_out: [f64; 2], grad: &mut [f64]) {
        let a = &self.arch;
        let p = &self.params;
        let [w1, b1, w2, b2, w3, b3] = a.offsets();
        let ni = a.n_inputs();
        let mut d_h2 = vec![0.0; a.hidden2];
        for c in 0..2 {
            let dz = d_out[c] * (1.0 - act.out[c] * act.out[c]);
            grad[b3 + c] += dz;
            for j in 0..a.hidden2 {
                grad[w3 + c * a.hidden2 + j] += dz * act.h2[j];
                d_h2[j] += dz * p[w3 + c * a.hidden2 + j];
            }
        }
        let mut d_h1 = vec![0.0; a.hidden1];
        for j in 0..a.hidden2 {
            let dz = d_h2[j] * (1.0 - act.h2[j] * act.h2[j]);
            grad[b2 + j] += dz;
            let off = w2 + j * a.hidden1;
            for k in 0..a.hidden1 {
                grad[off + k] += dz * act.h1[k];
                d_h1[k] += dz * p[off + k];
            }
        }
        for j in 0..a.hidden1 {
            let dz = d_h1[j] * (1.0 - act.h1[j] * act.h1[j]);
            grad[b1 + j] += dz;
            let off = w1 + j * ni;
            for k in 0..ni {
                grad[off + k] += dz * x[k];
            }
        }
    }

    pub fn to_param_file(&self) -> ParamFile {
        ParamFile {
            kind: ModelKind::Response,
            descriptor: vec![
                self.arch.history as u32,
                self.arch.hidden1 as u32,
                self.arch.hidden2 as u32,
            ],
            params: self.params.clone(),
            training: None,
        }
    }

    pub fn from_param_file(file: ParamFile) -> Result<Self> {
        if file.kind != ModelKind::Response {
            return Err(Error::Checkpoint("not a response-net checkpoint".into()));
        }
        let [history, hidden1, hidden2] = file.descriptor[..] else {
            return Err(Error::Checkpoint(format!(
                "response descriptor needs 3 entries, got {}",
                file.descriptor.len()
            )));
        };
        let arch = ResponseArch {
            history: history as usize,
            hidden1: hidden1 as usize,
            hidden2: hidden2 as usize,
        };
        Self::new(arch, file.params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_param_file().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_param_file(ParamFile::read(path)?)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResponseHyper {
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// Fraction of the log, taken from its end, held out for evaluation.
    pub holdout_fraction: f64,
    pub min_rows: usize,
    /// Full-batch L-BFGS iterations run after the minibatch epochs.
    pub polish_iters: usize,
    pub seed: u64,
}

impl Default for ResponseHyper {
    fn default() -> Self {
        Self {
            epochs: 150,
            batch: 32,
            learning_rate: 2e-2,
            holdout_fraction: 0.2,
            min_rows: 2000,
            polish_iters: 800,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// RMSE in physical units, `[acc, steer]`.
    pub train_rmse: [f64; 2],
    pub holdout_rmse: [f64; 2],
    pub n_train: usize,
    pub n_holdout: usize,
    /// Mean squared training error per epoch, range-normalized and summed over channels.
    pub loss_history: Vec<f64>,
}

struct Sample {
    x: Vec<f64>,
    y: [f64; 2],
}

fn samples(net: &ResponseNet, log: &ResponseLog, range: std::ops::Range<usize>) -> Vec<Sample> {
    let h = net.arch.history;
    let rows = &log.rows;
    range
        .filter(|&k| k >= h.max(1))
        .map(|k| {
            let cmds: Vec<(f64, f64)> = (0..h).map(|i| (rows[k - i].cmd_acc, rows[k - i].cmd_steer)).collect();
            let prev = &rows[k - 1];
            Sample {
                x: net.features(&cmds, rows[k].speed, prev.meas_acc, prev.meas_steer),
                y: [rows[k].meas_acc / ACC_MAX, rows[k].meas_steer / STEER_MAX],
            }
        })
        .collect()
}

// Per-channel error in range-normalized units.
fn norm_err(act: &Activations, s: &Sample) -> [f64; 2] {
    [act.out[0] - s.y[0], act.out[1] - s.y[1]]
}

fn loss_grad(e: [f64; 2], scale: f64) -> [f64; 2] {
    [2.0 * e[0] * scale, 2.0 * e[1] * scale]
}

fn rmse(net: &ResponseNet, set: &[Sample]) -> [f64; 2] {
    if set.is_empty() {
        return [f64::NAN; 2];
    }
    let mut se = [0.0; 2];
    for s in set {
        let o = net.forward(&s.x).out;
        for c in 0..2 {
            se[c] += ((o[c] - s.y[c]) * RANGE[c]).powi(2);
        }
    }
    se.map(|v| (v / set.len() as f64).sqrt())
}

/// Fit a response net by mean-squared-error regression on the log.
///
/// The holdout is the contiguous tail of the log so that it is not correlated
/// with the training rows through the plant's memory.
pub fn train_deep_response(log: &ResponseLog, arch: ResponseArch, hyper: &ResponseHyper) -> Result<(ResponseNet, FitReport)> {
    arch.validate()?;
    if log.len() < hyper.min_rows {
        return Err(Error::InsufficientData(format!(
            "response log has {} rows, at least {} required",
            log.len(),
            hyper.min_rows
        )));
    }
    if hyper.epochs == 0 {
        return Err(Error::Config("epochs = 0: no training performed".into()));
    }
    if hyper.batch == 0 || !(hyper.learning_rate > 0.0) {
        return Err(Error::Config("batch and learning_rate must be positive".into()));
    }
    if !(0.0..1.0).contains(&hyper.holdout_fraction) {
        return Err(Error::Config(format!("holdout_fraction {} not in [0, 1)", hyper.holdout_fraction)));
    }
    log.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);
    let mut net = ResponseNet::random(arch, &mut rng)?;
    let split = log.len() - (log.len() as f64 * hyper.holdout_fraction).round() as usize;
    let train = samples(&net, log, 0..split);
    let holdout = samples(&net, log, split..log.len());
    if train.is_empty() {
        return Err(Error::InsufficientData("no training rows after holdout split".into()));
    }

    let mut opt = Adam::new(net.params.len(), hyper.learning_rate);
    let mut grad = vec![0.0; net.params.len()];
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut loss_history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        // cosine decay to 1% of the initial rate
        let frac = epoch as f64 / hyper.epochs as f64;
        opt.lr = hyper.learning_rate * (0.505 + 0.495 * (std::f64::consts::PI * frac).cos());
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(hyper.batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / chunk.len() as f64;
            for &i in chunk {
                let s = &train[i];
                let act = net.forward(&s.x);
                let e = norm_err(&act, s);
                total += e[0] * e[0] + e[1] * e[1];
                net.backward(&s.x, &act, loss_grad(e, scale), &mut grad);
            }
            opt.step(&mut net.params, &grad);
        }
        let loss = total / train.len() as f64;
        if !loss.is_finite() || net.params.iter().any(|p| !p.is_finite()) {
            return Err(Error::Divergence(format!(
                "non-finite loss at epoch {epoch} (learning_rate {}, last finite loss {:?})",
                hyper.learning_rate,
                loss_history.last()
            )));
        }
        loss_history.push(loss);
    }

    if hyper.polish_iters > 0 {
        let mut params = net.params.clone();
        let mut probe = net.clone();
        let loss = lbfgs_minimize(
            |p, g| {
                probe.params.copy_from_slice(p);
                g.iter_mut().for_each(|v| *v = 0.0);
                let scale = 1.0 / train.len() as f64;
                let mut total = 0.0;
                for s in &train {
                    let act = probe.forward(&s.x);
                    let e = norm_err(&act, s);
                    total += e[0] * e[0] + e[1] * e[1];
                    probe.backward(&s.x, &act, loss_grad(e, scale), g);
                }
                total * scale
            },
            &mut params,
            hyper.polish_iters,
            10,
        );
        if loss.is_finite() {
            net.params = params;
            loss_history.push(loss);
        }
    }

    let report = FitReport {
        train_rmse: rmse(&net, &train),
        holdout_rmse: rmse(&net, &holdout),
        n_train: train.len(),
        n_holdout: holdout.len(),
        loss_history,
    };
    Ok((net, report))
}

/// Realized (acc, steer) per tick when `model` is driven by `schedule` from rest.
pub fn step_response(model: &ActuationModel, schedule: &CommandSchedule) -> Vec<(f64, f64)> {
    let mut actuator = Actuator::new(model.clone());
    let mut state = VehicleState::default();
    schedule
        .commands
        .iter()
        .map(|&(ca, cs)| {
            let (a, s) = actuator.actuate(&state, ca, cs);
            state.actual_acc = a;
            state.actual_steer = s;
            state.speed = (state.speed + a * TICK).max(0.0);
            (a, s)
        })
        .collect()
}

/// Noise-free plant measurements for `schedule`.
pub fn plant_response(plant: &PlantConfig, schedule: &CommandSchedule) -> Result<Vec<(f64, f64)>> {
    let cfg = plant.noiseless();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let log = generate_response_log(&cfg, schedule, &mut rng)?;
    Ok(log.rows.iter().map(|r| (r.meas_acc, r.meas_steer)).collect())
}

/// Time (s, linearly interpolated) at which `series` first reaches
/// `frac` of the way from `series[start]` to its final value.
pub fn crossing_time(series: &[f64], start: usize, frac: f64) -> Option<f64> {
    let first = *series.get(start)?;
    let last = *series.last()?;
    let level = first + frac * (last - first);
    let up = last >= first;
    for k in start + 1..series.len() {
        let (a, b) = (series[k - 1], series[k]);
        let reached = if up { b >= level } else { b <= level };
        if reached {
            let w = if b != a { (level - a) / (b - a) } else { 1.0 };
            return Some(((k - 1) as f64 + w.clamp(0.0, 1.0)) * TICK);
        }
    }
    None
}

/// 10%-90% rise time relative to the final value.
pub fn rise_time(series: &[f64], start: usize) -> Option<f64> {
    Some(crossing_time(series, start, 0.9)? - crossing_time(series, start, 0.1)?)
}

/// Step-response comparison in the long format
/// `t,channel,target,low_pass,deep_response,plant`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepComparison {
    pub t: Vec<f64>,
    /// Per channel (`acc`, `steer`): target, low-pass, deep response, plant.
    pub series: [[Vec<f64>; 4]; 2],
}

pub const COMPARISON_HEADER: &str = "t,channel,target,low_pass,deep_response,plant";

impl StepComparison {
    /// Step both channels at tick `at` to `(acc, steer)` and record all four responses.
    pub fn run(
        net: &ResponseNet,
        alpha: f64,
        plant: &PlantConfig,
        n_ticks: usize,
        at: usize,
        acc: f64,
        steer: f64,
    ) -> Result<Self> {
        let sched = CommandSchedule::step(n_ticks, at, acc, steer);
        let lp = step_response(&ActuationModel::low_pass(alpha)?, &sched);
        let deep = step_response(&ActuationModel::DeepResponse(std::sync::Arc::new(net.clone())), &sched);
        let pl = plant_response(plant, &sched)?;
        let split = |v: &[(f64, f64)], c: usize| v.iter().map(|p| if c == 0 { p.0 } else { p.1 }).collect::<Vec<_>>();
        let chan = |c: usize| {
            [
                split(&sched.commands, c),
                split(&lp, c),
                split(&deep, c),
                split(&pl, c),
            ]
        };
        Ok(Self {
            t: (0..n_ticks).map(|k| k as f64 * TICK).collect(),
            series: [chan(0), chan(1)],
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(COMPARISON_HEADER);
        out.push('\n');
        for (c, name) in ["acc", "steer"].iter().enumerate() {
            for (k, t) in self.t.iter().enumerate() {
                let s = &self.series[c];
                out.push_str(&format!(
                    "{t:.1},{name},{},{},{},{}\n",
                    s[0][k], s[1][k], s[2][k], s[3][k]
                ));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::plant::PlantKind;
    use proptest::prelude::{any, prop_assert, proptest};

    fn arch() -> ResponseArch {
        ResponseArch {
            history: 2,
            hidden1: 5,
            hidden2: 4,
        }
    }

    #[test]
    fn param_count() {
        // 7 inputs: 5*7+5 + 4*5+4 + 2*4+2
        assert_eq!(arch().n_params(), 74);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = ResponseNet::random(arch(), &mut rng).unwrap();
        let x: Vec<f64> = (0..arch().n_inputs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w = [0.7, -1.3];
        let f = |n: &ResponseNet| {
            let o = n.forward(&x).out;
            w[0] * o[0] + w[1] * o[1]
        };
        let mut g = vec![0.0; net.params.len()];
        net.backward(&x, &net.forward(&x), w, &mut g);
        for i in 0..net.params.len() {
            let (mut p, mut m) = (net.clone(), net.clone());
            p.params[i] += 1e-6;
            m.params[i] -= 1e-6;
            let fd = (f(&p) - f(&m)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = ResponseNet::random(arch(), &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.bin");
        net.save(&p).unwrap();
        assert_eq!(ResponseNet::load(&p).unwrap(), net);
    }

    #[test]
    fn wrong_param_count_rejected() {
        assert!(matches!(ResponseNet::new(arch(), vec![0.0; 3]), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn ten_rows_is_insufficient() {
        let sched = CommandSchedule::step(10, 2, 1.0, 0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let log = generate_response_log(&PlantConfig::default(), &sched, &mut rng).unwrap();
        let err = train_deep_response(&log, arch(), &ResponseHyper::default()).unwrap_err();
        assert!(err.to_string().contains("insufficient data"));
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sched = CommandSchedule::random(2500, &mut rng);
        let log = generate_response_log(&PlantConfig::default(), &sched, &mut rng).unwrap();
        let hyper = ResponseHyper {
            epochs: 0,
            ..Default::default()
        };
        assert!(train_deep_response(&log, arch(), &hyper).is_err());
    }

    #[test]
    fn huge_learning_rate_reports_divergence_or_fits() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sched = CommandSchedule::random(2000, &mut rng);
        let log = generate_response_log(&PlantConfig::default(), &sched, &mut rng).unwrap();
        let hyper = ResponseHyper {
            epochs: 2,
            learning_rate: 1e300,
            ..Default::default()
        };
        // tanh saturates, so a huge step may stay finite; it must never panic
        // and, if it does blow up, must say so.
        if let Err(e) = train_deep_response(&log, arch(), &hyper) {
            assert!(matches!(e, Error::Divergence(_)), "{e}");
        }
    }

    #[test]
    fn crossing_time_interpolates() {
        let s = [0.0, 0.0, 0.5, 1.0, 1.0];
        assert!((crossing_time(&s, 0, 0.1).unwrap() - 0.12).abs() < 1e-12);
        assert!((crossing_time(&s, 0, 0.9).unwrap() - 0.28).abs() < 1e-12);
    }

    #[test]
    fn analytic_lag_rise_time_is_recovered() {
        // sampled first-order lag, discrete rise time within one tick of 2.197 tau
        let tau = 0.4;
        let s: Vec<f64> = (0..80).map(|k| 1.0 - (-(k as f64) * TICK / tau).exp()).collect();
        let r = rise_time(&s, 0).unwrap();
        assert!((r - 2.197 * tau).abs() < 0.02, "{r}");
    }

    #[test]
    fn instant_plant_comparison_has_four_series() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = ResponseNet::random(arch(), &mut rng).unwrap();
        let plant = PlantConfig {
            kind: PlantKind::Lag,
            ..Default::default()
        };
        let cmp = StepComparison::run(&net, 0.5, &plant, 30, 5, 1.0, 0.2).unwrap();
        let csv = cmp.to_csv();
        assert!(csv.starts_with(COMPARISON_HEADER));
        assert_eq!(csv.lines().count(), 61);
    }

    proptest! {
        #[test]
        fn outputs_inside_action_ranges(seed in any::<u64>(), scale in 0.1f64..1e3,
                                        inputs in proptest::collection::vec(-1e4f64..1e4, 7)) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut net = ResponseNet::random(arch(), &mut rng).unwrap();
            net.params.iter_mut().for_each(|p| *p *= scale);
            let cmds = [(inputs[0], inputs[1]), (inputs[2], inputs[3])];
            let (a, s) = net.predict(&cmds, inputs[4], inputs[5], inputs[6]);
            prop_assert!(a.abs() <= ACC_MAX && s.abs() <= STEER_MAX);
        }
    }
}
