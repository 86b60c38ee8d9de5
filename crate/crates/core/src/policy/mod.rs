//! Dual-head Gaussian actor-critic. Each head (acceleration, steering) is a
//! separate sub-network: three convolutions over the 16 stacked planes, a
//! dense layer that also sees the 5 scalars, and three scalar outputs
//! (mean, standard deviation, state value).

mod net;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{ModelKind, ParamFile, TrainingState};
use crate::error::{Error, Result};
use crate::map_env::{GRID, N_PLANES, N_SCALARS};
use crate::vehicle::{ACC_MAX, STEER_MAX};

pub use net::{accumulate_il, accumulate_rl, activation_pattern, backward_il, backward_rl, forward, ForwardCache, Workspace};

pub const SIGMA_MIN: f64 = 1e-3;
pub const N_HEADS: usize = 2;
/// Output ranges of the two means.
pub const MU_RANGE: [f64; N_HEADS] = [ACC_MAX, STEER_MAX];
/// Fixed input scaling of (target speed, speed, speed ratio, curvature, acceleration).
pub const SCALAR_SCALE: [f64; N_SCALARS] = [0.1, 0.1, 1.0, 10.0, 0.5];

pub(crate) const K1: usize = 8;
pub(crate) const S1: usize = 4;
pub(crate) const K2: usize = 4;
pub(crate) const S2: usize = 2;
pub(crate) const K3: usize = 3;
pub(crate) const O1: usize = (GRID - K1) / S1 + 1;
pub(crate) const O2: usize = (O1 - K2) / S2 + 1;
pub(crate) const O3: usize = O2 - K3 + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(usize)]
pub enum Head {
    Acc = 0,
    Steer = 1,
}

/// Channel widths of one head. Kernel sizes and strides are fixed at 8/4,
/// 4/2 and 3/1, giving 20x20, 9x9 and 7x7 feature maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyArch {
    pub conv1: usize,
    pub conv2: usize,
    pub conv3: usize,
    pub dense: usize,
}

impl Default for PolicyArch {
    fn default() -> Self {
        Self {
            conv1: 16,
            conv2: 32,
            conv3: 32,
            dense: 256,
        }
    }
}

impl PolicyArch {
    /// Reduced widths for single-core training runs.
    pub fn desk() -> Self {
        Self {
            conv1: 8,
            conv2: 16,
            conv3: 16,
            dense: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.conv1 == 0 || self.conv2 == 0 || self.conv3 == 0 || self.dense == 0 {
            return Err(Error::ShapeMismatch(format!("degenerate policy arch {self:?}")));
        }
        Ok(())
    }

    pub fn dense_inputs(&self) -> usize {
        O3 * O3 * self.conv3 + N_SCALARS
    }

    pub fn layout(&self) -> Layout {
        let mut off = 0;
        let mut take = |n: usize| {
            let r = off..off + n;
            off += n;
            r
        };
        let heads = std::array::from_fn(|_| HeadLayout {
            w1: take(N_PLANES * K1 * K1 * self.conv1),
            b1: take(self.conv1),
            w2: take(self.conv2 * K2 * K2 * self.conv1),
            b2: take(self.conv2),
            w3: take(self.conv3 * K3 * K3 * self.conv2),
            b3: take(self.conv3),
            wd: take(self.dense * self.dense_inputs()),
            bd: take(self.dense),
            w_mu: take(self.dense),
            b_mu: take(1).start,
            w_sigma: take(self.dense),
            b_sigma: take(1).start,
            w_v: take(self.dense),
            b_v: take(1).start,
        });
        Layout { heads, len: off }
    }

    pub fn n_params(&self) -> usize {
        self.layout().len
    }

    pub fn descriptor(&self) -> Vec<u32> {
        [self.conv1, self.conv2, self.conv3, self.dense, N_PLANES, N_SCALARS, GRID]
            .iter()
            .map(|&v| v as u32)
            .collect()
    }

    pub fn from_descriptor(d: &[u32]) -> Result<Self> {
        let expect = [N_PLANES as u32, N_SCALARS as u32, GRID as u32];
        match d {
            [c1, c2, c3, dense, rest @ ..] if rest == expect => {
                let a = Self {
                    conv1: *c1 as usize,
                    conv2: *c2 as usize,
                    conv3: *c3 as usize,
                    dense: *dense as usize,
                };
                a.validate()?;
                Ok(a)
            }
            _ => Err(Error::Checkpoint(format!("unrecognized policy descriptor {d:?}"))),
        }
    }
}

/// Parameter ranges of one head inside the flat vector.
///
/// Weight orders: `w1[plane][ky][kx][c1]`, `w2[c2][ky][kx][c1]`,
/// `w3[c3][ky][kx][c2]`, `wd[unit][input]` where the dense input is the 7x7
/// conv3 map in row, column, channel order followed by the scaled scalars.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeadLayout {
    pub w1: std::ops::Range<usize>,
    pub b1: std::ops::Range<usize>,
    pub w2: std::ops::Range<usize>,
    pub b2: std::ops::Range<usize>,
    pub w3: std::ops::Range<usize>,
    pub b3: std::ops::Range<usize>,
    pub wd: std::ops::Range<usize>,
    pub bd: std::ops::Range<usize>,
    pub w_mu: std::ops::Range<usize>,
    pub b_mu: usize,
    pub w_sigma: std::ops::Range<usize>,
    pub b_sigma: usize,
    pub w_v: std::ops::Range<usize>,
    pub b_v: usize,
}

impl HeadLayout {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.w1.start..self.b_v + 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub heads: [HeadLayout; N_HEADS],
    pub len: usize,
}

/// Initial standard deviations of the two Gaussians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyInit {
    pub sigma_acc: f64,
    pub sigma_sa: f64,
}

impl Default for PolicyInit {
    fn default() -> Self {
        Self {
            sigma_acc: 0.3,
            sigma_sa: 0.03,
        }
    }
}

fn softplus_inv(y: f64) -> f64 {
    // ln(exp(y) - 1), stable for large y
    y + (-(-y).exp_m1()).ln()
}

/// Flat parameter vector of both heads plus its architecture.
#[derive(Clone, Debug, PartialEq)]
pub struct NetParams {
    pub arch: PolicyArch,
    pub data: Vec<f64>,
}

impl NetParams {
    pub fn zeros(arch: PolicyArch) -> Self {
        Self {
            arch,
            data: vec![0.0; arch.n_params()],
        }
    }

    /// He-uniform hidden weights, small output weights, zero biases except
    /// the sigma bias which starts at the requested standard deviation.
    pub fn init(arch: PolicyArch, init: &PolicyInit, seed: u64) -> Result<Self> {
        arch.validate()?;
        if !(init.sigma_acc > SIGMA_MIN && init.sigma_sa > SIGMA_MIN) {
            return Err(Error::Config(format!("initial sigma must exceed {SIGMA_MIN}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(arch);
        let layout = arch.layout();
        for (h, hl) in layout.heads.iter().enumerate() {
            let fans = [
                (&hl.w1, N_PLANES * K1 * K1),
                (&hl.w2, K2 * K2 * arch.conv1),
                (&hl.w3, K3 * K3 * arch.conv2),
                (&hl.wd, arch.dense_inputs()),
            ];
            for (r, fan_in) in fans {
                let lim = (6.0 / fan_in as f64).sqrt();
                for v in &mut p.data[r.clone()] {
                    *v = rng.random_range(-lim..lim);
                }
            }
            let lim = 0.01 * (3.0 / arch.dense as f64).sqrt();
            for r in [&hl.w_mu, &hl.w_sigma, &hl.w_v] {
                for v in &mut p.data[r.clone()] {
                    *v = rng.random_range(-lim..lim);
                }
            }
            let sigma = if h == 0 { init.sigma_acc } else { init.sigma_sa };
            p.data[hl.b_sigma] = softplus_inv(sigma - SIGMA_MIN);
        }
        Ok(p)
    }

    pub fn layout(&self) -> Layout {
        self.arch.layout()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn to_param_file(&self, training: Option<TrainingState>) -> ParamFile {
        ParamFile {
            kind: ModelKind::Policy,
            descriptor: self.arch.descriptor(),
            params: self.data.clone(),
            training,
        }
    }

    pub fn from_param_file(file: ParamFile) -> Result<(Self, Option<TrainingState>)> {
        if file.kind != ModelKind::Policy {
            return Err(Error::Checkpoint("not a policy checkpoint".into()));
        }
        let arch = PolicyArch::from_descriptor(&file.descriptor)?;
        if file.params.len() != arch.n_params() {
            return Err(Error::Checkpoint(format!(
                "policy arch {arch:?} needs {} parameters, file has {}",
                arch.n_params(),
                file.params.len()
            )));
        }
        Ok((
            Self {
                arch,
                data: file.params,
            },
            file.training,
        ))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_param_file(None).write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(Self::from_param_file(ParamFile::read(path)?)?.0)
    }
}

/// Gradient (or any other per-parameter quantity) congruent with [`NetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub data: Vec<f64>,
}

impl Gradients {
    pub fn zeros(arch: &PolicyArch) -> Self {
        Self {
            data: vec![0.0; arch.n_params()],
        }
    }

    pub fn zeros_like(p: &NetParams) -> Self {
        Self {
            data: vec![0.0; p.data.len()],
        }
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn add(&mut self, other: &Gradients) {
        assert_eq!(self.data.len(), other.data.len(), "gradient shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetOutput {
    pub mu_acc: f64,
    pub sigma_acc: f64,
    pub mu_sa: f64,
    pub sigma_sa: f64,
    pub v_acc: f64,
    pub v_sa: f64,
}

impl NetOutput {
    pub fn mu(&self, h: Head) -> f64 {
        [self.mu_acc, self.mu_sa][h as usize]
    }

    pub fn sigma(&self, h: Head) -> f64 {
        [self.sigma_acc, self.sigma_sa][h as usize]
    }

    pub fn value(&self, h: Head) -> f64 {
        [self.v_acc, self.v_sa][h as usize]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub acc: f64,
    pub sa: f64,
}

/// A sampled action: the Gaussian draw before clamping (used for the
/// log-probability) and the clamped action sent to the vehicle.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SampledAction {
    pub raw: [f64; N_HEADS],
    pub action: Action,
}

pub fn sample_action<R: Rng + ?Sized>(out: &NetOutput, rng: &mut R, greedy: bool) -> SampledAction {
    let raw = if greedy {
        [out.mu_acc, out.mu_sa]
    } else {
        [
            Normal::new(out.mu_acc, out.sigma_acc).unwrap().sample(rng),
            Normal::new(out.mu_sa, out.sigma_sa).unwrap().sample(rng),
        ]
    };
    SampledAction {
        raw,
        action: Action {
            acc: raw[0].clamp(-ACC_MAX, ACC_MAX),
            sa: raw[1].clamp(-STEER_MAX, STEER_MAX),
        },
    }
}

/// Differential entropy of a Gaussian.
pub fn gaussian_entropy(sigma: f64) -> f64 {
    0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + sigma.ln()
}

pub fn gaussian_log_prob(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossCoeffs {
    pub value_coeff: f64,
    pub entropy_coeff: f64,
}

impl Default for LossCoeffs {
    fn default() -> Self {
        Self {
            value_coeff: 0.5,
            entropy_coeff: 1e-3,
        }
    }
}
