//! Forward and backward passes. Feature maps are stored row, column, channel
//! so every convolution window reads contiguous blocks. The first layer
//! works directly on the bit-planes and only visits set cells.

use crate::error::{Error, Result};
use crate::map_env::{Observation, GRID, N_PLANES};

use super::{
    Gradients, HeadLayout, LossCoeffs, NetOutput, NetParams, PolicyArch, K1, K2, K3, MU_RANGE, N_HEADS, O1, O2,
    O3, S1, S2, SCALAR_SCALE, SIGMA_MIN,
};

/// Activations of one head kept for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct HeadCache {
    a1: Vec<f64>,
    a2: Vec<f64>,
    a3z: Vec<f64>,
    h: Vec<f64>,
    tanh_mu: f64,
    sigma_raw: f64,
}

#[derive(Clone, Debug, Default)]
pub struct ForwardCache {
    heads: [HeadCache; N_HEADS],
}

/// Scratch buffers for the backward pass.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    dh: Vec<f64>,
    dz: Vec<f64>,
    da2: Vec<f64>,
    da1: Vec<f64>,
}

impl Workspace {
    pub fn new(arch: &PolicyArch) -> Self {
        Self {
            dh: vec![0.0; arch.dense],
            dz: vec![0.0; arch.dense_inputs()],
            da2: vec![0.0; O2 * O2 * arch.conv2],
            da1: vec![0.0; O1 * O1 * arch.conv1],
        }
    }

    fn fit(&mut self, arch: &PolicyArch) {
        if self.dh.len() != arch.dense || self.da1.len() != O1 * O1 * arch.conv1 || self.dz.len() != arch.dense_inputs() {
            *self = Workspace::new(arch);
        }
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(k: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += k * xi;
    }
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Output rows (or columns) of the first convolution whose window covers input row `r`.
#[inline]
fn covering(r: usize) -> std::ops::RangeInclusive<usize> {
    let lo = if r + 1 >= K1 { (r + 1 - K1).div_ceil(S1) } else { 0 };
    let hi = (r / S1).min(O1 - 1);
    lo..=hi
}

fn check_obs(obs: &Observation) -> Result<()> {
    let s = obs.scalars.to_array();
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::ShapeMismatch("observation scalars must be finite".into()));
    }
    Ok(())
}

fn forward_head(p: &[f64], arch: &PolicyArch, hl: &HeadLayout, obs: &Observation, range: f64) -> (HeadCache, [f64; 3]) {
    let (c1, c2, c3) = (arch.conv1, arch.conv2, arch.conv3);

    let w1 = &p[hl.w1.clone()];
    let mut a1 = vec![0.0; O1 * O1 * c1];
    for cell in a1.chunks_exact_mut(c1) {
        cell.copy_from_slice(&p[hl.b1.clone()]);
    }
    for plane in 0..N_PLANES {
        for idx in obs.plane(plane).ones() {
            let (r, c) = (idx / GRID, idx % GRID);
            for oy in covering(r) {
                let ky = r - S1 * oy;
                for ox in covering(c) {
                    let kx = c - S1 * ox;
                    let w = &w1[((plane * K1 + ky) * K1 + kx) * c1..][..c1];
                    let out = &mut a1[(oy * O1 + ox) * c1..][..c1];
                    for (o, wv) in out.iter_mut().zip(w) {
                        *o += wv;
                    }
                }
            }
        }
    }
    a1.iter_mut().for_each(|v| *v = v.max(0.0));

    let w2 = &p[hl.w2.clone()];
    let b2 = &p[hl.b2.clone()];
    let mut a2 = vec![0.0; O2 * O2 * c2];
    for oy in 0..O2 {
        for ox in 0..O2 {
            for o in 0..c2 {
                let mut acc = b2[o];
                for ky in 0..K2 {
                    let inp = &a1[((S2 * oy + ky) * O1 + S2 * ox) * c1..][..K2 * c1];
                    let w = &w2[((o * K2 + ky) * K2) * c1..][..K2 * c1];
                    acc += dot(w, inp);
                }
                a2[(oy * O2 + ox) * c2 + o] = acc.max(0.0);
            }
        }
    }

    let w3 = &p[hl.w3.clone()];
    let b3 = &p[hl.b3.clone()];
    let mut a3z = vec![0.0; arch.dense_inputs()];
    for oy in 0..O3 {
        for ox in 0..O3 {
            for o in 0..c3 {
                let mut acc = b3[o];
                for ky in 0..K3 {
                    let inp = &a2[((oy + ky) * O2 + ox) * c2..][..K3 * c2];
                    let w = &w3[((o * K3 + ky) * K3) * c2..][..K3 * c2];
                    acc += dot(w, inp);
                }
                a3z[(oy * O3 + ox) * c3 + o] = acc.max(0.0);
            }
        }
    }
    let n_conv = O3 * O3 * c3;
    for (i, s) in obs.scalars.to_array().iter().enumerate() {
        a3z[n_conv + i] = s * SCALAR_SCALE[i];
    }

    let wd = &p[hl.wd.clone()];
    let bd = &p[hl.bd.clone()];
    let nz = a3z.len();
    let h: Vec<f64> = (0..arch.dense)
        .map(|j| (bd[j] + dot(&wd[j * nz..][..nz], &a3z)).max(0.0))
        .collect();

    let mu_raw = p[hl.b_mu] + dot(&p[hl.w_mu.clone()], &h);
    let sigma_raw = p[hl.b_sigma] + dot(&p[hl.w_sigma.clone()], &h);
    let v = p[hl.b_v] + dot(&p[hl.w_v.clone()], &h);
    let tanh_mu = mu_raw.tanh();
    let out = [range * tanh_mu, softplus(sigma_raw) + SIGMA_MIN, v];
    (
        HeadCache {
            a1,
            a2,
            a3z,
            h,
            tanh_mu,
            sigma_raw,
        },
        out,
    )
}

/// Deterministic forward pass of both heads.
pub fn forward(params: &NetParams, obs: &Observation) -> (NetOutput, ForwardCache) {
    let layout = params.layout();
    let mut cache = ForwardCache::default();
    let mut outs = [[0.0; 3]; N_HEADS];
    for h in 0..N_HEADS {
        let (c, o) = forward_head(&params.data, &params.arch, &layout.heads[h], obs, MU_RANGE[h]);
        cache.heads[h] = c;
        outs[h] = o;
    }
    (
        NetOutput {
            mu_acc: outs[0][0],
            sigma_acc: outs[0][1],
            v_acc: outs[0][2],
            mu_sa: outs[1][0],
            sigma_sa: outs[1][1],
            v_sa: outs[1][2],
        },
        cache,
    )
}

/// Accumulate into `g` the gradient of `g_mu * mu + g_sigma * sigma + g_v * v` for one head.
#[allow(clippy::too_many_arguments)]
fn backward_head(
    p: &[f64],
    arch: &PolicyArch,
    hl: &HeadLayout,
    obs: &Observation,
    cache: &HeadCache,
    range: f64,
    d_out: [f64; 3],
    g: &mut [f64],
    ws: &mut Workspace,
) {
    let [g_mu, g_sigma, g_v] = d_out;
    let gm = g_mu * range * (1.0 - cache.tanh_mu * cache.tanh_mu);
    let gs = g_sigma * sigmoid(cache.sigma_raw);
    if gm == 0.0 && gs == 0.0 && g_v == 0.0 {
        return;
    }
    let (c1, c2, c3) = (arch.conv1, arch.conv2, arch.conv3);
    let h = &cache.h;

    g[hl.b_mu] += gm;
    g[hl.b_sigma] += gs;
    g[hl.b_v] += g_v;
    let (w_mu, w_sig, w_v) = (&p[hl.w_mu.clone()], &p[hl.w_sigma.clone()], &p[hl.w_v.clone()]);
    for j in 0..arch.dense {
        g[hl.w_mu.start + j] += gm * h[j];
        g[hl.w_sigma.start + j] += gs * h[j];
        g[hl.w_v.start + j] += g_v * h[j];
        ws.dh[j] = if h[j] > 0.0 {
            gm * w_mu[j] + gs * w_sig[j] + g_v * w_v[j]
        } else {
            0.0
        };
    }

    let z = &cache.a3z;
    let nz = z.len();
    let n_conv = O3 * O3 * c3;
    ws.dz.iter_mut().for_each(|v| *v = 0.0);
    for j in 0..arch.dense {
        let d = ws.dh[j];
        if d == 0.0 {
            continue;
        }
        g[hl.bd.start + j] += d;
        let row = hl.wd.start + j * nz;
        axpy(d, z, &mut g[row..row + nz]);
        axpy(d, &p[row..row + n_conv], &mut ws.dz[..n_conv]);
    }
    for k in 0..n_conv {
        if z[k] <= 0.0 {
            ws.dz[k] = 0.0;
        }
    }

    ws.da2.iter_mut().for_each(|v| *v = 0.0);
    for oy in 0..O3 {
        for ox in 0..O3 {
            for o in 0..c3 {
                let d = ws.dz[(oy * O3 + ox) * c3 + o];
                if d == 0.0 {
                    continue;
                }
                g[hl.b3.start + o] += d;
                for ky in 0..K3 {
                    let inp = ((oy + ky) * O2 + ox) * c2;
                    let w = hl.w3.start + ((o * K3 + ky) * K3) * c2;
                    axpy(d, &cache.a2[inp..inp + K3 * c2], &mut g[w..w + K3 * c2]);
                    axpy(d, &p[w..w + K3 * c2], &mut ws.da2[inp..inp + K3 * c2]);
                }
            }
        }
    }
    for (d, a) in ws.da2.iter_mut().zip(&cache.a2) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }

    ws.da1.iter_mut().for_each(|v| *v = 0.0);
    for oy in 0..O2 {
        for ox in 0..O2 {
            for o in 0..c2 {
                let d = ws.da2[(oy * O2 + ox) * c2 + o];
                if d == 0.0 {
                    continue;
                }
                g[hl.b2.start + o] += d;
                for ky in 0..K2 {
                    let inp = ((S2 * oy + ky) * O1 + S2 * ox) * c1;
                    let w = hl.w2.start + ((o * K2 + ky) * K2) * c1;
                    axpy(d, &cache.a1[inp..inp + K2 * c1], &mut g[w..w + K2 * c1]);
                    axpy(d, &p[w..w + K2 * c1], &mut ws.da1[inp..inp + K2 * c1]);
                }
            }
        }
    }
    for (d, a) in ws.da1.iter_mut().zip(&cache.a1) {
        if *a <= 0.0 {
            *d = 0.0;
        }
    }

    for cell in ws.da1.chunks_exact(c1) {
        for (o, d) in cell.iter().enumerate() {
            g[hl.b1.start + o] += d;
        }
    }
    let gw1 = &mut g[hl.w1.clone()];
    for plane in 0..N_PLANES {
        for idx in obs.plane(plane).ones() {
            let (r, c) = (idx / GRID, idx % GRID);
            for oy in covering(r) {
                let ky = r - S1 * oy;
                for ox in covering(c) {
                    let kx = c - S1 * ox;
                    let d = &ws.da1[(oy * O1 + ox) * c1..][..c1];
                    let w = &mut gw1[((plane * K1 + ky) * K1 + kx) * c1..][..c1];
                    for (wv, dv) in w.iter_mut().zip(d) {
                        *wv += dv;
                    }
                }
            }
        }
    }
}

/// Per-head derivatives of the actor-critic loss with respect to (mu, sigma, v)
/// and the loss value.
pub(crate) fn rl_head_terms(
    mu: f64,
    sigma: f64,
    v: f64,
    x: f64,
    advantage: f64,
    value_target: f64,
    coeffs: &LossCoeffs,
) -> (f64, [f64; 3]) {
    let e = x - mu;
    let nlp = -super::gaussian_log_prob(x, mu, sigma);
    let ent = super::gaussian_entropy(sigma);
    let dv = v - value_target;
    let loss = nlp * advantage + coeffs.value_coeff * dv * dv - coeffs.entropy_coeff * ent;
    let s2 = sigma * sigma;
    let d_mu = -advantage * e / s2;
    let d_sigma = advantage * (1.0 / sigma - e * e / (s2 * sigma)) - coeffs.entropy_coeff / sigma;
    let d_v = 2.0 * coeffs.value_coeff * dv;
    (loss, [d_mu, d_sigma, d_v])
}

/// Accumulate the actor-critic gradient for one transition using the cached
/// forward pass; returns the loss. `raw` is the pre-clamp sampled action.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_rl(
    params: &NetParams,
    obs: &Observation,
    out: &NetOutput,
    cache: &ForwardCache,
    raw: [f64; N_HEADS],
    advantage: [f64; N_HEADS],
    value_target: [f64; N_HEADS],
    coeffs: &LossCoeffs,
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> f64 {
    ws.fit(&params.arch);
    let layout = params.layout();
    let mus = [out.mu_acc, out.mu_sa];
    let sigmas = [out.sigma_acc, out.sigma_sa];
    let vs = [out.v_acc, out.v_sa];
    let mut total = 0.0;
    for h in 0..N_HEADS {
        let (loss, d) = rl_head_terms(mus[h], sigmas[h], vs[h], raw[h], advantage[h], value_target[h], coeffs);
        total += loss;
        backward_head(
            &params.data,
            &params.arch,
            &layout.heads[h],
            obs,
            &cache.heads[h],
            MU_RANGE[h],
            d,
            &mut grads.data,
            ws,
        );
    }
    total
}

/// Accumulate the imitation gradient `(mu_acc - t_acc)^2 + (mu_sa - t_sa)^2`.
pub fn accumulate_il(
    params: &NetParams,
    obs: &Observation,
    out: &NetOutput,
    cache: &ForwardCache,
    target: [f64; N_HEADS],
    grads: &mut Gradients,
    ws: &mut Workspace,
) -> f64 {
    ws.fit(&params.arch);
    let layout = params.layout();
    let mus = [out.mu_acc, out.mu_sa];
    let mut total = 0.0;
    for h in 0..N_HEADS {
        let e = mus[h] - target[h];
        total += e * e;
        backward_head(
            &params.data,
            &params.arch,
            &layout.heads[h],
            obs,
            &cache.heads[h],
            MU_RANGE[h],
            [2.0 * e, 0.0, 0.0],
            &mut grads.data,
            ws,
        );
    }
    total
}

/// Actor-critic loss and its gradient for a single transition.
pub fn backward_rl(
    params: &NetParams,
    obs: &Observation,
    raw_action: [f64; N_HEADS],
    advantage: [f64; N_HEADS],
    value_target: [f64; N_HEADS],
    coeffs: &LossCoeffs,
) -> Result<(f64, Gradients)> {
    check_obs(obs)?;
    let (out, cache) = forward(params, obs);
    let mut g = Gradients::zeros_like(params);
    let mut ws = Workspace::new(&params.arch);
    let loss = accumulate_rl(params, obs, &out, &cache, raw_action, advantage, value_target, coeffs, &mut g, &mut ws);
    if !loss.is_finite() || !g.is_finite() {
        return Err(Error::Divergence(format!(
            "non-finite actor-critic loss {loss} (mu {:?}, sigma {:?}, v {:?})",
            [out.mu_acc, out.mu_sa],
            [out.sigma_acc, out.sigma_sa],
            [out.v_acc, out.v_sa]
        )));
    }
    Ok((loss, g))
}

/// Imitation loss and its gradient for a single sample.
pub fn backward_il(params: &NetParams, obs: &Observation, target: [f64; N_HEADS]) -> Result<(f64, Gradients)> {
    check_obs(obs)?;
    let (out, cache) = forward(params, obs);
    let mut g = Gradients::zeros_like(params);
    let mut ws = Workspace::new(&params.arch);
    let loss = accumulate_il(params, obs, &out, &cache, target, &mut g, &mut ws);
    Ok((loss, g))
}

/// ReLU activation pattern of a forward pass, for excluding kinks in
/// finite-difference checks.
#[doc(hidden)]
pub fn activation_pattern(params: &NetParams, obs: &Observation) -> Vec<bool> {
    let (_, cache) = forward(params, obs);
    cache
        .heads
        .iter()
        .flat_map(|c| {
            c.a1.iter()
                .chain(&c.a2)
                .chain(&c.a3z[..c.a3z.len() - crate::map_env::N_SCALARS])
                .chain(&c.h)
                .map(|v| *v > 0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::map_env::{BitPlane, Frame, Observation, Scalars, CELLS};
    use crate::policy::{PolicyInit, SampledAction};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn random_obs(seed: u64, density: f64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let frames: [Arc<Frame>; 4] = std::array::from_fn(|_| {
            let mut f = Frame::default();
            for plane in &mut f.planes {
                let mut b = BitPlane::default();
                for i in 0..CELLS {
                    if rng.random_bool(density) {
                        b.set(i / GRID, i % GRID);
                    }
                }
                *plane = b;
            }
            Arc::new(f)
        });
        Observation {
            frames,
            scalars: Scalars::new(6.0, rng.random_range(0.0..8.0), rng.random_range(-0.07..0.07), rng.random_range(-2.0..2.0)),
        }
    }

    fn tiny() -> PolicyArch {
        PolicyArch {
            conv1: 2,
            conv2: 2,
            conv3: 2,
            dense: 3,
        }
    }

    /// Straightforward dense reference: channel-major loops, no sparsity,
    /// no contiguous-block tricks.
    fn reference_forward(params: &NetParams, obs: &Observation) -> NetOutput {
        let a = params.arch;
        let l = params.layout();
        let p = &params.data;
        let x = obs.dense();
        let relu = |v: f64| if v > 0.0 { v } else { 0.0 };
        let mut res = [[0.0; 3]; 2];
        for h in 0..2 {
            let hl = &l.heads[h];
            // conv1: x[plane][row][col] -> a1[c][oy][ox]
            let mut a1 = vec![vec![vec![0.0; O1]; O1]; a.conv1];
            for c in 0..a.conv1 {
                for oy in 0..O1 {
                    for ox in 0..O1 {
                        let mut s = p[hl.b1.start + c];
                        for pl in 0..N_PLANES {
                            for ky in 0..K1 {
                                for kx in 0..K1 {
                                    let xi = x[pl * CELLS + (S1 * oy + ky) * GRID + S1 * ox + kx];
                                    s += p[hl.w1.start + ((pl * K1 + ky) * K1 + kx) * a.conv1 + c] * xi;
                                }
                            }
                        }
                        a1[c][oy][ox] = relu(s);
                    }
                }
            }
            let mut a2 = vec![vec![vec![0.0; O2]; O2]; a.conv2];
            for o in 0..a.conv2 {
                for oy in 0..O2 {
                    for ox in 0..O2 {
                        let mut s = p[hl.b2.start + o];
                        for c in 0..a.conv1 {
                            for ky in 0..K2 {
                                for kx in 0..K2 {
                                    s += p[hl.w2.start + ((o * K2 + ky) * K2 + kx) * a.conv1 + c]
                                        * a1[c][S2 * oy + ky][S2 * ox + kx];
                                }
                            }
                        }
                        a2[o][oy][ox] = relu(s);
                    }
                }
            }
            let mut z = vec![0.0; a.dense_inputs()];
            for o in 0..a.conv3 {
                for oy in 0..O3 {
                    for ox in 0..O3 {
                        let mut s = p[hl.b3.start + o];
                        for c in 0..a.conv2 {
                            for ky in 0..K3 {
                                for kx in 0..K3 {
                                    s += p[hl.w3.start + ((o * K3 + ky) * K3 + kx) * a.conv2 + c] * a2[c][oy + ky][ox + kx];
                                }
                            }
                        }
                        z[(oy * O3 + ox) * a.conv3 + o] = relu(s);
                    }
                }
            }
            let sc = obs.scalars.to_array();
            for i in 0..5 {
                z[O3 * O3 * a.conv3 + i] = sc[i] * SCALAR_SCALE[i];
            }
            let nz = z.len();
            let mut hid = vec![0.0; a.dense];
            for j in 0..a.dense {
                let mut s = p[hl.bd.start + j];
                for k in 0..nz {
                    s += p[hl.wd.start + j * nz + k] * z[k];
                }
                hid[j] = relu(s);
            }
            let lin = |w: &std::ops::Range<usize>, b: usize| p[b] + (0..a.dense).map(|j| p[w.start + j] * hid[j]).sum::<f64>();
            res[h] = [
                MU_RANGE[h] * lin(&hl.w_mu, hl.b_mu).tanh(),
                (1.0 + lin(&hl.w_sigma, hl.b_sigma).exp()).ln() + SIGMA_MIN,
                lin(&hl.w_v, hl.b_v),
            ];
        }
        NetOutput {
            mu_acc: res[0][0],
            sigma_acc: res[0][1],
            v_acc: res[0][2],
            mu_sa: res[1][0],
            sigma_sa: res[1][1],
            v_sa: res[1][2],
        }
    }

    fn perturbed(p: &NetParams, scale: f64, seed: u64) -> NetParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = p.clone();
        for v in &mut q.data {
            *v += rng.random_range(-scale..scale);
        }
        q
    }

    #[test]
    fn zero_weights_forward() {
        let p = NetParams::zeros(tiny());
        let (out, _) = forward(&p, &random_obs(1, 0.2));
        assert_eq!((out.mu_acc, out.mu_sa, out.v_acc, out.v_sa), (0.0, 0.0, 0.0, 0.0));
        let s = 2f64.ln() + 1e-3;
        assert!((out.sigma_acc - s).abs() < 1e-15 && (out.sigma_sa - s).abs() < 1e-15);
        assert!((out.sigma_acc - 0.6941).abs() < 1e-4);
    }

    #[test]
    fn matches_reference_forward() {
        for (arch, seed) in [(tiny(), 1), (PolicyArch { conv1: 3, conv2: 4, conv3: 2, dense: 5 }, 2)] {
            // larger output weights so the heads see non-trivial values
            let p = perturbed(&NetParams::init(arch, &PolicyInit::default(), seed).unwrap(), 0.3, seed);
            let obs = random_obs(seed + 10, 0.15);
            let (fast, _) = forward(&p, &obs);
            let slow = reference_forward(&p, &obs);
            for (a, b) in [
                (fast.mu_acc, slow.mu_acc),
                (fast.mu_sa, slow.mu_sa),
                (fast.sigma_acc, slow.sigma_acc),
                (fast.sigma_sa, slow.sigma_sa),
                (fast.v_acc, slow.v_acc),
                (fast.v_sa, slow.v_sa),
            ] {
                assert!((a - b).abs() <= 1e-10 * (1.0 + b.abs()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let p = NetParams::init(PolicyArch::desk(), &PolicyInit::default(), 5).unwrap();
        let obs = random_obs(3, 0.1);
        assert_eq!(forward(&p, &obs).0, forward(&p, &obs).0);
    }

    #[test]
    fn zero_advantage_at_value_target_gives_zero_mu_and_value_grads() {
        let p = perturbed(&NetParams::init(tiny(), &PolicyInit::default(), 4).unwrap(), 0.2, 4);
        let obs = random_obs(4, 0.1);
        let (out, _) = forward(&p, &obs);
        let coeffs = LossCoeffs {
            value_coeff: 0.5,
            entropy_coeff: 0.0,
        };
        let (_, g) = backward_rl(&p, &obs, [0.3, 0.01], [0.0, 0.0], [out.v_acc, out.v_sa], &coeffs).unwrap();
        assert!(g.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn il_gradient_skips_sigma_and_value_heads() {
        let p = perturbed(&NetParams::init(tiny(), &PolicyInit::default(), 6).unwrap(), 0.2, 6);
        let obs = random_obs(6, 0.1);
        let (_, g) = backward_il(&p, &obs, [1.0, -0.1]).unwrap();
        let l = p.layout();
        for hl in &l.heads {
            assert_eq!(g.data[hl.b_sigma], 0.0);
            assert_eq!(g.data[hl.b_v], 0.0);
            assert!(g.data[hl.w_sigma.clone()].iter().chain(&g.data[hl.w_v.clone()]).all(|v| *v == 0.0));
        }
        assert!(g.norm() > 0.0);
    }

    #[test]
    fn il_on_steering_only_leaves_acc_head_untouched() {
        let p = perturbed(&NetParams::init(tiny(), &PolicyInit::default(), 7).unwrap(), 0.2, 7);
        let obs = random_obs(7, 0.1);
        let (out, _) = forward(&p, &obs);
        let (_, g) = backward_il(&p, &obs, [out.mu_acc, 0.15]).unwrap();
        let l = p.layout();
        assert!(g.data[l.heads[0].range()].iter().all(|v| *v == 0.0));
        assert!(g.data[l.heads[1].range()].iter().any(|v| *v != 0.0));
    }

    #[test]
    fn il_zero_at_target() {
        let p = NetParams::init(tiny(), &PolicyInit::default(), 8).unwrap();
        let obs = random_obs(8, 0.1);
        let (out, _) = forward(&p, &obs);
        let (loss, g) = backward_il(&p, &obs, [out.mu_acc, out.mu_sa]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.data.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn accumulate_matches_single_shot() {
        let p = perturbed(&NetParams::init(tiny(), &PolicyInit::default(), 9).unwrap(), 0.2, 9);
        let coeffs = LossCoeffs::default();
        let obs: Vec<Observation> = (0..3).map(|i| random_obs(20 + i, 0.1)).collect();
        let mut acc = Gradients::zeros_like(&p);
        let mut ws = Workspace::new(&p.arch);
        let mut sum = Gradients::zeros_like(&p);
        for (i, o) in obs.iter().enumerate() {
            let raw = SampledAction::default().raw;
            let adv = [0.1 * i as f64, -0.2];
            let (out, cache) = forward(&p, o);
            accumulate_rl(&p, o, &out, &cache, raw, adv, [0.5, 0.1], &coeffs, &mut acc, &mut ws);
            sum.add(&backward_rl(&p, o, raw, adv, [0.5, 0.1], &coeffs).unwrap().1);
        }
        for (a, b) in acc.data.iter().zip(&sum.data) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn covering_windows() {
        assert_eq!(covering(0), 0..=0);
        assert_eq!(covering(4), 0..=1);
        assert_eq!(covering(7), 0..=1);
        assert_eq!(covering(8), 1..=2);
        assert_eq!(covering(83), 19..=19);
    }
}
